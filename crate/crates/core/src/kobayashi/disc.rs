//! Analytic-disc upper bounds for the Kobayashi metric.
//!
//! A disc through `x` tangent to `v̂ = v/‖v‖` is written
//! `f(ζ) = x + λ h(ζ)` with `h(ζ) = v̂ g_b(ζ)/(1−|b|²) + Σ_{k≥2} ĉ_k g_b(ζ)^k`
//! and `g_b(ζ) = (1−|b|²) ζ / (1 + b̄ ζ)`, so `f'(0) = λ v̂`. Polynomials in the
//! recentred coordinate `g_b` contain the extremal discs of every slice that
//! is itself a round disc. For a given shape `(b, ĉ)` the largest admissible
//! `λ` is the minimum over boundary samples of the exit time of the ray
//! `t ↦ x + t h(ζ)`; the shape is improved by coordinate descent.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domains::{boundary_along, DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::linalg::{inner, norm, norm_sqr, CVector, ONE};

/// Boundary samples used while optimizing.
pub const SEARCH_SAMPLES: usize = 64;
/// Boundary samples of the final certification pass.
pub const CERTIFY_SAMPLES: usize = 256;
/// Relative gap to a known lower bound at which the search stops.
pub const EARLY_STOP: f64 = 1e-7;

/// Polynomial disc `f(ζ) = x + Σ_k c_k g_b(ζ)^k` in the recentred coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticDisc {
    pub center: CVector,
    /// `c_1, …, c_d`.
    pub coefficients: Vec<CVector>,
    /// Recentring parameter `b`, `|b| < 1`.
    pub recenter: Complex64,
}

impl AnalyticDisc {
    pub fn degree(&self) -> usize {
        self.coefficients.len()
    }

    pub fn eval(&self, zeta: Complex64) -> CVector {
        let g = recentred(self.recenter, zeta);
        let mut out = self.center.clone();
        let mut gk = ONE;
        for c in &self.coefficients {
            gk *= g;
            out.axpy(gk, c, ONE);
        }
        out
    }

    /// `f'(0) = c_1 (1 − |b|²)`.
    pub fn derivative_at_zero(&self) -> CVector {
        self.coefficients[0].scale(1.0 - self.recenter.norm_sqr())
    }

    /// `ρ < 0` at `samples` equally spaced points of the circle `|ζ| = radius`.
    pub fn admissible(&self, domain: &DomainSpec, samples: usize, radius: f64) -> bool {
        (0..samples).all(|m| {
            let z =
                Complex64::from_polar(radius, std::f64::consts::TAU * m as f64 / samples as f64);
            domain.contains(&self.eval(z))
        })
    }
}

fn recentred(b: Complex64, zeta: Complex64) -> Complex64 {
    zeta * (1.0 - b.norm_sqr()) / (ONE + b.conj() * zeta)
}

/// Smallest positive root of `A t² + B t + C` with `C < 0`, or `∞`.
fn quadratic_exit(a: f64, b: f64, c: f64) -> f64 {
    if c >= 0.0 {
        return 0.0;
    }
    let disc = b * b - 4.0 * a * c;
    if a > 0.0 {
        let r = disc.sqrt();
        if b >= 0.0 {
            -2.0 * c / (b + r)
        } else {
            (-b + r) / (2.0 * a)
        }
    } else if a == 0.0 {
        if b > 0.0 {
            -c / b
        } else {
            f64::INFINITY
        }
    } else if disc >= 0.0 && b > 0.0 {
        -2.0 * c / (b + disc.sqrt())
    } else {
        f64::INFINITY
    }
}

/// First exit time of `t ↦ x + t u` (`t > 0`) from the domain (and its
/// defining neighborhood). Closed form on quadric and Kobayashi-ball domains.
pub fn exit_time(domain: &DomainSpec, x: &CVector, u: &CVector) -> f64 {
    let nu = norm(u);
    if nu == 0.0 {
        return f64::INFINITY;
    }
    let quadric = |weights: &[f64], center: &CVector, linear: f64| {
        let mut a = 0.0;
        let mut b = linear * u[0].re;
        for k in 0..x.len() {
            a += weights[k] * u[k].norm_sqr();
            b += 2.0 * weights[k] * ((x[k] - center[k]).conj() * u[k]).re;
        }
        quadratic_exit(a, b, domain.rho(x))
    };
    let t = match domain.kind() {
        DomainKind::Ball { center, .. } => quadric(&vec![1.0; x.len()], center, 0.0),
        DomainKind::Ellipsoid { weights } => quadric(weights, &CVector::zeros(x.len()), 0.0),
        DomainKind::Siegel => {
            let mut w = vec![1.0; x.len()];
            w[0] = 0.0;
            quadric(&w, &CVector::zeros(x.len()), -1.0)
        }
        DomainKind::Quadric {
            weights,
            center,
            linear,
            ..
        } => quadric(weights, center, *linear),
        DomainKind::KobayashiBall { center, radius } => {
            // ‖φ_q(z)‖ < s ⇔ (1−s²)|1−⟨z,q⟩|² − (1−‖q‖²)(1−‖z‖²) < 0
            let s2 = radius.tanh().powi(2);
            let q2 = norm_sqr(center);
            let a0 = ONE - inner(x, center);
            let a1 = -inner(u, center);
            let a = (1.0 - s2) * a1.norm_sqr() + (1.0 - q2) * norm_sqr(u);
            let b = 2.0 * (1.0 - s2) * (a0 * a1.conj()).re + 2.0 * (1.0 - q2) * inner(x, u).re;
            let c = (1.0 - s2) * a0.norm_sqr() - (1.0 - q2) * (1.0 - norm_sqr(x));
            quadratic_exit(a, b, c)
        }
        _ => match boundary_along(domain, x, u) {
            Ok(hit) => hit.distance / nu,
            Err(_) => f64::INFINITY,
        },
    };
    let nb = domain.neighborhood();
    if nb.radius.is_finite() {
        // stay inside U as well
        let rel = x - &nb.center;
        let a = nu * nu;
        let b = 2.0 * inner(&rel, u).re;
        let c = norm_sqr(&rel) - nb.radius * nb.radius;
        t.min(quadratic_exit(a, b, c))
    } else {
        t
    }
}

/// Shape parameters: `β ∈ C` with `b = tanh|β| β/|β|`, then `ĉ_2, …, ĉ_d`.
#[derive(Debug, Clone)]
struct Shape {
    params: Vec<f64>,
    dim: usize,
}

impl Shape {
    fn new(dim: usize, degree: usize) -> Self {
        Shape {
            params: vec![0.0; 2 + 2 * dim * (degree - 1)],
            dim,
        }
    }

    fn recenter(&self) -> Complex64 {
        let beta = Complex64::new(self.params[0], self.params[1]);
        let r = beta.norm();
        if r == 0.0 {
            beta
        } else {
            beta * (r.tanh() / r)
        }
    }

    fn higher(&self) -> Vec<CVector> {
        let n = self.dim;
        self.params[2..]
            .chunks(2 * n)
            .map(|c| {
                CVector::from_iterator(n, (0..n).map(|k| Complex64::new(c[2 * k], c[2 * k + 1])))
            })
            .collect()
    }

    fn direction(
        &self,
        vhat: &CVector,
        b: Complex64,
        higher: &[CVector],
        zeta: Complex64,
    ) -> CVector {
        let g = recentred(b, zeta);
        let mut u = vhat * (g / (1.0 - b.norm_sqr()));
        let mut gk = g;
        for c in higher {
            gk *= g;
            u.axpy(gk, c, ONE);
        }
        u
    }

    /// `min_m exit(x, h(ζ_m))` over `samples` equally spaced points, plus the
    /// angle of the minimizer.
    fn lambda(
        &self,
        domain: &DomainSpec,
        x: &CVector,
        vhat: &CVector,
        samples: usize,
    ) -> (f64, f64) {
        let b = self.recenter();
        let higher = self.higher();
        let mut best = (f64::INFINITY, 0.0);
        for m in 0..samples {
            let theta = std::f64::consts::TAU * m as f64 / samples as f64;
            let t = exit_time(
                domain,
                x,
                &self.direction(vhat, b, &higher, Complex64::from_polar(1.0, theta)),
            );
            if t < best.0 {
                best = (t, theta);
            }
        }
        best
    }

    fn exit_at(&self, domain: &DomainSpec, x: &CVector, vhat: &CVector, theta: f64) -> f64 {
        let b = self.recenter();
        exit_time(
            domain,
            x,
            &self.direction(vhat, b, &self.higher(), Complex64::from_polar(1.0, theta)),
        )
    }

    /// Certified `λ`: dense sampling plus golden-section refinement of the
    /// minimum exit time around the worst samples.
    fn certified_lambda(&self, domain: &DomainSpec, x: &CVector, vhat: &CVector) -> f64 {
        let m = CERTIFY_SAMPLES;
        let h = std::f64::consts::TAU / m as f64;
        let times: Vec<f64> = (0..m)
            .map(|k| self.exit_at(domain, x, vhat, k as f64 * h))
            .collect();
        let mut lam = times.iter().cloned().fold(f64::INFINITY, f64::min);
        // refine every local minimum
        for k in 0..m {
            let prev = times[(k + m - 1) % m];
            let next = times[(k + 1) % m];
            if times[k] <= prev && times[k] <= next && times[k].is_finite() {
                let (mut a, mut b) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
                let phi = 0.5 * (5f64.sqrt() - 1.0);
                let mut c = b - phi * (b - a);
                let mut d = a + phi * (b - a);
                let (mut fc, mut fd) = (
                    self.exit_at(domain, x, vhat, c),
                    self.exit_at(domain, x, vhat, d),
                );
                for _ in 0..40 {
                    if fc < fd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - phi * (b - a);
                        fc = self.exit_at(domain, x, vhat, c);
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + phi * (b - a);
                        fd = self.exit_at(domain, x, vhat, d);
                    }
                }
                lam = lam.min(fc).min(fd);
            }
        }
        lam
    }

    fn disc(&self, x: &CVector, vhat: &CVector, lambda: f64) -> AnalyticDisc {
        let b = self.recenter();
        let mut coefficients = vec![vhat * Complex64::new(lambda / (1.0 - b.norm_sqr()), 0.0)];
        coefficients.extend(self.higher().into_iter().map(|c| c.scale(lambda)));
        AnalyticDisc {
            center: x.clone(),
            coefficients,
            recenter: b,
        }
    }
}

/// Result of a disc search: `‖v‖/λ` with the certified witness.
#[derive(Debug, Clone)]
pub struct DiscSearch {
    pub upper: f64,
    pub witness: AnalyticDisc,
    pub evaluations: usize,
}

/// Maximizes `λ` over disc shapes of the given degree (coordinate descent
/// with shrinking steps from the affine seed), stopping early once the bound
/// is within [`EARLY_STOP`] of `target` when one is given.
pub fn search(
    domain: &DomainSpec,
    x: &CVector,
    v: &CVector,
    degree: usize,
    budget: usize,
    target: Option<f64>,
) -> Result<DiscSearch> {
    let nv = norm(v);
    if nv == 0.0 {
        return Err(Error::InvalidArgument("zero tangent vector".into()));
    }
    if !domain.contains(x) {
        return Err(Error::PreconditionViolated(
            "disc centre not interior".into(),
        ));
    }
    let degree = degree.max(1);
    let vhat = v.unscale(nv);
    let mut shape = Shape::new(x.len(), degree);
    let (mut best, _) = shape.lambda(domain, x, &vhat, SEARCH_SAMPLES);
    if !(best > 0.0) {
        return Err(Error::NoAdmissibleDisc);
    }
    let mut evaluations = 1;
    let done = |lam: f64| match target {
        Some(t) => nv / lam <= t * (1.0 + EARLY_STOP),
        None => false,
    };
    if best.is_finite() {
        // the recentring alone reaches the extremal disc of round slices, so
        // it is settled first; then every coefficient joins in
        let stages: [&[usize]; 2] = [&[0, 1], &(0..shape.params.len()).collect::<Vec<_>>()];
        let mut rng = ChaCha8Rng::seed_from_u64(0xd15c);
        for active in stages {
            let mut steps = vec![0.25; shape.params.len()];
            while evaluations < budget && !done(best) {
                let mut improved = false;
                'coords: for &i in active {
                    for sign in [1.0, -1.0] {
                        let mut cand = shape.clone();
                        cand.params[i] += sign * steps[i];
                        let (lam, _) = cand.lambda(domain, x, &vhat, SEARCH_SAMPLES);
                        evaluations += 1;
                        if lam > best {
                            best = lam;
                            shape = cand;
                            improved = true;
                            steps[i] *= 1.5;
                            break;
                        }
                        if evaluations >= budget || done(best) {
                            break 'coords;
                        }
                    }
                }
                if !improved && evaluations < budget {
                    // the objective is a minimum over samples; ridges defeat
                    // axis moves, so probe a few random directions as well
                    let scale = active.iter().map(|&i| steps[i]).sum::<f64>() / active.len() as f64;
                    for _ in 0..2 * active.len() {
                        let mut cand = shape.clone();
                        for &i in active {
                            cand.params[i] += scale * rng.sample::<f64, _>(StandardNormal);
                        }
                        let (lam, _) = cand.lambda(domain, x, &vhat, SEARCH_SAMPLES);
                        evaluations += 1;
                        if lam > best {
                            best = lam;
                            shape = cand;
                            improved = true;
                            break;
                        }
                        if evaluations >= budget {
                            break;
                        }
                    }
                }
                if !improved {
                    let mut all_small = true;
                    for &i in active {
                        steps[i] *= 0.5;
                        all_small &= steps[i] < 1e-9;
                    }
                    if all_small {
                        break;
                    }
                }
            }
        }
    }
    let lam = shape.certified_lambda(domain, x, &vhat).min(best) * (1.0 - 1e-12);
    let upper = if lam.is_finite() { nv / lam } else { 0.0 };
    let witness = shape.disc(x, &vhat, if lam.is_finite() { lam } else { 1.0 });
    Ok(DiscSearch {
        upper,
        witness,
        evaluations,
    })
}
