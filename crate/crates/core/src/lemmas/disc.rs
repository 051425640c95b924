use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::report::{Entry, Report};
use crate::sampling::Streams;

/// Radial × angular resolution of the `|z| ≤ 1 − ε` grid.
pub const GRID_RADIAL: usize = 64;
pub const GRID_ANGULAR: usize = 256;
/// Coarser grid used inside [`empirical_delta`] sweeps.
const SWEEP_RADIAL: usize = 32;
const SWEEP_ANGULAR: usize = 128;
/// Points on `|z| = 1 − 1e-9` for the self-map check.
const BOUNDARY_SAMPLES: usize = 512;
/// Candidate `δ` values, largest first.
pub const DELTA_GRID: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

const DERIVATIVE_RADIUS: f64 = 1e-3;
const DERIVATIVE_POINTS: usize = 16;

/// Holomorphic self-map of the unit disc.
#[derive(Clone)]
pub struct DiscMap {
    label: String,
    f: Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>,
}

impl fmt::Debug for DiscMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiscMap({})", self.label)
    }
}

impl DiscMap {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        DiscMap {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn identity() -> Self {
        Self::new("identity", |z| z)
    }

    pub fn rotation(alpha: f64) -> Self {
        let w = Complex64::from_polar(1.0, alpha);
        Self::new(format!("rotation({alpha})"), move |z| w * z)
    }

    /// `z ∏ (z − a_k)/(1 − ā_k z)` times the unimodular constant that makes
    /// `f'(0) = ∏ |a_k|` real and positive.
    pub fn blaschke(zeros: &[Complex64]) -> Self {
        let zeros = zeros.to_vec();
        let lead: Complex64 = zeros.iter().map(|a| -a).product();
        let phase = if lead.norm() > 0.0 {
            lead.conj() / lead.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let label = format!("blaschke({} zeros)", zeros.len());
        Self::new(label, move |z| {
            let mut w = z * phase;
            for a in &zeros {
                w *= (z - a) / (Complex64::new(1.0, 0.0) - a.conj() * z);
            }
            w
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.f)(z)
    }

    /// `f'(0)` from the trapezoidal Cauchy integral on a small circle.
    pub fn derivative_at_zero(&self) -> Complex64 {
        let h = DERIVATIVE_RADIUS;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..DERIVATIVE_POINTS {
            let w = Complex64::from_polar(1.0, TAU * k as f64 / DERIVATIVE_POINTS as f64);
            acc += self.eval(w * h) * w.conj();
        }
        acc / (h * DERIVATIVE_POINTS as f64)
    }
}

/// `sup |f(z) − z|` over the polar grid of `|z| ≤ radius`.
pub fn grid_deviation(f: &DiscMap, radius: f64, radial: usize, angular: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..radial {
        let rho = radius * i as f64 / (radial - 1).max(1) as f64;
        for k in 0..angular {
            let z = Complex64::from_polar(rho, TAU * k as f64 / angular as f64);
            worst = worst.max((f.eval(z) - z).norm());
        }
    }
    worst
}

fn check_preconditions(f: &DiscMap, delta: f64) -> Result<Complex64> {
    let f0 = f.eval(Complex64::new(0.0, 0.0));
    if f0.norm() > 1e-12 {
        return Err(Error::PreconditionViolated(format!("f(0) = {f0} is not 0")));
    }
    let edge = 1.0 - 1e-9;
    for k in 0..BOUNDARY_SAMPLES {
        let z = Complex64::from_polar(edge, TAU * k as f64 / BOUNDARY_SAMPLES as f64);
        let w = f.eval(z).norm();
        if !(w <= 1.0 + 1e-12) {
            return Err(Error::PreconditionViolated(format!(
                "|f| = {w} on the boundary samples"
            )));
        }
    }
    let d = f.derivative_at_zero();
    if d.im.abs() > 1e-9 * d.norm().max(1.0) {
        return Err(Error::PreconditionViolated(format!(
            "f'(0) = {d} is not real"
        )));
    }
    if !(d.re > 1.0 - delta) {
        return Err(Error::PreconditionViolated(format!(
            "f'(0) = {} is not above 1 − δ = {}",
            d.re,
            1.0 - delta
        )));
    }
    Ok(d)
}

/// Checks `|f(z) − z| < ε` on `|z| ≤ 1 − ε` for a disc self-map with
/// `f(0) = 0` and real `f'(0) > 1 − δ`.
pub fn disc_lemma_check(f: &DiscMap, delta: f64, eps: f64) -> Result<Report> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < ε < 1 and δ > 0, got ε = {eps}, δ = {delta}"
        )));
    }
    let d = check_preconditions(f, delta)?;
    let sup = grid_deviation(f, 1.0 - eps, GRID_RADIAL, GRID_ANGULAR);
    let mut rep = Report::new("disc_lemma");
    rep.push(Entry::info("delta", delta));
    rep.push(Entry::info("eps", eps));
    rep.push(Entry::info("f_prime_0", d.re));
    rep.push(Entry::check("sup_deviation", sup, eps - sup, 0.0));
    Ok(rep)
}

/// Admissible maps for a given `δ`: Blaschke products of degree ≤ 3 with
/// `f(0) = 0` and `f'(0) > 1 − δ`, zeros at log-spaced depths below the
/// circle and seeded random angles.
pub fn blaschke_family(delta: f64, budget: usize, streams: &Streams) -> Vec<DiscMap> {
    let mut rng = streams.stream(0xb1a5 ^ delta.to_bits());
    let depths: Vec<f64> = (0..8)
        .map(|i| delta * 10f64.powf(-3.0 * i as f64 / 7.0))
        .collect();
    let mut out = vec![DiscMap::identity()];
    let mut tries = 0;
    while out.len() < budget && tries < 20 * budget {
        tries += 1;
        let degree = 1 + (tries % 2);
        let zeros: Vec<Complex64> = (0..degree)
            .map(|_| {
                let m = depths[rng.random_range(0..depths.len())] / degree as f64;
                Complex64::from_polar(1.0 - m, TAU * rng.random::<f64>())
            })
            .collect();
        let lead: f64 = zeros.iter().map(|a| a.norm()).product();
        if lead > 1.0 - delta {
            out.push(DiscMap::blaschke(&zeros));
        }
    }
    out
}

/// Largest `δ` on [`DELTA_GRID`] for which every map produced by `family`
/// satisfies the conclusion at `ε`; 0 when none does.
pub fn empirical_delta_with<F>(eps: f64, budget: usize, family: F) -> Result<f64>
where
    F: Fn(f64, usize) -> Vec<DiscMap>,
{
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("ε = {eps} outside (0, 1)")));
    }
    for &delta in &DELTA_GRID {
        let ok = family(delta, budget).iter().all(|f| {
            let d = f.derivative_at_zero();
            // maps outside the admissible class for this δ impose nothing
            d.re <= 1.0 - delta || grid_deviation(f, 1.0 - eps, SWEEP_RADIAL, SWEEP_ANGULAR) < eps
        });
        if ok {
            return Ok(delta);
        }
    }
    Ok(0.0)
}

/// [`empirical_delta_with`] over [`blaschke_family`].
pub fn empirical_delta(eps: f64, budget: usize, streams: &Streams) -> Result<f64> {
    empirical_delta_with(eps, budget, |delta, n| blaschke_family(delta, n, streams))
}
