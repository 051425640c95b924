use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::levi::{
    holomorphic_hessian, is_strongly_pseudoconvex, levi_matrix, PseudoconvexityCheck,
    TANGENT_SAMPLES,
};
use super::{real_differential, DefiningFunction, DomainSpec, Neighborhood, Orientation};
use crate::error::{Error, Result};
use crate::holomap::{HoloMap, MapTag, QuadraticShear};
use crate::linalg::{
    condition_number, hermitian_sqrt, inner, norm, op_norm, COperator, CVector, I, ONE,
};
use crate::report::{Entry, Report};
use crate::sampling::{uniform_ball, Streams};

/// Step for the directional derivative of the Jacobian of `G^{-1}`.
const JACOBIAN_STEP: f64 = 1e-4;

/// `ρ_G(w) = ρ(G^{-1}(w)) / ‖dρ(p)‖`, so that `ρ_G = −Re w_1 + O(|w|²)`.
#[derive(Clone)]
pub struct NormalizedRho {
    inner: Arc<dyn DefiningFunction>,
    g_inv: HoloMap,
    scale: f64,
    nbhd: Neighborhood,
}

impl fmt::Debug for NormalizedRho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NormalizedRho({:?}, scale={})", self.inner, self.scale)
    }
}

impl DefiningFunction for NormalizedRho {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, w: &CVector) -> f64 {
        match self.g_inv.eval(w) {
            Ok(z) => self.inner.value(&z) / self.scale,
            Err(_) => f64::INFINITY,
        }
    }

    fn neighborhood(&self) -> Neighborhood {
        self.nbhd.clone()
    }

    fn complex_gradient(&self, w: &CVector) -> CVector {
        match (self.g_inv.eval(w), self.g_inv.jacobian(w)) {
            (Ok(z), Ok(j)) => (j.transpose() * self.inner.complex_gradient(&z)).unscale(self.scale),
            _ => super::fd_complex_gradient(self, w),
        }
    }

    /// `d²(ρ∘F)(v, u) = d²ρ(F; F'v, F'u) + dρ(F; F''(v, u))`, with `F''` from a
    /// central difference of the Jacobian (exact for quadratic maps).
    fn second_differential(&self, w: &CVector, v: &CVector, u: &CVector) -> f64 {
        let eval = || -> Result<f64> {
            let z = self.g_inv.eval(w)?;
            let j = self.g_inv.jacobian(w)?;
            let h = JACOBIAN_STEP;
            let jp = self.g_inv.jacobian(&(w + u.scale(h)))?;
            let jm = self.g_inv.jacobian(&(w - u.scale(h)))?;
            let second = ((jp - jm) * v).unscale(2.0 * h);
            let a = self.inner.complex_gradient(&z);
            let d2 = self.inner.second_differential(&z, &(&j * v), &(&j * u))
                + real_differential(&a, &second);
            Ok(d2 / self.scale)
        };
        eval().unwrap_or_else(|_| super::fd_second_differential(self, w, v, u))
    }
}

/// Normal form at a strongly pseudoconvex boundary point: `G(p) = 0` and
/// `G(Ω ∩ U) = {Re w_1 > ψ(Im w_1, w') + o(|Im w_1|² + ‖w'‖²)}` near 0 with
/// `ψ` convex and `ψ(0, w') = ‖w'‖² + O(|w|³)`.
///
/// `G = C_κ ∘ D ∘ S ∘ T`: `T(z) = R(z − p)` rotates the inner normal onto
/// `e_1`; `S` removes the pluriharmonic quadratic terms; `D` makes the
/// tangential Levi form the identity; `C_κ(w) = (w_1 − κ w_1², w')` raises
/// the `(Im w_1)²` coefficient when the quadratic part is not already convex.
#[derive(Debug, Clone)]
pub struct NormalizedDomain {
    pub g: HoloMap,
    pub g_inv: HoloMap,
    pub base: CVector,
    /// `‖dρ(p)‖ = 2‖∂ρ(p)‖`.
    pub scale: f64,
    pub kappa: f64,
    /// Hermitian model `M` with `ψ(t, w') ≈ X^H M X`, `X = (it, w')`.
    pub model: COperator,
    pub pseudoconvexity: PseudoconvexityCheck,
    rho: Arc<NormalizedRho>,
    source_basepoint: CVector,
}

/// Unitary `R` with `R ν = −e_1` (Householder reflection times a phase).
fn rotation_to_inner_normal(nu: &CVector) -> COperator {
    let n = nu.len();
    let alpha = if nu[0].norm() > 0.0 {
        nu[0] / nu[0].norm()
    } else {
        ONE
    };
    let mut u = nu.clone();
    u[0] += alpha;
    let uu = inner(&u, &u).re;
    let house = COperator::identity(n, n) - (&u * u.adjoint()) * Complex64::new(2.0 / uu, 0.0);
    let mut d = COperator::identity(n, n);
    d[(0, 0)] = alpha.conj();
    d * house
}

/// Builds the normalization `G` at the boundary point `p`.
pub fn normalize_at(domain: &DomainSpec, p: &CVector) -> Result<NormalizedDomain> {
    let check = is_strongly_pseudoconvex(domain, p, TANGENT_SAMPLES)?;
    if !(check.strongly && check.exact_min > 0.0) {
        return Err(Error::NotStronglyPseudoconvex(
            check.exact_min.min(check.c_estimate),
        ));
    }
    let n = domain.dim();
    let rho = domain.defining_arc();
    let a = rho.complex_gradient(p);
    let scale = 2.0 * norm(&a);
    let nu = a.map(|c| c.conj()).unscale(norm(&a));

    let r = rotation_to_inner_normal(&nu);
    let translate = HoloMap::affine(r.clone(), -(&r * p), MapTag::Normalization);

    let m = levi_matrix(rho.as_ref(), p);
    let b = holomorphic_hessian(rho.as_ref(), p);
    let r_conj = r.map(|c| c.conj());
    let m1 = (&r * &m * r.adjoint()).unscale(scale);
    let b1 = (&r_conj * &b * r.adjoint()).unscale(scale);
    let shear = HoloMap::from_leaf(QuadraticShear { coeffs: -b1 }, MapTag::Normalization, n);

    let mut d = COperator::identity(n, n);
    let mut m2 = m1.clone();
    if n > 1 {
        let tangential = m1.view((1, 1), (n - 1, n - 1)).into_owned();
        let root = hermitian_sqrt(&tangential);
        let root_inv = root
            .clone()
            .try_inverse()
            .ok_or(Error::NotStronglyPseudoconvex(check.exact_min))?;
        d.view_mut((1, 1), (n - 1, n - 1)).copy_from(&root);
        let mut d_inv = COperator::identity(n, n);
        d_inv.view_mut((1, 1), (n - 1, n - 1)).copy_from(&root_inv);
        m2 = d_inv.adjoint() * &m1 * &d_inv;
    }
    let dilate = HoloMap::linear(d, MapTag::Normalization);

    // (M_11 + κ) t² + 2t Re(−i c·w') + ‖w'‖² is convex iff M_11 + κ ≥ ‖c‖²
    let m11 = m2[(0, 0)].re;
    let c_sq: f64 = (1..n).map(|k| m2[(0, k)].norm_sqr()).sum();
    let kappa = if m11 >= c_sq { 0.0 } else { c_sq - m11 + 0.5 };
    let mut parts = vec![translate, shear, dilate];
    if kappa > 0.0 {
        let mut cb = COperator::zeros(n, n);
        cb[(0, 0)] = Complex64::new(-kappa, 0.0);
        parts.push(HoloMap::from_leaf(
            QuadraticShear { coeffs: cb },
            MapTag::Normalization,
            n,
        ));
    }
    let mut model = m2;
    model[(0, 0)] += Complex64::new(kappa, 0.0);

    let g = HoloMap::compose_all(&parts);
    let g_inv = g
        .closed_inverse()
        .expect("every normalization factor has a closed inverse");

    let u = domain.neighborhood();
    let jinv = g_inv.jacobian(&CVector::zeros(n))?;
    let mut radius = if u.radius.is_finite() {
        0.9 * (u.radius - norm(&(p - &u.center))) / op_norm(&jinv)
    } else {
        f64::INFINITY
    };
    if kappa > 0.0 {
        radius = radius.min(1.0 / (8.0 * kappa));
    }
    let nbhd = Neighborhood {
        center: CVector::zeros(n),
        radius,
    };
    let normalized = NormalizedRho {
        inner: rho,
        g_inv: g_inv.clone(),
        scale,
        nbhd,
    };

    Ok(NormalizedDomain {
        g,
        g_inv,
        base: p.clone(),
        scale,
        kappa,
        model,
        pseudoconvexity: check,
        rho: Arc::new(normalized),
        source_basepoint: domain.basepoint().clone(),
    })
}

/// Real tangent basis `{i e_1, e_2, i e_2, …}` of `{Re w_1 = 0}`.
fn real_tangent_basis(n: usize) -> Vec<CVector> {
    let mut out = Vec::with_capacity(2 * n - 1);
    out.push(crate::linalg::basis(n, 0) * I);
    for k in 1..n {
        let e = crate::linalg::basis(n, k);
        out.push(e.clone());
        out.push(e * I);
    }
    out
}

impl NormalizedDomain {
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn rho(&self) -> Arc<NormalizedRho> {
        self.rho.clone()
    }

    /// The normalized domain `{ρ_G < 0}` with interior along `+e_1`, so its
    /// boundary is reached by decreasing `Re w_1`.
    pub fn as_domain(&self) -> DomainSpec {
        let n = self.dim();
        let mut base = self
            .g
            .eval(&self.source_basepoint)
            .ok()
            .filter(|w| self.rho.neighborhood().contains(w) && self.rho.value(w) < 0.0);
        if base.is_none() {
            let mut t = self.rho.neighborhood().radius.min(0.1) * 0.5;
            for _ in 0..60 {
                let w = crate::linalg::basis(n, 0).scale(t);
                if self.rho.value(&w) < 0.0 {
                    base = Some(w);
                    break;
                }
                t *= 0.5;
            }
        }
        let base = base.unwrap_or_else(|| crate::linalg::basis(n, 0).scale(1e-6));
        DomainSpec::custom(self.rho.clone(), base, Orientation::MinusE1)
    }

    /// `X = (it, w')`; `tail` is a full-length vector whose first entry is ignored.
    pub fn tangent_point(t: f64, tail: &CVector) -> CVector {
        let mut x = tail.clone();
        x[0] = Complex64::new(0.0, t);
        x
    }

    /// Second-order model `X^H M X` of `ψ`.
    pub fn psi_quadratic(&self, t: f64, tail: &CVector) -> f64 {
        let x = Self::tangent_point(t, tail);
        inner(&(&self.model * &x), &x).re
    }

    /// `ψ(t, w')`: the root `s` of `ρ_G(s + it, w') = 0` near 0.
    pub fn psi(&self, t: f64, tail: &CVector) -> Result<f64> {
        let x = Self::tangent_point(t, tail);
        let f = |s: f64| {
            let mut w = x.clone();
            w[0].re = s;
            self.rho.value(&w)
        };
        // ρ_G decreases in s near 0; bracket the root around the model value
        let guess = self.psi_quadratic(t, tail);
        let mut width = 2.0 * guess.abs() + 1e-3 * norm(&x).max(1e-6);
        let (mut lo, mut hi);
        let mut attempts = 0;
        loop {
            lo = guess - width;
            hi = guess + width;
            let (flo, fhi) = (f(lo), f(hi));
            if flo.is_finite() && fhi.is_finite() && flo > 0.0 && fhi < 0.0 {
                break;
            }
            if flo == 0.0 {
                return Ok(lo);
            }
            if fhi == 0.0 {
                return Ok(hi);
            }
            attempts += 1;
            if attempts > 40 {
                return Err(Error::NoBoundaryHit);
            }
            width *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                return Ok(mid);
            }
            if fm > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1e-300) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Gradient of `ψ` at 0 from `∂ρ_G(0)`: `(−2 Im a_1, 2a')` up to `1/(−2 Re a_1)`.
    pub fn psi_gradient_norm(&self) -> f64 {
        let a = self.rho.complex_gradient(&CVector::zeros(self.dim()));
        let s = -2.0 * a[0].re;
        let tail: f64 = (1..a.len()).map(|k| a[k].norm_sqr()).sum();
        (4.0 * a[0].im * a[0].im + 4.0 * tail).sqrt() / s
    }

    /// Real `(2N−1)²` Hessian of `ψ` at 0 in the basis `{i e_1, e_2, i e_2, …}`.
    pub fn psi_hessian(&self) -> DMatrix<f64> {
        let n = self.dim();
        let basis = real_tangent_basis(n);
        let z = CVector::zeros(n);
        let k = basis.len();
        let mut h = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = self.rho.second_differential(&z, &basis[i], &basis[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    /// Same basis, from the model `M` (`Hess ψ = 2 Re M` on real tangent vectors).
    pub fn model_hessian(&self) -> DMatrix<f64> {
        let basis = real_tangent_basis(self.dim());
        let k = basis.len();
        DMatrix::from_fn(k, k, |i, j| {
            2.0 * inner(&(&self.model * &basis[j]), &basis[i]).re
        })
    }

    /// Structural checks plus convexity/remainder checks on boundary samples
    /// within `radius` of `p` in normalized coordinates.
    pub fn verify(&self, radius: f64, samples: usize, streams: &Streams) -> Report {
        let n = self.dim();
        let mut rep = Report::new("normalize");
        let gp = self
            .g
            .eval(&self.base)
            .map(|w| norm(&w))
            .unwrap_or(f64::INFINITY);
        rep.push(Entry::check("g_at_p", gp, 1e-12 - gp, 0.0));
        let cond = self
            .g
            .jacobian(&self.base)
            .map(|j| condition_number(&j))
            .unwrap_or(f64::INFINITY);
        rep.push(Entry::check("dg_condition", cond, 1e8 - cond, 0.0));
        let psi0 = self
            .psi(0.0, &CVector::zeros(n))
            .map(f64::abs)
            .unwrap_or(f64::INFINITY);
        rep.push(Entry::check("psi_at_0", psi0, 1e-12 - psi0, 0.0));
        let grad = self.psi_gradient_norm();
        rep.push(Entry::check("psi_gradient", grad, 1e-8 - grad, 0.0));

        let hess = self.psi_hessian();
        let model = self.model_hessian();
        let gap = (&hess - &model).amax();
        rep.push(Entry::check("hessian_vs_model", gap, 1e-6 - gap, 0.0));
        let eig = SymmetricEigen::new(hess.clone()).eigenvalues;
        let min_all = eig.min();
        rep.push(Entry::check(
            "hessian_min_eigenvalue",
            min_all,
            min_all,
            1e-7,
        ));
        let min_tan = if n > 1 {
            SymmetricEigen::new(hess.view((1, 1), (2 * n - 2, 2 * n - 2)).into_owned())
                .eigenvalues
                .min()
        } else {
            f64::INFINITY
        };
        rep.push(Entry::check(
            "hessian_tangential_min",
            min_tan,
            min_tan - 1e-6,
            0.0,
        ));
        rep.push(Entry::info("kappa", self.kappa));

        let mut rng = streams.stream(0x6e);
        let mut worst_remainder: f64 = 0.0;
        let mut worst_convexity = f64::INFINITY;
        let mut failures = 0usize;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let x = uniform_ball(n, radius, rng);
            (x[0].im, crate::linalg::tail(&x))
        };
        for _ in 0..samples {
            let (t1, w1) = draw(&mut rng);
            let (t2, w2) = draw(&mut rng);
            let (p1, p2, pm) = match (
                self.psi(t1, &w1),
                self.psi(t2, &w2),
                self.psi(0.5 * (t1 + t2), &(&w1 + &w2).scale(0.5)),
            ) {
                (Ok(a), Ok(b), Ok(c)) => (a, b, c),
                _ => {
                    failures += 1;
                    continue;
                }
            };
            let r2 = t1 * t1 + norm(&w1).powi(2);
            if r2 > 0.0 {
                worst_remainder =
                    worst_remainder.max((p1 - self.psi_quadratic(t1, &w1)).abs() / r2);
            }
            worst_convexity = worst_convexity.min(0.5 * (p1 + p2) - pm);
        }
        rep.push(Entry::check(
            "psi_solve_failures",
            failures as f64,
            -(failures as f64),
            0.0,
        ));
        rep.push(Entry::info("psi_remainder_ratio", worst_remainder));
        // midpoint convexity up to the cubic remainder at this radius
        let slack = 1e-9 + worst_remainder * radius * radius;
        rep.push(Entry::check(
            "psi_midpoint_convexity",
            worst_convexity,
            worst_convexity + slack,
            0.0,
        ));
        rep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis, unitarity_defect};
    use crate::sampling::gaussian_vector;

    #[test]
    fn rotation_sends_normal_to_minus_e1() {
        let s = Streams::new(3);
        let mut rng = s.stream(0);
        for _ in 0..20 {
            let v = gaussian_vector(4, &mut rng);
            let nu = v.unscale(norm(&v));
            let r = rotation_to_inner_normal(&nu);
            assert!(unitarity_defect(&r) < 1e-13);
            assert!(norm(&(&r * &nu + basis(4, 0))) < 1e-13);
        }
        let r = rotation_to_inner_normal(&-basis(3, 0));
        assert!((r - COperator::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn siegel_at_origin_is_already_normal() {
        let sg = DomainSpec::siegel(3);
        let nd = normalize_at(&sg, &CVector::zeros(3)).unwrap();
        assert_eq!(nd.kappa, 0.0);
        let s = Streams::new(7);
        let mut rng = s.stream(0);
        for _ in 0..50 {
            let z = uniform_ball(3, 1.0, &mut rng);
            assert!(norm(&(nd.g.eval(&z).unwrap() - &z)) < 1e-12);
            let t = z[0].re;
            let tail = crate::linalg::tail(&z);
            let psi = nd.psi(t, &tail).unwrap();
            assert!((psi - norm(&tail).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_normal_form() {
        let ball = DomainSpec::unit_ball(3);
        let e1 = basis(3, 0);
        let nd = normalize_at(&ball, &e1).unwrap();
        let s = Streams::new(8);
        let mut rng = s.stream(0);
        // G(z) = (1 − z_1, z'/√2)
        for _ in 0..20 {
            let z = uniform_ball(3, 1.0, &mut rng);
            let w = nd.g.eval(&z).unwrap();
            assert!((w[0] - (ONE - z[0])).norm() < 1e-12);
            assert!((w[1] - z[1] / 2f64.sqrt()).norm() < 1e-12);
        }
        // tangential ψ-Hessian equals the Levi form in tangent coordinates
        let dg = nd.g.jacobian(&e1).unwrap();
        for _ in 0..20 {
            let mut u = gaussian_vector(3, &mut rng);
            u[0] = Complex64::new(0.0, 0.0);
            let x = &dg * &u;
            let via_model = nd.psi_quadratic(x[0].im, &crate::linalg::tail(&x));
            let levi = super::super::levi_form(&ball, &e1, &u).unwrap() / nd.scale;
            assert!((via_model - levi).abs() < 1e-6 * levi.max(1.0));
        }
        let rep = nd.verify(0.1, 200, &s);
        assert!(rep.pass(), "{}", rep.to_json());
    }

    #[test]
    fn catalog_domains_normalize_at_sampled_points() {
        let s = Streams::new(9);
        let mut rng = s.stream(0);
        let domains = [
            DomainSpec::unit_ball(3),
            DomainSpec::ellipsoid(&[1.0, 4.0, 2.0]),
            DomainSpec::perturbed_ball(3, 0.2),
            DomainSpec::siegel(3),
        ];
        for d in &domains {
            for _ in 0..3 {
                let mut dir = gaussian_vector(3, &mut rng);
                if d.tag() == "siegel" {
                    dir = dir.scale(0.3);
                    dir[0] = Complex64::new(-1.0, 0.0);
                }
                let start = if d.tag() == "siegel" {
                    let mut q = basis(3, 0);
                    q[1] = Complex64::new(0.2, 0.1);
                    q
                } else {
                    d.basepoint().clone()
                };
                let hit = super::super::boundary_along(d, &start, &dir).unwrap();
                let nd = normalize_at(d, &hit.point).unwrap();
                let rep = nd.verify(0.1, 60, &s);
                assert!(rep.pass(), "{}: {}", d.tag(), rep.to_json());
            }
        }
    }

    #[test]
    fn normalization_is_idempotent_on_siegel() {
        let sg = DomainSpec::siegel(3);
        let nd = normalize_at(&sg, &CVector::zeros(3)).unwrap();
        let again = normalize_at(&nd.as_domain(), &CVector::zeros(3)).unwrap();
        let s = Streams::new(10);
        let mut rng = s.stream(0);
        for _ in 0..50 {
            let x = uniform_ball(3, 0.5, &mut rng);
            let tail = crate::linalg::tail(&x);
            let a = nd.psi(x[0].re, &tail).unwrap();
            let b = again.psi(x[0].re, &tail).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn non_pseudoconvex_point_is_rejected() {
        let q = DomainSpec::quadric(
            &[0.0, 1.0, -2.0],
            CVector::zeros(3),
            1.0,
            0.0,
            basis(3, 0).scale(-1.0),
        );
        assert!(matches!(
            normalize_at(&q, &CVector::zeros(3)),
            Err(Error::NotStronglyPseudoconvex(_))
        ));
    }
}
