use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::{DefiningFunction, DomainSpec};
use crate::error::{Error, Result};
use crate::linalg::{inner, min_eigenvalue_hermitian, norm, COperator, CVector, I};
use crate::sampling::{gaussian_vector, Streams};

/// Default number of random complex-tangent directions.
pub const TANGENT_SAMPLES: usize = 512;

/// Boundary tolerance on `|ρ(p)|`.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Smallest admissible `‖dρ(p)‖` at a boundary point.
pub const GRADIENT_FLOOR: f64 = 1e-6;

const LEVI_SEED: u64 = 0x1e71;
const STRICT_FLOOR: f64 = 1e-6;

fn levi_raw(rho: &dyn DefiningFunction, p: &CVector, v: &CVector) -> f64 {
    let iv = v * I;
    0.25 * (rho.second_differential(p, v, v) + rho.second_differential(p, &iv, &iv))
}

/// `∂∂̄ρ(p; v, v) = ¼(d²ρ(p; v, v) + d²ρ(p; iv, iv))`.
pub fn levi_form(domain: &DomainSpec, p: &CVector, v: &CVector) -> Result<f64> {
    check_dims(domain.dim(), p)?;
    check_dims(domain.dim(), v)?;
    if !domain.neighborhood().contains(p) {
        return Err(Error::OutsideNeighborhood);
    }
    Ok(levi_raw(domain.defining(), p, v))
}

/// Hermitian matrix `M` with `∂∂̄ρ(p; v, v) = v^H M v`, by polarization.
pub fn levi_matrix(rho: &dyn DefiningFunction, p: &CVector) -> COperator {
    let n = rho.dim();
    let mut m = COperator::zeros(n, n);
    let e = |k: usize| crate::linalg::basis(n, k);
    for k in 0..n {
        let ek = e(k);
        m[(k, k)] = Complex64::new(levi_raw(rho, p, &ek), 0.0);
        for l in (k + 1)..n {
            let el = e(l);
            // S(v, w) = w^H M v = ¼ Σ_m i^m L(v + i^m w)
            let mut s = Complex64::new(0.0, 0.0);
            let mut phase = Complex64::new(1.0, 0.0);
            for _ in 0..4 {
                s += phase * levi_raw(rho, p, &(&ek + &el * phase));
                phase *= I;
            }
            s *= 0.25;
            m[(l, k)] = s;
            m[(k, l)] = s.conj();
        }
    }
    m
}

/// Complex symmetric `B` with `Re(vᵀ B v) = ¼(d²ρ(p; v, v) − d²ρ(p; iv, iv))`,
/// the pluriharmonic part of the second-order Taylor term.
pub fn holomorphic_hessian(rho: &dyn DefiningFunction, p: &CVector) -> COperator {
    let n = rho.dim();
    let quad = |v: &CVector| -> Complex64 {
        let re = |u: &CVector| {
            let iu = u * I;
            0.25 * (rho.second_differential(p, u, u) - rho.second_differential(p, &iu, &iu))
        };
        let rot = v * Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        Complex64::new(re(v), -re(&rot))
    };
    let mut b = COperator::zeros(n, n);
    for k in 0..n {
        let ek = crate::linalg::basis(n, k);
        b[(k, k)] = quad(&ek);
        for l in (k + 1)..n {
            let el = crate::linalg::basis(n, l);
            let v = (quad(&(&ek + &el)) - quad(&(&ek - &el))) * 0.25;
            b[(k, l)] = v;
            b[(l, k)] = v;
        }
    }
    b
}

/// Outcome of a strong-pseudoconvexity test at a boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoconvexityCheck {
    /// `min > 1e-6` for the sampled minimum.
    pub strongly: bool,
    /// Minimum of the Levi form over sampled unit complex-tangent vectors.
    pub c_estimate: f64,
    /// Smallest eigenvalue of the Levi form restricted to the complex tangent space.
    pub exact_min: f64,
    /// `‖dρ(p)‖`.
    pub gradient_norm: f64,
}

/// Orthonormal basis (as columns) of `{v : ∂ρ(p; v) = 0} = (conj a)^⊥`.
pub fn complex_tangent_basis(a: &CVector) -> Result<COperator> {
    let n = a.len();
    let na = norm(a);
    if na == 0.0 {
        return Err(Error::DegenerateInput("vanishing gradient".into()));
    }
    let nu = a.map(|c| c.conj()).unscale(na);
    let proj = COperator::identity(n, n) - &nu * nu.adjoint();
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<CVector> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > 0.5)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    Ok(COperator::from_columns(&cols))
}

fn check_dims(expected: usize, v: &CVector) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// Minimizes the Levi form over `samples` random unit vectors of the complex
/// tangent space at the boundary point `p`; `strongly` is `min > 1e-6`.
pub fn is_strongly_pseudoconvex(
    domain: &DomainSpec,
    p: &CVector,
    samples: usize,
) -> Result<PseudoconvexityCheck> {
    check_dims(domain.dim(), p)?;
    if !domain.neighborhood().contains(p) {
        return Err(Error::OutsideNeighborhood);
    }
    let r = domain.rho(p);
    if r.abs() >= BOUNDARY_TOL {
        return Err(Error::NotBoundaryPoint(r));
    }
    let rho = domain.defining();
    let a = rho.complex_gradient(p);
    let gradient_norm = 2.0 * norm(&a);
    if gradient_norm <= GRADIENT_FLOOR {
        return Err(Error::DegenerateInput(format!(
            "|dρ(p)| = {gradient_norm:.3e}"
        )));
    }
    let n = domain.dim();
    let m = levi_matrix(rho, p);
    if n == 1 {
        // the complex tangent space is trivial; the condition holds vacuously
        return Ok(PseudoconvexityCheck {
            strongly: true,
            c_estimate: f64::INFINITY,
            exact_min: f64::INFINITY,
            gradient_norm,
        });
    }
    let t = complex_tangent_basis(&a)?;
    let restricted = t.adjoint() * &m * &t;
    let exact_min = min_eigenvalue_hermitian(&restricted);

    let nu = a.map(|c| c.conj()).unscale(norm(&a));
    let mut rng = Streams::new(LEVI_SEED).stream(n as u64);
    let mut c_estimate = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let g = gaussian_vector(n, &mut rng);
        let v = &g - &nu * inner(&g, &nu);
        let nv = norm(&v);
        if nv == 0.0 {
            continue;
        }
        let v = v.unscale(nv);
        c_estimate = c_estimate.min(inner(&(&m * &v), &v).re);
    }
    Ok(PseudoconvexityCheck {
        strongly: c_estimate > STRICT_FLOOR,
        c_estimate,
        exact_min,
        gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{ClosureRho, Neighborhood};
    use crate::linalg::{basis, max_abs_entry};
    use crate::sampling::{unit_sphere, Streams};
    use std::sync::Arc;

    #[test]
    fn ball_and_siegel_levi_forms() {
        let ball = DomainSpec::unit_ball(3);
        let l = levi_form(&ball, &basis(3, 0), &basis(3, 1)).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        let sg = DomainSpec::siegel(3);
        let l = levi_form(&sg, &CVector::zeros(3), &basis(3, 1)).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_levi_form_matches_finite_differences() {
        let e = DomainSpec::ellipsoid(&[1.0, 4.0]);
        let p = basis(2, 0);
        let v = basis(2, 1);
        let l = levi_form(&e, &p, &v).unwrap();
        for h in [1e-3, 1e-4] {
            let second = |dir: &CVector| {
                let f = |t: f64| e.rho(&(&p + dir.scale(t)));
                (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h)
            };
            let fd = 0.25 * (second(&v) + second(&(&v * I)));
            assert!((fd - l).abs() < 1e-4, "h={h}: {fd} vs {l}");
        }
        assert!((l - 4.0).abs() < 1e-12);
    }

    #[test]
    fn levi_form_is_quadratic_and_hermitian() {
        let d = DomainSpec::perturbed_ball(3, 0.3);
        let s = Streams::new(4);
        let mut rng = s.stream(0);
        let p = crate::sampling::uniform_ball(3, 0.5, &mut rng);
        for _ in 0..50 {
            let v = gaussian_vector(3, &mut rng);
            let w = gaussian_vector(3, &mut rng);
            let lv = levi_form(&d, &p, &v).unwrap();
            let lw = levi_form(&d, &p, &w).unwrap();
            let t = 2.7;
            assert!(
                (levi_form(&d, &p, &v.scale(t)).unwrap() - t * t * lv).abs()
                    <= 1e-9 * (t * t * lv).abs().max(1.0)
            );
            let lhs =
                levi_form(&d, &p, &(&v + &w)).unwrap() + levi_form(&d, &p, &(&v - &w)).unwrap();
            let rhs = 2.0 * lv + 2.0 * lw;
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn levi_matrix_represents_form() {
        let d = DomainSpec::perturbed_ball(3, 0.4);
        let s = Streams::new(5);
        let mut rng = s.stream(0);
        let p = crate::sampling::uniform_ball(3, 0.6, &mut rng);
        let m = levi_matrix(d.defining(), &p);
        assert!(max_abs_entry(&(&m - m.adjoint())) < 1e-12);
        for _ in 0..20 {
            let v = gaussian_vector(3, &mut rng);
            let direct = levi_form(&d, &p, &v).unwrap();
            let via = inner(&(&m * &v), &v).re;
            assert!((direct - via).abs() < 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn holomorphic_hessian_reproduces_second_order_term() {
        // ρ = Re(z1²) + 3 Re(z1 z2) + |z2|² − Re(i z2²)
        let rho = ClosureRho::new(2, Neighborhood::global(2), |z: &CVector| {
            (z[0] * z[0]).re + 3.0 * (z[0] * z[1]).re + z[1].norm_sqr() - (I * z[1] * z[1]).re
        });
        let b = holomorphic_hessian(&rho, &CVector::zeros(2));
        let expect = COperator::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(1.5, 0.0),
                Complex64::new(1.5, 0.0),
                Complex64::new(0.0, -1.0),
            ],
        );
        assert!(max_abs_entry(&(&b - &expect)) < 1e-6, "{b}");
    }

    #[test]
    fn ball_is_strongly_pseudoconvex() {
        let ball = DomainSpec::unit_ball(4);
        let c = is_strongly_pseudoconvex(&ball, &basis(4, 0), TANGENT_SAMPLES).unwrap();
        assert!(c.strongly);
        assert!((c.c_estimate - 1.0).abs() < 0.01);
        assert!((c.exact_min - 1.0).abs() < 1e-9);
    }

    #[test]
    fn indefinite_quadric_is_rejected() {
        let q = DomainSpec::quadric(
            &[0.0, 1.0, -2.0],
            CVector::zeros(3),
            1.0,
            0.0,
            basis(3, 0).scale(-1.0),
        );
        let c = is_strongly_pseudoconvex(&q, &CVector::zeros(3), TANGENT_SAMPLES).unwrap();
        assert!(!c.strongly);
        assert!((c.exact_min + 2.0).abs() < 1e-9);
        assert!((c.c_estimate + 2.0).abs() < 0.05, "{}", c.c_estimate);
    }

    #[test]
    fn ellipsoid_matches_closed_form_tangent_restriction() {
        // at e1 the complex tangent space is span{e2}, where the Levi form is 4
        let e = DomainSpec::ellipsoid(&[1.0, 4.0]);
        let c = is_strongly_pseudoconvex(&e, &basis(2, 0), TANGENT_SAMPLES).unwrap();
        assert!((c.exact_min - 4.0).abs() < 1e-9);
        assert!((c.c_estimate - 4.0).abs() < 1e-9);
        // at a generic boundary point: eigen-minimum bounds samples from below
        let s = Streams::new(6);
        let mut rng = s.stream(0);
        let e3 = DomainSpec::ellipsoid(&[1.0, 4.0, 2.0]);
        for _ in 0..10 {
            let u = unit_sphere(3, &mut rng);
            let scale: f64 = (0..3)
                .map(|k| [1.0, 4.0, 2.0][k] * u[k].norm_sqr())
                .sum::<f64>()
                .sqrt();
            let p = u.unscale(scale);
            let c = is_strongly_pseudoconvex(&e3, &p, TANGENT_SAMPLES).unwrap();
            assert!(c.strongly);
            assert!(c.c_estimate >= c.exact_min - 1e-12);
            assert!(c.exact_min >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn interior_point_is_not_boundary() {
        let ball = DomainSpec::unit_ball(2);
        let err = is_strongly_pseudoconvex(&ball, &CVector::zeros(2), 16).unwrap_err();
        assert!(matches!(err, Error::NotBoundaryPoint(_)));
    }

    #[test]
    fn outside_neighborhood_is_rejected() {
        let rho = ClosureRho::new(
            2,
            Neighborhood {
                center: CVector::zeros(2),
                radius: 1.0,
            },
            |z: &CVector| crate::linalg::norm_sqr(z) - 0.25,
        );
        let d = DomainSpec::custom(
            Arc::new(rho),
            CVector::zeros(2),
            crate::domains::Orientation::PlusE1,
        );
        assert!(matches!(
            levi_form(&d, &basis(2, 0).scale(2.0), &basis(2, 1)),
            Err(Error::OutsideNeighborhood)
        ));
    }

    #[test]
    fn c_estimate_is_stable_across_dimensions() {
        let mut reference = None;
        for n in [2, 4, 8, 16] {
            let ball = DomainSpec::ellipsoid_padded(n, &[1.0, 1.0]);
            let c = is_strongly_pseudoconvex(&ball, &basis(n, 0), TANGENT_SAMPLES)
                .unwrap()
                .c_estimate;
            let r = *reference.get_or_insert(c);
            assert!((c - r).abs() <= 0.1 * r, "N={n}: {c} vs {r}");
        }
    }
}
