//! Local defining functions, Levi forms, strong pseudoconvexity, boundary
//! ray shooting, the normalization map `G`, and peak-function checks.
//!
//! A domain is `Ω ∩ U = {z ∈ U : ρ(z) < 0}` for a real `C²` function `ρ` on
//! a ball `U`. Derivatives are expressed through the complex gradient
//! `a_k = ∂ρ/∂z_k`, so that `dρ(z; v) = 2 Re Σ a_k v_k` and
//! `∂ρ(z; v) = Σ a_k v_k`, and the real second differential
//! `d²ρ(z; v, w)`.

mod catalog;
mod levi;
mod normalize;
mod peak;
mod ray;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::linalg::{CVector, ONE};

pub use catalog::{DomainKind, DomainSpec};
pub use levi::{
    is_strongly_pseudoconvex, levi_form, levi_matrix, PseudoconvexityCheck, TANGENT_SAMPLES,
};
pub use normalize::{normalize_at, NormalizedDomain, NormalizedRho};
pub use peak::{peak_verify, PeakFunction};
pub use ray::{
    boundary_along, ray_both_orientations, ray_boundary_point, BoundaryHit, Orientation,
};

/// Validity region `U` of a local defining function.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub center: CVector,
    /// `f64::INFINITY` for globally defined functions.
    pub radius: f64,
}

impl Neighborhood {
    pub fn global(dim: usize) -> Self {
        Neighborhood {
            center: CVector::zeros(dim),
            radius: f64::INFINITY,
        }
    }

    pub fn contains(&self, z: &CVector) -> bool {
        self.radius.is_infinite() || crate::linalg::norm(&(z - &self.center)) < self.radius
    }
}

/// Gradient step for the finite-difference fallback.
pub const FD_GRADIENT_STEP: f64 = 1e-5;
/// Base step of the Richardson-extrapolated second differential.
pub const FD_HESSIAN_STEP: f64 = 1e-3;

/// Real-valued local defining function with derivative oracles.
///
/// `complex_gradient` and `second_differential` default to central finite
/// differences; catalog domains override both analytically.
pub trait DefiningFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, z: &CVector) -> f64;

    fn neighborhood(&self) -> Neighborhood;

    /// `a_k = ∂ρ/∂z_k = ½(∂ρ/∂x_k − i ∂ρ/∂y_k)`.
    fn complex_gradient(&self, z: &CVector) -> CVector {
        fd_complex_gradient(self, z)
    }

    /// Real symmetric bilinear `d²ρ(z; v, w)`.
    fn second_differential(&self, z: &CVector, v: &CVector, w: &CVector) -> f64 {
        fd_second_differential(self, z, v, w)
    }
}

pub fn fd_complex_gradient<D: DefiningFunction + ?Sized>(rho: &D, z: &CVector) -> CVector {
    let h = FD_GRADIENT_STEP;
    let n = z.len();
    let mut a = CVector::zeros(n);
    for k in 0..n {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[k] += Complex64::new(h, 0.0);
        zm[k] -= Complex64::new(h, 0.0);
        let dx = (rho.value(&zp) - rho.value(&zm)) / (2.0 * h);
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[k] += Complex64::new(0.0, h);
        zm[k] -= Complex64::new(0.0, h);
        let dy = (rho.value(&zp) - rho.value(&zm)) / (2.0 * h);
        a[k] = Complex64::new(0.5 * dx, -0.5 * dy);
    }
    a
}

fn fd_mixed<D: DefiningFunction + ?Sized>(
    rho: &D,
    z: &CVector,
    v: &CVector,
    w: &CVector,
    h: f64,
) -> f64 {
    let hc = Complex64::new(h, 0.0);
    let f = |s: f64, t: f64| {
        let mut p = z.clone();
        p.axpy(hc * s, v, ONE);
        p.axpy(hc * t, w, ONE);
        rho.value(&p)
    };
    (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * h * h)
}

/// Central second difference with one Richardson step (`O(h⁴)`).
pub fn fd_second_differential<D: DefiningFunction + ?Sized>(
    rho: &D,
    z: &CVector,
    v: &CVector,
    w: &CVector,
) -> f64 {
    let h = FD_HESSIAN_STEP;
    let coarse = fd_mixed(rho, z, v, w, h);
    let fine = fd_mixed(rho, z, v, w, h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// Defining function given by a closure; derivatives by finite differences.
#[derive(Clone)]
pub struct ClosureRho {
    dim: usize,
    f: Arc<dyn Fn(&CVector) -> f64 + Send + Sync>,
    nbhd: Neighborhood,
}

impl ClosureRho {
    pub fn new<F>(dim: usize, nbhd: Neighborhood, f: F) -> Self
    where
        F: Fn(&CVector) -> f64 + Send + Sync + 'static,
    {
        ClosureRho {
            dim,
            f: Arc::new(f),
            nbhd,
        }
    }
}

impl fmt::Debug for ClosureRho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClosureRho(dim={})", self.dim)
    }
}

impl DefiningFunction for ClosureRho {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, z: &CVector) -> f64 {
        (self.f)(z)
    }

    fn neighborhood(&self) -> Neighborhood {
        self.nbhd.clone()
    }
}

/// Real differential `dρ(z; v) = 2 Re Σ a_k v_k`.
pub fn real_differential(a: &CVector, v: &CVector) -> f64 {
    2.0 * a
        .iter()
        .zip(v.iter())
        .map(|(x, y)| x * y)
        .sum::<Complex64>()
        .re
}

/// Complex differential `∂ρ(z; v) = Σ a_k v_k`.
pub fn holomorphic_differential(a: &CVector, v: &CVector) -> Complex64 {
    a.iter().zip(v.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::basis;
    use crate::sampling::{gaussian_vector, uniform_ball, Streams};

    #[test]
    fn finite_differences_match_analytic_oracles() {
        let s = Streams::new(17);
        let mut rng = s.stream(0);
        let domains = [
            DomainSpec::unit_ball(3),
            DomainSpec::ellipsoid(&[1.0, 4.0, 2.0]),
            DomainSpec::siegel(3),
            DomainSpec::perturbed_ball(3, 0.2),
        ];
        for d in &domains {
            let rho = d.defining();
            for _ in 0..20 {
                let z = uniform_ball(3, 0.8, &mut rng);
                let a = rho.complex_gradient(&z);
                let a_fd = fd_complex_gradient(rho, &z);
                assert!((&a - &a_fd).norm() < 1e-8, "{d:?}");
                let v = gaussian_vector(3, &mut rng);
                let w = gaussian_vector(3, &mut rng);
                let h = rho.second_differential(&z, &v, &w);
                let h_fd = fd_second_differential(rho, &z, &v, &w);
                assert!(
                    (h - h_fd).abs() < 1e-6 * h.abs().max(1.0),
                    "{d:?}: {h} vs {h_fd}"
                );
            }
        }
    }

    #[test]
    fn closure_domain_uses_fallbacks() {
        let rho = ClosureRho::new(2, Neighborhood::global(2), |z: &CVector| {
            crate::linalg::norm_sqr(z) - 1.0
        });
        let e1 = basis(2, 0);
        let a = rho.complex_gradient(&e1);
        assert!((a[0] - ONE).norm() < 1e-9);
        let e2 = basis(2, 1);
        assert!((rho.second_differential(&e1, &e2, &e2) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn neighborhood_membership() {
        let u = Neighborhood {
            center: CVector::zeros(2),
            radius: 1.0,
        };
        assert!(u.contains(&basis(2, 0).scale(0.5)));
        assert!(!u.contains(&basis(2, 0).scale(1.5)));
        assert!(Neighborhood::global(2).contains(&basis(2, 0).scale(1e9)));
    }
}
