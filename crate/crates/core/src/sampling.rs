//! Seeded random streams and samplers.
//!
//! Every sampling loop draws from `Streams::stream(task)`, a ChaCha stream
//! keyed by the root seed and the task index, so results do not depend on
//! how tasks are scheduled across worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{inner, norm, COperator, CVector};

#[derive(Debug, Clone, Copy)]
pub struct Streams {
    root: u64,
}

impl Streams {
    pub fn new(root: u64) -> Self {
        Streams { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn stream(&self, task: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(task);
        rng
    }

    /// Child family for a sub-experiment, e.g. one per dimension.
    pub fn child(&self, tag: u64) -> Streams {
        let mut rng = self.stream(tag ^ 0x9e37_79b9_7f4a_7c15);
        Streams { root: rng.random() }
    }
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_iterator(n, (0..n).map(|_| complex_normal(rng)))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> COperator {
    COperator::from_iterator(n, n, (0..n * n).map(|_| complex_normal(rng)))
}

pub fn unit_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    loop {
        let v = gaussian_vector(n, rng);
        let nv = norm(&v);
        if nv > 1e-12 {
            return v.unscale(nv);
        }
    }
}

/// Uniform point of the Euclidean ball of radius `radius` in `C^n = R^{2n}`.
pub fn uniform_ball<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> CVector {
    let dir = unit_sphere(n, rng);
    let u: f64 = rng.random();
    dir.scale(radius * u.powf(1.0 / (2 * n) as f64))
}

/// Random unit vector orthogonal to the unit vector `axis`.
pub fn orthogonal_unit<R: Rng + ?Sized>(axis: &CVector, rng: &mut R) -> Option<CVector> {
    if axis.len() < 2 {
        return None;
    }
    for _ in 0..16 {
        let mut w = gaussian_vector(axis.len(), rng);
        let c = inner(&w, axis);
        w.axpy(-c, axis, crate::linalg::ONE);
        let nw = norm(&w);
        if nw > 1e-8 {
            return Some(w.unscale(nw));
        }
    }
    None
}

/// Point `radius·(cos α·e^{iγ}·axis + sin α·w)` with `w ⟂ axis`.
///
/// The scalars `(α, γ)` come from `scalars` and the orthogonal direction from
/// `frame`; the overlap with `axis` then has a distribution that does not
/// depend on the ambient dimension.
pub fn axis_mixed<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    axis: &CVector,
    radius: f64,
    scalars: &mut R1,
    frame: &mut R2,
) -> CVector {
    let alpha = scalars.random::<f64>() * std::f64::consts::FRAC_PI_2;
    let gamma = scalars.random::<f64>() * std::f64::consts::TAU;
    let mut x = axis * Complex64::from_polar(alpha.cos(), gamma);
    if let Some(w) = orthogonal_unit(axis, frame) {
        x.axpy(Complex64::new(alpha.sin(), 0.0), &w, crate::linalg::ONE);
    } else {
        x = axis * Complex64::from_polar(1.0, gamma);
    }
    x.scale(radius)
}
