//! Complex vectors and operators on the truncated Hilbert space `C^N`.
//!
//! Everything here works in the fixed orthonormal basis `e_1, …, e_N`; a
//! vector splits as `z = z_1 e_1 + z'` with `z' ⟂ e_1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type COperator = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance used when deciding whether an operator is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// `⟨x, y⟩ = Σ x_k conj(y_k)`, linear in the first slot.
pub fn inner(x: &CVector, y: &CVector) -> Complex64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm(x: &CVector) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_sqr(x: &CVector) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum()
}

/// `e_k` (zero based) in `C^n`.
pub fn basis(n: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[k] = ONE;
    v
}

pub fn from_reals(re: &[f64]) -> CVector {
    CVector::from_iterator(re.len(), re.iter().map(|&x| Complex64::new(x, 0.0)))
}

/// Norm of the tail `z' = z - z_1 e_1`.
pub fn tail_norm_sqr(z: &CVector) -> f64 {
    z.iter().skip(1).map(|c| c.norm_sqr()).sum()
}

/// The tail `z'` as a vector of the same length with the first entry zeroed.
pub fn tail(z: &CVector) -> CVector {
    let mut t = z.clone();
    t[0] = ZERO;
    t
}

/// Largest singular value.
pub fn op_norm(a: &COperator) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let sv = a.clone().singular_values();
    sv.iter().cloned().fold(0.0, f64::max)
}

pub fn singular_range(a: &COperator) -> (f64, f64) {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, max)
}

pub fn condition_number(a: &COperator) -> f64 {
    let (min, max) = singular_range(a);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `max_k ‖U x_k - …‖` style check: largest entry of `U* U - I`.
pub fn unitarity_defect(u: &COperator) -> f64 {
    let n = u.ncols();
    let g = u.adjoint() * u - COperator::identity(n, n);
    g.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn max_abs_entry(a: &COperator) -> f64 {
    a.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Index `n` of the flag subspace `Σ_n = span(e_1, …, e_n)`, `1 ≤ n ≤ N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlagIndex(usize);

impl FlagIndex {
    pub fn new(n: usize, dim: usize) -> Result<Self> {
        if n == 0 || n > dim {
            return Err(Error::InvalidArgument(format!(
                "flag index {n} outside 1..={dim}"
            )));
        }
        Ok(FlagIndex(n))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Orthogonal projector onto `Σ_n` in `C^dim`.
    pub fn projector(self, dim: usize) -> COperator {
        COperator::from_fn(
            dim,
            dim,
            |i, j| if i == j && i < self.0 { ONE } else { ZERO },
        )
    }

    /// Leading `n × n` block of `a`, i.e. `a` restricted to `Σ_n` and
    /// compressed back onto it.
    pub fn block(self, a: &COperator) -> COperator {
        a.view((0, 0), (self.0, self.0)).into_owned()
    }

    pub fn all(dim: usize) -> impl Iterator<Item = FlagIndex> {
        (1..=dim).map(FlagIndex)
    }
}

/// Output of [`gram_schmidt`].
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    pub orthonormal: Vec<CVector>,
    /// `‖f_m‖` before normalization.
    pub norms: Vec<f64>,
}

/// Classical Gram–Schmidt with one re-orthogonalization pass.
///
/// Fails with [`Error::DegenerateInput`] when the smallest singular value of
/// the input family is at most `1e-10`.
pub fn gram_schmidt(vectors: &[CVector]) -> Result<GramSchmidt> {
    if vectors.is_empty() {
        return Ok(GramSchmidt {
            orthonormal: vec![],
            norms: vec![],
        });
    }
    let n = vectors[0].len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: 0,
        });
    }
    let m = COperator::from_columns(vectors);
    let (smin, _) = singular_range(&m);
    if vectors.len() > n || smin <= 1e-10 {
        return Err(Error::DegenerateInput(format!(
            "smallest singular value {smin:.3e} of {} vectors",
            vectors.len()
        )));
    }

    let mut out: Vec<CVector> = Vec::with_capacity(vectors.len());
    let mut norms = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut f = v.clone();
        for _pass in 0..2 {
            for q in &out {
                let c = inner(&f, q);
                f.axpy(-c, q, ONE);
            }
        }
        let nf = norm(&f);
        norms.push(nf);
        out.push(f.unscale(nf));
    }
    Ok(GramSchmidt {
        orthonormal: out,
        norms,
    })
}

/// `A = P·U` with `P` positive definite and `U` unitary.
#[derive(Debug, Clone)]
pub struct Polar {
    pub positive: COperator,
    pub unitary: COperator,
}

/// Polar decomposition through the SVD `A = W Σ V*`: `P = W Σ W*`, `U = W V*`.
pub fn polar_decompose(a: &COperator) -> Result<Polar> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let n = a.nrows();
    let svd = SVD::new(a.clone(), true, true);
    let (w, vt) = match (svd.u, svd.v_t) {
        (Some(w), Some(vt)) => (w, vt),
        _ => return Err(Error::SingularOperator("SVD did not converge".into())),
    };
    let s = svd.singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smin > 0.0) || smax / smin >= 1e8 {
        return Err(Error::SingularOperator(format!(
            "condition number {:.3e}",
            smax / smin
        )));
    }
    let sigma = COperator::from_diagonal(&CVector::from_iterator(
        n,
        s.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    let positive = &w * sigma * w.adjoint();
    let positive = (&positive + positive.adjoint()).scale(0.5);
    let unitary = &w * vt;
    Ok(Polar { positive, unitary })
}

/// Hermitian part `(A + A*)/2`, rejecting operators that are not Hermitian
/// to within [`HERMITIAN_TOL`] (relative to the entry scale).
pub fn hermitian_part(a: &COperator) -> Result<COperator> {
    let skew = max_abs_entry(&(a - a.adjoint()));
    let scale = max_abs_entry(a).max(1.0);
    if skew > HERMITIAN_TOL * scale {
        return Err(Error::NotComparable(format!(
            "anti-Hermitian part {skew:.3e}"
        )));
    }
    Ok((a + a.adjoint()).scale(0.5))
}

pub fn min_eigenvalue_hermitian(h: &COperator) -> f64 {
    if h.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(h.clone());
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Order relation `T ≥ S`, i.e. `⟨(T − S)x, x⟩ ≥ 0` for every `x`.
pub fn operator_geq(t: &COperator, s: &COperator) -> Result<bool> {
    if t.shape() != s.shape() {
        return Err(Error::DimensionMismatch {
            expected: t.nrows(),
            found: s.nrows(),
        });
    }
    let h = hermitian_part(&(t - s))?;
    Ok(min_eigenvalue_hermitian(&h) >= -HERMITIAN_TOL)
}

/// Upper triangular to within `tol`, equivalently `A(Σ_n) ⊂ Σ_n` for all `n`.
pub fn flag_preserving(a: &COperator, tol: f64) -> bool {
    lower_defect(a) <= tol
}

/// Largest modulus among strictly-lower entries.
pub fn lower_defect(a: &COperator) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in (j + 1)..a.nrows() {
            worst = worst.max(a[(i, j)].norm());
        }
    }
    worst
}

/// Principal square root of a positive semidefinite Hermitian operator.
pub fn hermitian_sqrt(h: &COperator) -> COperator {
    let eig = SymmetricEigen::new(h.clone());
    let d = CVector::from_iterator(
        h.nrows(),
        eig.eigenvalues
            .iter()
            .map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    );
    let q = &eig.eigenvectors;
    q * COperator::from_diagonal(&d) * q.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gaussian_matrix, gaussian_vector, Streams};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn split_norm_identity() {
        let z = CVector::from_vec(vec![c(0.3, -0.1), c(1.0, 2.0), c(-0.5, 0.0)]);
        let lhs = norm_sqr(&z);
        let rhs = z[0].norm_sqr() + norm_sqr(&tail(&z));
        assert_eq!(lhs, rhs);
        assert!((tail_norm_sqr(&z) - norm_sqr(&tail(&z))).abs() == 0.0);
    }

    #[test]
    fn gram_schmidt_standard_basis_is_fixed() {
        let vs: Vec<_> = (0..3).map(|k| basis(3, k)).collect();
        let gs = gram_schmidt(&vs).unwrap();
        for (k, v) in gs.orthonormal.iter().enumerate() {
            assert_eq!(v, &basis(3, k));
        }
        assert_eq!(gs.norms, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn gram_schmidt_single_projection() {
        let e1 = basis(2, 0);
        let e2 = basis(2, 1);
        let gs = gram_schmidt(&[e1.clone(), &e1 + &e2]).unwrap();
        assert!((&gs.orthonormal[0] - &e1).norm() < 1e-15);
        assert!((&gs.orthonormal[1] - &e2).norm() < 1e-15);
        assert!((gs.norms[0] - 1.0).abs() < 1e-15 && (gs.norms[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gram_schmidt_rejects_dependent() {
        let e1 = basis(3, 0);
        let err = gram_schmidt(&[e1.clone(), e1.scale(2.0)]).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn gram_schmidt_random_double_pass() {
        let streams = Streams::new(11);
        let mut rng = streams.stream(0);
        let vs: Vec<_> = (0..5).map(|_| gaussian_vector(5, &mut rng)).collect();
        let gs = gram_schmidt(&vs).unwrap();
        let q = COperator::from_columns(&gs.orthonormal);
        let gram = q.adjoint() * &q;
        assert!(max_abs_entry(&(gram - COperator::identity(5, 5))) < 1e-10);
        // second application must reproduce its input
        let again = gram_schmidt(&gs.orthonormal).unwrap();
        for (a, b) in again.orthonormal.iter().zip(&gs.orthonormal) {
            assert!((a - b).norm() < 1e-10);
        }
        for n in &again.norms {
            assert!((n - 1.0).abs() < 1e-10);
        }
        // prefix spans: input m = Σ_k ⟨v_m, q_k⟩ q_k over k ≤ m
        for (m, v) in vs.iter().enumerate() {
            let mut rec = CVector::zeros(5);
            for qk in gs.orthonormal.iter().take(m + 1) {
                rec.axpy(inner(v, qk), qk, ONE);
            }
            assert!((rec - v).norm() < 1e-10);
        }
    }

    #[test]
    fn polar_of_identity_and_scalar() {
        let id = COperator::identity(3, 3);
        let p = polar_decompose(&id).unwrap();
        assert!(max_abs_entry(&(&p.positive - &id)) < 1e-14);
        assert!(max_abs_entry(&(&p.unitary - &id)) < 1e-14);
        let two = id.scale(2.0);
        let p = polar_decompose(&two).unwrap();
        assert!(max_abs_entry(&(&p.positive - &two)) < 1e-14);
        assert!(max_abs_entry(&(&p.unitary - &id)) < 1e-14);
    }

    #[test]
    fn polar_random_reconstructs() {
        let streams = Streams::new(3);
        let mut rng = streams.stream(1);
        let a = gaussian_matrix(4, &mut rng);
        let p = polar_decompose(&a).unwrap();
        assert!(max_abs_entry(&(&p.positive * &p.unitary - &a)) < 1e-10);
        assert!(unitarity_defect(&p.unitary) < 1e-10);
        assert!(min_eigenvalue_hermitian(&p.positive) > 0.0);
        // uniqueness: P is the positive root of A A*
        let root = hermitian_sqrt(&(&a * a.adjoint()));
        assert!(max_abs_entry(&(root - &p.positive)) < 1e-8);
    }

    #[test]
    fn polar_rejects_singular() {
        let mut a = COperator::identity(3, 3);
        a[(2, 2)] = ZERO;
        assert!(matches!(
            polar_decompose(&a),
            Err(Error::SingularOperator(_))
        ));
    }

    #[test]
    fn operator_order_examples() {
        let id = COperator::identity(3, 3);
        assert!(operator_geq(&id, &id.scale(0.7)).unwrap());
        let t = COperator::from_diagonal(&from_reals(&[1.0, 1.0]));
        let s = COperator::from_diagonal(&from_reals(&[1.0, 2.0]));
        assert!(!operator_geq(&t, &s).unwrap());
        let mut skew = COperator::zeros(2, 2);
        skew[(0, 1)] = ONE;
        assert!(matches!(
            operator_geq(&skew, &COperator::zeros(2, 2)),
            Err(Error::NotComparable(_))
        ));
    }

    #[test]
    fn operator_order_matches_sampling() {
        let streams = Streams::new(5);
        let mut rng = streams.stream(2);
        for trial in 0..20 {
            let n = 3;
            let a = gaussian_matrix(n, &mut rng);
            let b = gaussian_matrix(n, &mut rng);
            let shift = if trial % 2 == 0 { 4.0 } else { 0.0 };
            let t = (&a + a.adjoint()).scale(0.5) + COperator::identity(n, n).scale(shift);
            let s = (&b + b.adjoint()).scale(0.5);
            let decided = operator_geq(&t, &s).unwrap();
            let d = &t - &s;
            let mut sampled_min = f64::INFINITY;
            for _ in 0..10_000 {
                let mut x = gaussian_vector(n, &mut rng);
                let nx = norm(&x);
                x.unscale_mut(nx);
                sampled_min = sampled_min.min(inner(&(&d * &x), &x).re);
            }
            if decided {
                assert!(sampled_min >= -1e-10);
            } else {
                // the sampled minimum may miss a thin negative cone; the exact
                // eigenvalue must then be negative
                let h = (&d + d.adjoint()).scale(0.5);
                assert!(min_eigenvalue_hermitian(&h) < 0.0);
                if sampled_min < -1e-6 {
                    assert!(!decided);
                }
            }
        }
    }

    #[test]
    fn flag_preservation_examples() {
        let mut a = COperator::from_fn(
            3,
            3,
            |i, j| if i <= j { c(1.0 + j as f64, 0.5) } else { ZERO },
        );
        assert!(flag_preserving(&a, 1e-8));
        a[(2, 1)] = c(0.1, 0.0);
        assert!(!flag_preserving(&a, 1e-8));
    }

    #[test]
    fn flag_index_bounds() {
        assert!(FlagIndex::new(0, 3).is_err());
        assert!(FlagIndex::new(4, 3).is_err());
        let f = FlagIndex::new(2, 3).unwrap();
        let p = f.projector(3);
        assert_eq!(p[(1, 1)], ONE);
        assert_eq!(p[(2, 2)], ZERO);
        let dims: Vec<_> = FlagIndex::all(4).map(|f| f.get()).collect();
        assert_eq!(dims, vec![1, 2, 3, 4]);
    }
}
