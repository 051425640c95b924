//! Composable holomorphic maps `C^N → C^N` with evaluation, Jacobian and
//! (numerical or closed-form) inversion.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{norm, COperator, CVector, ONE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapTag {
    Mobius,
    Cayley,
    Affine,
    Dilation,
    Composition,
    Calibration,
    Normalization,
    Custom,
}

/// A single holomorphic map.
pub trait Holomorphic: Send + Sync + fmt::Debug {
    fn eval(&self, z: &CVector) -> Result<CVector>;

    fn jacobian(&self, z: &CVector) -> Result<COperator> {
        cauchy_jacobian(|w| self.eval(w), z)
    }

    /// Closed-form inverse, when one is available.
    fn inverse(&self) -> Option<HoloMap> {
        None
    }
}

const CAUCHY_POINTS: usize = 8;
const CAUCHY_RADIUS: f64 = 1e-4;

/// Complex Jacobian from the trapezoidal Cauchy integral on small circles
/// `z + h e^{iθ} e_k`; exact up to `O(h^8)` for holomorphic maps.
pub fn cauchy_jacobian<F>(f: F, z: &CVector) -> Result<COperator>
where
    F: Fn(&CVector) -> Result<CVector>,
{
    let n = z.len();
    let h = CAUCHY_RADIUS * norm(z).max(1.0);
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc: Option<CVector> = None;
        for j in 0..CAUCHY_POINTS {
            let w =
                Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / CAUCHY_POINTS as f64);
            let mut zz = z.clone();
            zz[k] += w * h;
            let fz = f(&zz)? * w.conj();
            acc = Some(match acc {
                None => fz,
                Some(a) => a + fz,
            });
        }
        let col = acc.expect("at least one node") / Complex64::new(h * CAUCHY_POINTS as f64, 0.0);
        cols.push(col);
    }
    Ok(COperator::from_columns(&cols))
}

#[derive(Clone)]
enum Node {
    Leaf(Arc<dyn Holomorphic>),
    /// Applied first to last.
    Chain(Vec<HoloMap>),
}

#[derive(Clone)]
pub struct HoloMap {
    node: Node,
    tag: MapTag,
    dim: usize,
}

impl fmt::Debug for HoloMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Leaf(l) => write!(f, "{:?}({:?})", self.tag, l),
            Node::Chain(c) => f.debug_list().entries(c.iter()).finish(),
        }
    }
}

impl HoloMap {
    pub fn from_leaf<H: Holomorphic + 'static>(leaf: H, tag: MapTag, dim: usize) -> Self {
        HoloMap {
            node: Node::Leaf(Arc::new(leaf)),
            tag,
            dim,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::linear(COperator::identity(dim, dim), MapTag::Affine)
    }

    pub fn linear(a: COperator, tag: MapTag) -> Self {
        let dim = a.nrows();
        Self::from_leaf(
            Affine {
                linear: a,
                shift: CVector::zeros(dim),
            },
            tag,
            dim,
        )
    }

    /// `z ↦ A z + b`.
    pub fn affine(a: COperator, b: CVector, tag: MapTag) -> Self {
        let dim = a.nrows();
        Self::from_leaf(
            Affine {
                linear: a,
                shift: b,
            },
            tag,
            dim,
        )
    }

    /// Map given by a closure; the Jacobian falls back to the Cauchy formula.
    pub fn custom<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&CVector) -> Result<CVector> + Send + Sync + 'static,
    {
        Self::from_leaf(FnMap(Arc::new(f)), MapTag::Custom, dim)
    }

    pub fn tag(&self) -> MapTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Constituent maps in application order (a leaf is its own chain).
    pub fn chain(&self) -> Vec<HoloMap> {
        match &self.node {
            Node::Leaf(_) => vec![self.clone()],
            Node::Chain(c) => c.clone(),
        }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &HoloMap) -> HoloMap {
        let mut parts = first.chain();
        parts.extend(self.chain());
        HoloMap {
            node: Node::Chain(parts),
            tag: MapTag::Composition,
            dim: self.dim,
        }
    }

    /// `maps[0]` applied first.
    pub fn compose_all(maps: &[HoloMap]) -> HoloMap {
        let dim = maps.first().map(|m| m.dim).unwrap_or(0);
        let mut parts = Vec::new();
        for m in maps {
            parts.extend(m.chain());
        }
        HoloMap {
            node: Node::Chain(parts),
            tag: MapTag::Composition,
            dim,
        }
    }

    pub fn eval(&self, z: &CVector) -> Result<CVector> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: z.len(),
            });
        }
        match &self.node {
            Node::Leaf(l) => l.eval(z),
            Node::Chain(c) => {
                let mut w = z.clone();
                for m in c {
                    w = m.eval(&w)?;
                }
                Ok(w)
            }
        }
    }

    pub fn jacobian(&self, z: &CVector) -> Result<COperator> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: z.len(),
            });
        }
        match &self.node {
            Node::Leaf(l) => l.jacobian(z),
            Node::Chain(c) => {
                let mut w = z.clone();
                let mut jac = COperator::identity(self.dim, self.dim);
                for m in c {
                    jac = m.jacobian(&w)? * jac;
                    w = m.eval(&w)?;
                }
                Ok(jac)
            }
        }
    }

    /// Closed-form inverse if every constituent has one.
    pub fn closed_inverse(&self) -> Option<HoloMap> {
        match &self.node {
            Node::Leaf(l) => l.inverse(),
            Node::Chain(c) => {
                let mut inv = Vec::with_capacity(c.len());
                for m in c.iter().rev() {
                    inv.push(m.closed_inverse()?);
                }
                Some(HoloMap {
                    node: Node::Chain(inv),
                    tag: MapTag::Composition,
                    dim: self.dim,
                })
            }
        }
    }

    /// Solve `self(z) = y`, through the closed-form inverse when available and
    /// otherwise by damped Newton iteration started at `guess`.
    pub fn solve(&self, y: &CVector, guess: &CVector) -> Result<CVector> {
        if let Some(inv) = self.closed_inverse() {
            return inv.eval(y);
        }
        newton_solve(self, y, guess, 1e-13, 100)
    }
}

/// Damped Newton iteration for `f(z) = y`.
pub fn newton_solve(
    f: &HoloMap,
    y: &CVector,
    guess: &CVector,
    tol: f64,
    max_iter: usize,
) -> Result<CVector> {
    let scale = norm(y).max(1.0);
    let mut z = guess.clone();
    let mut r = f.eval(&z)? - y;
    let mut rn = norm(&r);
    for _ in 0..max_iter {
        if rn <= tol * scale {
            return Ok(z);
        }
        let jac = f.jacobian(&z)?;
        let step = jac
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::SingularDifferential("Newton step".into()))?;
        let mut t = 1.0;
        loop {
            let cand = &z - step.scale(t);
            match f.eval(&cand) {
                Ok(fc) => {
                    let rc = fc - y;
                    let rcn = norm(&rc);
                    if rcn < rn || t < 1e-6 {
                        z = cand;
                        r = rc;
                        rn = rcn;
                        break;
                    }
                }
                Err(_) if t >= 1e-6 => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
        }
    }
    if rn <= 1e-10 * scale {
        Ok(z)
    } else {
        Err(Error::InverseFailed(rn))
    }
}

#[derive(Debug, Clone)]
pub struct Affine {
    pub linear: COperator,
    pub shift: CVector,
}

impl Holomorphic for Affine {
    fn eval(&self, z: &CVector) -> Result<CVector> {
        Ok(&self.linear * z + &self.shift)
    }

    fn jacobian(&self, _z: &CVector) -> Result<COperator> {
        Ok(self.linear.clone())
    }

    fn inverse(&self) -> Option<HoloMap> {
        let inv = self.linear.clone().try_inverse()?;
        let shift = -(&inv * &self.shift);
        let dim = inv.nrows();
        Some(HoloMap::from_leaf(
            Affine { linear: inv, shift },
            MapTag::Affine,
            dim,
        ))
    }
}

type BoxedFn = Arc<dyn Fn(&CVector) -> Result<CVector> + Send + Sync>;

struct FnMap(BoxedFn);

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("closure")
    }
}

impl Holomorphic for FnMap {
    fn eval(&self, z: &CVector) -> Result<CVector> {
        (self.0)(z)
    }
}

/// `w_1 = z_1 + zᵀ B z`, `w' = z'` with `B` complex symmetric.
#[derive(Debug, Clone)]
pub struct QuadraticShear {
    pub coeffs: COperator,
}

impl Holomorphic for QuadraticShear {
    fn eval(&self, z: &CVector) -> Result<CVector> {
        let bz = &self.coeffs * z;
        let q: Complex64 = z.iter().zip(bz.iter()).map(|(a, b)| a * b).sum();
        let mut w = z.clone();
        w[0] += q;
        Ok(w)
    }

    fn jacobian(&self, z: &CVector) -> Result<COperator> {
        let n = z.len();
        let mut j = COperator::identity(n, n);
        let row = (&self.coeffs + self.coeffs.transpose()) * z;
        for k in 0..n {
            j[(0, k)] += row[k];
        }
        Ok(j)
    }

    fn inverse(&self) -> Option<HoloMap> {
        let n = self.coeffs.nrows();
        Some(HoloMap::from_leaf(
            QuadraticShearInverse {
                forward: self.clone(),
            },
            MapTag::Normalization,
            n,
        ))
    }
}

/// Inverse of [`QuadraticShear`] near the origin: `z' = w'` and `z_1` is the
/// root of `B_11 z_1² + β z_1 + (z'ᵀ B' z' − w_1) = 0` continuing `z_1 = w_1`.
#[derive(Debug, Clone)]
pub struct QuadraticShearInverse {
    forward: QuadraticShear,
}

impl Holomorphic for QuadraticShearInverse {
    fn eval(&self, w: &CVector) -> Result<CVector> {
        let b = &self.forward.coeffs;
        let n = w.len();
        let a = b[(0, 0)];
        let mut beta = ONE;
        let mut c = -w[0];
        for k in 1..n {
            beta += (b[(0, k)] + b[(k, 0)]) * w[k];
            for l in 1..n {
                c += w[k] * b[(k, l)] * w[l];
            }
        }
        let mut root = (beta * beta - a * c * 4.0).sqrt();
        if (root * beta.conj()).re < 0.0 {
            root = -root;
        }
        let den = beta + root;
        if den.norm() < 1e-14 {
            return Err(Error::PoleHit);
        }
        let mut z = w.clone();
        z[0] = -c * 2.0 / den;
        Ok(z)
    }

    fn jacobian(&self, w: &CVector) -> Result<COperator> {
        let z = self.eval(w)?;
        self.forward
            .jacobian(&z)?
            .try_inverse()
            .ok_or_else(|| Error::SingularDifferential("quadratic shear".into()))
    }

    fn inverse(&self) -> Option<HoloMap> {
        let n = self.forward.coeffs.nrows();
        Some(HoloMap::from_leaf(
            self.forward.clone(),
            MapTag::Normalization,
            n,
        ))
    }
}

pub fn identity_defect(map: &HoloMap, z: &CVector) -> Result<f64> {
    Ok(norm(&(map.eval(z)? - z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_entry;
    use crate::sampling::{gaussian_matrix, uniform_ball, Streams};

    fn quad_map() -> HoloMap {
        HoloMap::custom(3, |z: &CVector| {
            let mut w = z.clone();
            w[0] += z[1] * z[2] * Complex64::new(0.3, 0.1);
            w[2] += z[0] * z[0] * Complex64::new(-0.2, 0.0);
            Ok(w)
        })
    }

    #[test]
    fn cauchy_jacobian_matches_analytic() {
        let s = Streams::new(4);
        let mut rng = s.stream(0);
        let mut coeffs = gaussian_matrix(3, &mut rng);
        coeffs = (&coeffs + coeffs.transpose()).scale(0.5);
        let shear = HoloMap::from_leaf(QuadraticShear { coeffs }, MapTag::Normalization, 3);
        for _ in 0..20 {
            let z = uniform_ball(3, 0.9, &mut rng);
            let exact = shear.jacobian(&z).unwrap();
            let approx = cauchy_jacobian(|w| shear.eval(w), &z).unwrap();
            assert!(max_abs_entry(&(exact - approx)) < 1e-9);
        }
    }

    #[test]
    fn composition_is_nested_evaluation() {
        let s = Streams::new(9);
        let mut rng = s.stream(0);
        let a = HoloMap::affine(
            gaussian_matrix(3, &mut rng),
            uniform_ball(3, 1.0, &mut rng),
            MapTag::Affine,
        );
        let q = quad_map();
        let c = q.after(&a);
        assert_eq!(c.tag(), MapTag::Composition);
        assert_eq!(c.chain().len(), 2);
        for _ in 0..100 {
            let z = uniform_ball(3, 0.8, &mut rng);
            let nested = q.eval(&a.eval(&z).unwrap()).unwrap();
            assert!(norm(&(c.eval(&z).unwrap() - nested)) < 1e-12);
            let chain_rule = q.jacobian(&a.eval(&z).unwrap()).unwrap() * a.jacobian(&z).unwrap();
            assert!(max_abs_entry(&(c.jacobian(&z).unwrap() - chain_rule)) < 1e-12);
        }
    }

    #[test]
    fn newton_inverts_nonlinear_map() {
        let q = quad_map();
        let target = CVector::from_vec(vec![
            Complex64::new(0.2, 0.1),
            Complex64::new(-0.3, 0.0),
            Complex64::new(0.1, -0.2),
        ]);
        let z = q.solve(&target, &target).unwrap();
        assert!(norm(&(q.eval(&z).unwrap() - target)) < 1e-12);
    }

    #[test]
    fn affine_closed_inverse() {
        let s = Streams::new(1);
        let mut rng = s.stream(0);
        let a = HoloMap::affine(
            gaussian_matrix(4, &mut rng),
            uniform_ball(4, 1.0, &mut rng),
            MapTag::Affine,
        );
        let inv = a.closed_inverse().unwrap();
        let z = uniform_ball(4, 1.0, &mut rng);
        assert!(norm(&(inv.eval(&a.eval(&z).unwrap()).unwrap() - &z)) < 1e-12);
    }

    #[test]
    fn quadratic_shear_inverse_round_trips() {
        let s = Streams::new(12);
        let mut rng = s.stream(0);
        let mut coeffs = gaussian_matrix(3, &mut rng).scale(0.3);
        coeffs = (&coeffs + coeffs.transpose()).scale(0.5);
        let shear = HoloMap::from_leaf(QuadraticShear { coeffs }, MapTag::Normalization, 3);
        let inv = shear.closed_inverse().unwrap();
        for _ in 0..100 {
            let z = uniform_ball(3, 0.3, &mut rng);
            let back = inv.eval(&shear.eval(&z).unwrap()).unwrap();
            assert!(norm(&(back - &z)) < 1e-13);
            let jf = shear.jacobian(&z).unwrap();
            let ji = inv.jacobian(&shear.eval(&z).unwrap()).unwrap();
            assert!(max_abs_entry(&(ji * jf - COperator::identity(3, 3))) < 1e-12);
        }
    }

    #[test]
    fn dimension_is_checked() {
        let id = HoloMap::identity(3);
        assert!(matches!(
            id.eval(&CVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
