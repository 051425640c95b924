//! Automorphisms of the model domains: Möbius involutions of the unit ball,
//! the Cayley transform onto the Siegel domain `{Re w_1 > ‖w'‖²}`, Siegel
//! dilations and Heisenberg translations, and orbit schedules accumulating
//! at a boundary point.

use num_complex::Complex64;
use rand::Rng;

use crate::domains::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::holomap::{HoloMap, Holomorphic, MapTag};
use crate::kobayashi::sample_kobayashi_ball;
use crate::linalg::{inner, norm, norm_sqr, tail_norm_sqr, COperator, CVector, ONE};
use crate::sampling::Streams;

const POLE_TOL: f64 = 1e-14;

/// Involutive automorphism `φ_a` of the unit ball: `φ_a(a) = 0`, `φ_a(0) = a`,
/// `φ_a ∘ φ_a = id`. With `P_a` the projection onto `C a`,
/// `φ_a(z) = (a − P_a z − s_a (z − P_a z)) / (1 − ⟨z, a⟩)`, `s_a = √(1 − ‖a‖²)`.
#[derive(Debug, Clone)]
pub struct Mobius {
    a: CVector,
    a_sq: f64,
    s: f64,
}

impl Mobius {
    pub fn new(a: CVector) -> Result<Self> {
        let defect = 1.0 - norm_sqr(&a);
        Self::with_defect(a, defect)
    }

    /// Same map, given `1 − ‖a‖²` to full relative precision; near the
    /// sphere this avoids the cancellation in `s_a`.
    pub fn with_defect(a: CVector, defect: f64) -> Result<Self> {
        let a_sq = norm_sqr(&a);
        if !(a_sq < 1.0 && defect > 0.0) {
            return Err(Error::OutOfBall(a_sq.sqrt()));
        }
        Ok(Mobius {
            s: defect.sqrt(),
            a,
            a_sq,
        })
    }

    pub fn center(&self) -> &CVector {
        &self.a
    }

    fn project(&self, z: &CVector) -> CVector {
        if self.a_sq == 0.0 {
            return CVector::zeros(z.len());
        }
        &self.a * (inner(z, &self.a) / self.a_sq)
    }

    /// `P_a`, the orthogonal projection onto `C a`.
    fn projector(&self) -> COperator {
        let n = self.a.len();
        if self.a_sq > 0.0 {
            (&self.a * self.a.adjoint()).unscale(self.a_sq)
        } else {
            COperator::zeros(n, n)
        }
    }
}

impl Holomorphic for Mobius {
    fn eval(&self, z: &CVector) -> Result<CVector> {
        let den = ONE - inner(z, &self.a);
        if den.norm() < POLE_TOL {
            return Err(Error::PoleHit);
        }
        let pz = self.project(z);
        let qz = z - &pz;
        let num = &self.a - pz - qz.scale(self.s);
        Ok(num / den)
    }

    fn jacobian(&self, z: &CVector) -> Result<COperator> {
        let den = ONE - inner(z, &self.a);
        if den.norm() < POLE_TOL {
            return Err(Error::PoleHit);
        }
        // (−A·den + (a − Az) a^H) / den², with the P-block collapsed to
        // −(1 − ‖a‖²) P so that no cancellation occurs near the sphere
        let n = z.len();
        let p = self.projector();
        let q = COperator::identity(n, n) - &p;
        let qz = &q * z;
        let num =
            p.scale(-self.s * self.s) - q * (den * self.s) - (qz * self.a.adjoint()).scale(self.s);
        Ok(num / (den * den))
    }

    fn inverse(&self) -> Option<HoloMap> {
        let dim = self.a.len();
        Some(HoloMap::from_leaf(self.clone(), MapTag::Mobius, dim))
    }
}

/// `φ_a` as a [`HoloMap`]. Fails with [`Error::OutOfBall`] when `‖a‖ ≥ 1`.
pub fn ball_mobius(a: &CVector) -> Result<HoloMap> {
    let dim = a.len();
    Ok(HoloMap::from_leaf(
        Mobius::new(a.clone())?,
        MapTag::Mobius,
        dim,
    ))
}

/// Automorphism `−φ_c`, which sends `c` to `0` and is the identity when `c = 0`.
pub fn ball_recentering(c: &CVector) -> Result<HoloMap> {
    let n = c.len();
    let neg = HoloMap::linear(-COperator::identity(n, n), MapTag::Affine);
    Ok(neg.after(&ball_mobius(c)?))
}

/// Cayley transform `Ψ(w) = ((1 − w_1)/(1 + w_1), 2w'/(1 + w_1))`, Siegel → ball.
#[derive(Debug, Clone, Copy)]
pub struct Cayley {
    dim: usize,
}

/// `Ψ^{-1}(z) = ((1 − z_1)/(1 + z_1), z'/(1 + z_1))`, ball → Siegel.
#[derive(Debug, Clone, Copy)]
pub struct CayleyInverse {
    dim: usize,
}

fn pole_guard(d: Complex64) -> Result<Complex64> {
    if d.norm() < POLE_TOL {
        Err(Error::PoleHit)
    } else {
        Ok(d)
    }
}

impl Holomorphic for Cayley {
    fn eval(&self, w: &CVector) -> Result<CVector> {
        let d = pole_guard(ONE + w[0])?;
        let mut z = w * (Complex64::new(2.0, 0.0) / d);
        z[0] = (ONE - w[0]) / d;
        Ok(z)
    }

    fn jacobian(&self, w: &CVector) -> Result<COperator> {
        let d = pole_guard(ONE + w[0])?;
        let n = self.dim;
        let mut j = COperator::zeros(n, n);
        j[(0, 0)] = Complex64::new(-2.0, 0.0) / (d * d);
        for k in 1..n {
            j[(k, 0)] = Complex64::new(-2.0, 0.0) * w[k] / (d * d);
            j[(k, k)] = Complex64::new(2.0, 0.0) / d;
        }
        Ok(j)
    }

    fn inverse(&self) -> Option<HoloMap> {
        Some(HoloMap::from_leaf(
            CayleyInverse { dim: self.dim },
            MapTag::Cayley,
            self.dim,
        ))
    }
}

impl Holomorphic for CayleyInverse {
    fn eval(&self, z: &CVector) -> Result<CVector> {
        let d = pole_guard(ONE + z[0])?;
        let mut w = z / d;
        w[0] = (ONE - z[0]) / d;
        Ok(w)
    }

    fn jacobian(&self, z: &CVector) -> Result<COperator> {
        let d = pole_guard(ONE + z[0])?;
        let n = self.dim;
        let mut j = COperator::zeros(n, n);
        j[(0, 0)] = Complex64::new(-2.0, 0.0) / (d * d);
        for k in 1..n {
            j[(k, 0)] = -z[k] / (d * d);
            j[(k, k)] = ONE / d;
        }
        Ok(j)
    }

    fn inverse(&self) -> Option<HoloMap> {
        Some(HoloMap::from_leaf(
            Cayley { dim: self.dim },
            MapTag::Cayley,
            self.dim,
        ))
    }
}

/// `(Ψ, Ψ^{-1})` in `C^n`.
pub fn cayley(n: usize) -> Result<(HoloMap, HoloMap)> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    Ok((
        HoloMap::from_leaf(Cayley { dim: n }, MapTag::Cayley, n),
        HoloMap::from_leaf(CayleyInverse { dim: n }, MapTag::Cayley, n),
    ))
}

/// Siegel dilation `w ↦ (λ² w_1, λ w')`.
pub fn siegel_dilation(n: usize, lambda: f64) -> HoloMap {
    let mut d = COperator::identity(n, n).scale(lambda);
    d[(0, 0)] = Complex64::new(lambda * lambda, 0.0);
    HoloMap::linear(d, MapTag::Dilation)
}

/// Heisenberg translation of the Siegel domain sending `0` to the boundary
/// point `p` (`Re p_1 = ‖p'‖²`): `w ↦ (w_1 + p_1 + 2⟨w', p'⟩, w' + p')`.
pub fn heisenberg_translation(p: &CVector) -> HoloMap {
    let n = p.len();
    let mut a = COperator::identity(n, n);
    for k in 1..n {
        a[(0, k)] = p[k].conj() * 2.0;
    }
    HoloMap::affine(a, p.clone(), MapTag::Affine)
}

/// Automorphisms `φ_j` with `φ_j(q) → p`.
#[derive(Debug, Clone)]
pub struct OrbitSchedule {
    pub maps: Vec<HoloMap>,
    pub base: CVector,
    pub target: CVector,
}

impl OrbitSchedule {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// `φ_j(q)` for `j = 1..=count`.
    pub fn orbit_points(&self) -> Result<Vec<CVector>> {
        self.maps.iter().map(|m| m.eval(&self.base)).collect()
    }

    /// `‖φ_j(q) − p‖`.
    pub fn gaps(&self) -> Result<Vec<f64>> {
        Ok(self
            .orbit_points()?
            .iter()
            .map(|x| norm(&(x - &self.target)))
            .collect())
    }
}

/// Orbit schedule on the ball or the Siegel domain, `j = 1..=count`.
///
/// Ball: `φ_j = φ_{a_j} ∘ φ_q` with `a_j = (1 − rate^j) p` (the pre-composition
/// is skipped for `q = 0`), so `‖φ_j(q) − p‖ = rate^j`.
/// Siegel: `φ_j = h_p ∘ δ_{λ_j} ∘ h_p^{-1}` with `λ_j = rate^{j/2}`.
pub fn orbit_to_boundary(
    domain: &DomainSpec,
    q: &CVector,
    p: &CVector,
    rate: f64,
    count: usize,
) -> Result<OrbitSchedule> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidArgument(format!("rate {rate} outside (0,1)")));
    }
    if domain.rho(q) >= 0.0 {
        return Err(Error::PreconditionViolated(
            "orbit base point is not interior".into(),
        ));
    }
    if domain.rho(p).abs() > 1e-9 {
        return Err(Error::NotBoundaryPoint(domain.rho(p)));
    }
    let n = domain.dim();
    let mut maps = Vec::with_capacity(count);
    match domain.kind() {
        DomainKind::Ball { center, radius } if norm(center) == 0.0 && *radius == 1.0 => {
            let pre = if norm(q) == 0.0 {
                None
            } else {
                Some(ball_mobius(q)?)
            };
            for j in 1..=count {
                let t = rate.powi(j as i32);
                let a = p.scale(1.0 - t);
                // ‖p‖ = 1, so 1 − ‖a‖² = t(2 − t) exactly
                let phi =
                    HoloMap::from_leaf(Mobius::with_defect(a, t * (2.0 - t))?, MapTag::Mobius, n);
                maps.push(match &pre {
                    Some(m) => phi.after(m),
                    None => phi,
                });
            }
        }
        DomainKind::Siegel => {
            let h = heisenberg_translation(p);
            let h_inv = h
                .closed_inverse()
                .expect("affine map with unit determinant");
            for j in 1..=count {
                let lambda = rate.powf(j as f64 / 2.0);
                maps.push(HoloMap::compose_all(&[
                    h_inv.clone(),
                    siegel_dilation(n, lambda),
                    h.clone(),
                ]));
            }
        }
        other => return Err(Error::UnsupportedDomain(format!("{other:?}"))),
    }
    Ok(OrbitSchedule {
        maps,
        base: q.clone(),
        target: p.clone(),
    })
}

/// Largest sampled `‖φ_j(y) − p‖` over `y ∈ B^K(q, radius)`, per stage.
pub fn orbit_spread(
    domain: &DomainSpec,
    schedule: &OrbitSchedule,
    radius: f64,
    samples: usize,
    streams: &Streams,
) -> Result<Vec<f64>> {
    let mut rng = streams.stream(0x0b17);
    let pts = sample_kobayashi_ball(domain, &schedule.base, radius, samples, &mut rng)?;
    schedule
        .maps
        .iter()
        .map(|m| {
            let mut worst: f64 = 0.0;
            for y in &pts {
                worst = worst.max(norm(&(m.eval(y)? - &schedule.target)));
            }
            Ok(worst)
        })
        .collect()
}

/// First index `J` (1-based) from which every sampled image of the Kobayashi
/// ball `B^K(q, radius)` lies within `eps` of `p`.
pub fn localization_index(spread: &[f64], eps: f64) -> Option<usize> {
    let mut j0 = None;
    for (i, &s) in spread.iter().enumerate().rev() {
        if s < eps {
            j0 = Some(i + 1);
        } else {
            break;
        }
    }
    j0
}

/// Random interior point of the Siegel domain.
pub fn siegel_interior<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let mut w = crate::sampling::gaussian_vector(n, rng);
    let excess: f64 = rng.random::<f64>() * 2.0 + 1e-3;
    w[0] = Complex64::new(tail_norm_sqr(&w) + excess, w[0].im);
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holomap::cauchy_jacobian;
    use crate::kobayashi::exact::ball_distance;
    use crate::linalg::{basis, max_abs_entry};
    use crate::sampling::uniform_ball;

    #[test]
    fn mobius_at_origin_is_negation() {
        let m = ball_mobius(&CVector::zeros(3)).unwrap();
        let z = uniform_ball(3, 0.9, &mut Streams::new(1).stream(0));
        assert!(norm(&(m.eval(&z).unwrap() + &z)) < 1e-15);
        let r = ball_recentering(&CVector::zeros(3)).unwrap();
        assert!(norm(&(r.eval(&z).unwrap() - &z)) < 1e-15);
    }

    #[test]
    fn mobius_swaps_center_and_origin() {
        let a = basis(3, 0).scale(0.7);
        let m = ball_mobius(&a).unwrap();
        assert!(norm(&m.eval(&a).unwrap()) < 1e-15);
        assert!(norm(&(m.eval(&CVector::zeros(3)).unwrap() - &a)) < 1e-15);
    }

    #[test]
    fn mobius_is_involution_and_ball_preserving() {
        let s = Streams::new(21);
        let mut rng = s.stream(0);
        let a = uniform_ball(4, 0.95, &mut rng);
        let m = ball_mobius(&a).unwrap();
        for _ in 0..1000 {
            let z = uniform_ball(4, 1.0, &mut rng);
            let w = m.eval(&z).unwrap();
            assert!(norm(&w) < 1.0);
            assert!(norm(&(m.eval(&w).unwrap() - &z)) < 1e-10);
        }
    }

    #[test]
    fn mobius_rejects_boundary_center() {
        assert!(matches!(
            ball_mobius(&basis(2, 0)),
            Err(Error::OutOfBall(_))
        ));
    }

    #[test]
    fn mobius_preserves_ball_distance() {
        let s = Streams::new(8);
        let mut rng = s.stream(0);
        let m = ball_mobius(&uniform_ball(3, 0.8, &mut rng)).unwrap();
        for _ in 0..200 {
            let x = uniform_ball(3, 0.95, &mut rng);
            let y = uniform_ball(3, 0.95, &mut rng);
            let d0 = ball_distance(&x, &y).unwrap();
            let d1 = ball_distance(&m.eval(&x).unwrap(), &m.eval(&y).unwrap()).unwrap();
            assert!((d0 - d1).abs() < 1e-9 * d0.max(1.0));
        }
    }

    #[test]
    fn analytic_jacobians_match_cauchy() {
        let s = Streams::new(2);
        let mut rng = s.stream(0);
        let m = ball_mobius(&uniform_ball(3, 0.6, &mut rng)).unwrap();
        let (psi, psi_inv) = cayley(3).unwrap();
        for _ in 0..50 {
            let z = uniform_ball(3, 0.9, &mut rng);
            for map in [&m, &psi_inv] {
                let a = map.jacobian(&z).unwrap();
                let b = cauchy_jacobian(|w| map.eval(w), &z).unwrap();
                assert!(max_abs_entry(&(&a - &b)) <= 1e-6 * max_abs_entry(&a).max(1.0));
            }
            let w = siegel_interior(3, &mut rng);
            let a = psi.jacobian(&w).unwrap();
            let b = cauchy_jacobian(|v| psi.eval(v), &w).unwrap();
            assert!(max_abs_entry(&(&a - &b)) <= 1e-6 * max_abs_entry(&a).max(1.0));
        }
    }

    #[test]
    fn cayley_fixed_points_and_pole() {
        let (psi, psi_inv) = cayley(3).unwrap();
        let one = basis(3, 0);
        assert!(norm(&psi.eval(&one).unwrap()) < 1e-15);
        assert!(norm(&(psi.eval(&CVector::zeros(3)).unwrap() - &one)) < 1e-15);
        assert!(matches!(psi.eval(&(-one.clone())), Err(Error::PoleHit)));
        assert!(matches!(psi_inv.eval(&(-one)), Err(Error::PoleHit)));
    }

    #[test]
    fn cayley_defect_identity_and_inverse() {
        let s = Streams::new(3);
        let mut rng = s.stream(0);
        let (psi, psi_inv) = cayley(4).unwrap();
        for _ in 0..1000 {
            let w = siegel_interior(4, &mut rng);
            let z = psi.eval(&w).unwrap();
            let lhs = 1.0 - norm_sqr(&z);
            let rhs = 4.0 * (w[0].re - tail_norm_sqr(&w)) / (ONE + w[0]).norm_sqr();
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
            assert!(lhs > 0.0);
            let back = psi_inv.eval(&z).unwrap();
            assert!(norm(&(back - &w)) < 1e-12 * norm(&w).max(1.0) * 10.0);
        }
        // boundary to boundary
        for _ in 0..100 {
            let mut w = siegel_interior(4, &mut rng);
            w[0] = Complex64::new(tail_norm_sqr(&w), w[0].im);
            assert!((norm(&psi.eval(&w).unwrap()) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dilation_conjugates_to_ball_automorphism() {
        let (psi, psi_inv) = cayley(3).unwrap();
        let d = siegel_dilation(3, 0.6);
        let conj = HoloMap::compose_all(&[psi_inv.clone(), d, psi.clone()]);
        let e1 = basis(3, 0);
        assert!(norm(&(conj.eval(&e1).unwrap() - &e1)) < 1e-12);
        let s = Streams::new(9);
        let mut rng = s.stream(0);
        for _ in 0..200 {
            let z = uniform_ball(3, 0.99, &mut rng);
            assert!(norm(&conj.eval(&z).unwrap()) < 1.0);
        }
    }

    #[test]
    fn ball_orbit_gaps_are_geometric() {
        let ball = DomainSpec::unit_ball(3);
        let e1 = basis(3, 0);
        let sch = orbit_to_boundary(&ball, &CVector::zeros(3), &e1, 0.5, 8).unwrap();
        for (j, g) in sch.gaps().unwrap().iter().enumerate() {
            assert!((g - 0.5f64.powi(j as i32 + 1)).abs() < 1e-15);
        }
    }

    #[test]
    fn siegel_orbit_moves_toward_origin() {
        let sg = DomainSpec::siegel(3);
        let q = basis(3, 0);
        let sch = orbit_to_boundary(&sg, &q, &CVector::zeros(3), 0.5, 6).unwrap();
        let pts = sch.orbit_points().unwrap();
        for (j, x) in pts.iter().enumerate() {
            assert!((x[0].re - 0.5f64.powi(j as i32 + 1)).abs() < 1e-15);
            assert!(sg.rho(x) < 0.0);
        }
    }

    #[test]
    fn siegel_orbit_to_general_boundary_point() {
        let sg = DomainSpec::siegel(2);
        let p = CVector::from_vec(vec![Complex64::new(0.25, 0.3), Complex64::new(0.5, 0.0)]);
        let q = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.2)]);
        let sch = orbit_to_boundary(&sg, &q, &p, 0.5, 10).unwrap();
        let gaps = sch.gaps().unwrap();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        let s = Streams::new(4);
        let mut rng = s.stream(0);
        for m in &sch.maps {
            for _ in 0..50 {
                let w = siegel_interior(2, &mut rng);
                assert!(sg.rho(&m.eval(&w).unwrap()) < 0.0);
            }
        }
    }

    #[test]
    fn unsupported_domain_rejected() {
        let e = DomainSpec::ellipsoid(&[1.0, 4.0]);
        let err = orbit_to_boundary(&e, &CVector::zeros(2), &basis(2, 0), 0.5, 3).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDomain(_)));
    }

    #[test]
    fn orbit_localizes_kobayashi_balls() {
        let ball = DomainSpec::unit_ball(3);
        let e1 = basis(3, 0);
        let sch = orbit_to_boundary(&ball, &CVector::zeros(3), &e1, 0.5, 16).unwrap();
        let spread = orbit_spread(&ball, &sch, 1.0, 500, &Streams::new(5)).unwrap();
        let j = localization_index(&spread, 0.1).expect("images shrink");
        assert!(j <= 16);
        assert!(spread[15] < spread[0]);
    }
}
