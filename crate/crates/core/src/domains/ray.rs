use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DomainSpec;
use crate::error::{Error, Result};
use crate::linalg::{norm, CVector};

/// Sign of the `e_1` ray used to reach the distinguished boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    PlusE1,
    MinusE1,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::PlusE1 => 1.0,
            Orientation::MinusE1 => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::PlusE1 => Orientation::MinusE1,
            Orientation::MinusE1 => Orientation::PlusE1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryHit {
    pub point: CVector,
    /// `‖point − q‖ > 0`.
    pub distance: f64,
    /// `ρ(point)`.
    pub residual: f64,
}

const MAX_REACH: f64 = 1e6;

/// First crossing of `∂Ω` along `t ↦ q + t·dir`, `t > 0`, by bracketing and
/// bisection until the bracket is exhausted in double precision. Only the coordinates where `dir` is nonzero move.
pub fn boundary_along(domain: &DomainSpec, q: &CVector, dir: &CVector) -> Result<BoundaryHit> {
    if q.len() != domain.dim() || dir.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            found: q.len().min(dir.len()),
        });
    }
    let u = domain.neighborhood();
    if !u.contains(q) {
        return Err(Error::OutsideNeighborhood);
    }
    let r0 = domain.rho(q);
    if r0 >= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "ray origin not interior: rho = {r0:.3e}"
        )));
    }
    let dn = norm(dir);
    if dn == 0.0 {
        return Err(Error::InvalidArgument("zero ray direction".into()));
    }
    let point_at = |t: f64| -> CVector {
        let mut p = q.clone();
        for k in 0..p.len() {
            if dir[k] != Complex64::new(0.0, 0.0) {
                p[k] = q[k] + dir[k] * (t / dn);
            }
        }
        p
    };
    let scale = if u.radius.is_finite() { u.radius } else { 1.0 };

    // march outward with geometric growth until ρ changes sign
    let mut lo = 0.0;
    let mut step = 1e-3 * scale;
    let hi = loop {
        let t = lo + step;
        if t > MAX_REACH * scale {
            return Err(Error::NoBoundaryHit);
        }
        let p = point_at(t);
        if !u.contains(&p) {
            // refine the approach to the edge of U before giving up
            if step < 1e-9 * scale {
                return Err(Error::NoBoundaryHit);
            }
            step *= 0.25;
            continue;
        }
        if domain.rho(&p) >= 0.0 {
            break t;
        }
        lo = t;
        step *= 1.6;
    };

    let (mut lo, mut hi) = (lo, hi);
    let mut best = (hi, domain.rho(&point_at(hi)));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = domain.rho(&point_at(mid));
        if r.abs() < best.1.abs() {
            best = (mid, r);
        }
        // bisect to full precision in t: deep scaling stages need the
        // distance itself to high relative accuracy, not just a small ρ
        if r == 0.0 {
            best = (mid, r);
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let point = point_at(best.0);
    Ok(BoundaryHit {
        distance: norm(&(&point - q)),
        point,
        residual: best.1,
    })
}

/// Boundary point on the `e_1`-line through `q` in the given orientation.
pub fn ray_boundary_point_oriented(
    domain: &DomainSpec,
    q: &CVector,
    orientation: Orientation,
) -> Result<BoundaryHit> {
    let mut dir = CVector::zeros(domain.dim());
    dir[0] = Complex64::new(orientation.sign(), 0.0);
    boundary_along(domain, q, &dir)
}

/// Boundary point on the `e_1`-line through `q` in the domain's outward
/// orientation; `p_b' = q'` exactly.
pub fn ray_boundary_point(domain: &DomainSpec, q: &CVector) -> Result<BoundaryHit> {
    ray_boundary_point_oriented(domain, q, domain.outward())
}

/// Both orientations, for reporting.
pub fn ray_both_orientations(
    domain: &DomainSpec,
    q: &CVector,
) -> [(Orientation, Result<BoundaryHit>); 2] {
    [Orientation::PlusE1, Orientation::MinusE1]
        .map(|o| (o, ray_boundary_point_oriented(domain, q, o)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::basis;

    #[test]
    fn ball_from_origin() {
        let hit = ray_boundary_point(&DomainSpec::unit_ball(3), &CVector::zeros(3)).unwrap();
        assert!(norm(&(&hit.point - basis(3, 0))) < 1e-12);
        assert!((hit.distance - 1.0).abs() < 1e-12);
        assert!(hit.residual.abs() < 1e-12);
    }

    #[test]
    fn siegel_toward_decreasing_real_part() {
        let sg = DomainSpec::siegel(2);
        let hit = ray_boundary_point(&sg, &basis(2, 0)).unwrap();
        assert!(norm(&hit.point) < 1e-12);
        assert!((hit.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_matches_quadratic_root() {
        let e = DomainSpec::ellipsoid(&[1.0, 4.0]);
        let q = CVector::from_vec(vec![Complex64::new(0.5, 0.0), Complex64::new(0.1, 0.0)]);
        let hit = ray_boundary_point(&e, &q).unwrap();
        let exact = (1.0f64 - 4.0 * 0.01).sqrt() - 0.5;
        assert!((hit.distance - exact).abs() < 1e-10);
        assert_eq!(hit.point[1], q[1]);
        assert!(hit.residual.abs() < 1e-12);
    }

    #[test]
    fn tail_coordinates_are_untouched() {
        let e = DomainSpec::ellipsoid(&[1.0, 4.0, 2.0]);
        let q = CVector::from_vec(vec![
            Complex64::new(0.1, 0.2),
            Complex64::new(0.1 / 3.0, -0.07),
            Complex64::new(0.3, 0.11),
        ]);
        for (_, hit) in ray_both_orientations(&e, &q) {
            let hit = hit.unwrap();
            assert_eq!(hit.point[1], q[1]);
            assert_eq!(hit.point[2], q[2]);
            assert_eq!(hit.point[0].im, q[0].im);
        }
    }

    #[test]
    fn unbounded_direction_has_no_hit() {
        let sg = DomainSpec::siegel(2);
        let r = ray_boundary_point_oriented(&sg, &basis(2, 0), Orientation::PlusE1);
        assert!(matches!(r, Err(Error::NoBoundaryHit)));
    }

    #[test]
    fn exit_through_neighborhood_has_no_hit() {
        // the perturbed ball's U is ‖z‖ < 1.5; with a large negative β the
        // zero set along e2 lies past the edge of U
        let d = DomainSpec::perturbed_ball(2, -0.1);
        let mut dir = CVector::zeros(2);
        dir[1] = Complex64::new(1.0, 0.0);
        let hit = boundary_along(&d, &CVector::zeros(2), &dir).unwrap();
        assert!(hit.residual.abs() < 1e-12);
        let d = DomainSpec::perturbed_ball(2, -0.5);
        assert!(matches!(
            boundary_along(&d, &CVector::zeros(2), &dir),
            Err(Error::NoBoundaryHit)
        ));
    }
}
