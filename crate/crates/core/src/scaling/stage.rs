use num_complex::Complex64;
use serde::Serialize;

use crate::domains::{ray_boundary_point, DefiningFunction, NormalizedDomain};
use crate::error::{Error, Result};
use crate::holomap::{HoloMap, MapTag};
use crate::linalg::{norm, COperator, CVector, ONE};
use crate::report::{Entry, Report};
use crate::sampling::{uniform_ball, Streams};

use super::solve_real_shift;

/// `|∂ρ/∂z_1| / ‖∂ρ‖` below which the normal at `p_j` is treated as
/// orthogonal to `e_1`.
const TANGENT_FLOOR: f64 = 1e-8;
/// Lower tolerance on `Re w_1` over the closure in the supporting-hyperplane check.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Per-index data of the scaling sequence, in normalized coordinates.
#[derive(Debug, Clone)]
pub struct ScalingStage {
    pub j: usize,
    /// `q_j = G(φ_j(q))`.
    pub q_j: CVector,
    /// Boundary foot `p_j = q_j − r_j e_1`.
    pub p_j: CVector,
    pub r_j: f64,
    /// `H_j` multiplies `z_1 − p_{j1}` by `e^{iθ_j}`.
    pub theta_j: f64,
    /// `T_j(v') = Σ_{k≥2} t_k v_k`; entry 0 is zero.
    pub t_j: CVector,
    pub h: HoloMap,
    pub l: HoloMap,
}

/// Stage summary for JSON dumps.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub j: usize,
    pub r_j: f64,
    pub theta_j: f64,
    pub t_norm: f64,
}

impl ScalingStage {
    pub fn phase(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta_j)
    }

    /// Linear part of `H_j`.
    pub fn h_linear(&self) -> COperator {
        h_linear(self.phase(), &self.t_j)
    }

    /// `L_j ∘ H_j`.
    pub fn scaled(&self) -> HoloMap {
        self.l.after(&self.h)
    }

    pub fn record(&self) -> StageRecord {
        StageRecord {
            j: self.j,
            r_j: self.r_j,
            theta_j: self.theta_j,
            t_norm: norm(&self.t_j),
        }
    }

    /// Supporting-hyperplane, boundary and normalization checks for the stage:
    /// `Re H_j(z)_1 ≥ 0` on sampled boundary points within `radius` of `p_j`,
    /// `ρ_U(p_j) = 0`, `H_j(q_j) = e^{iθ_j} r_j e_1`, `p_j' = q_j'` and
    /// `‖p_j − q_j‖ = r_j`.
    pub fn verify(
        &self,
        normalized: &NormalizedDomain,
        radius: f64,
        samples: usize,
        streams: &Streams,
    ) -> Report {
        let mut rep = Report::new(format!("stage_{}", self.j));
        let rho = normalized.rho();
        let n = self.p_j.len();
        let mut rng = streams.stream(0x57a6 + self.j as u64);
        let mut worst = f64::INFINITY;
        let mut found = 0usize;
        for _ in 0..samples {
            let offset = uniform_ball(n, radius, &mut rng);
            let mut base = &self.p_j + &offset;
            base[0].re = self.p_j[0].re;
            let f = |s: f64| {
                let mut z = base.clone();
                z[0].re += s;
                rho.value(&z)
            };
            let Some(s) = solve_real_shift(f, 0.0, radius) else {
                continue;
            };
            base[0].re += s;
            if let Ok(w) = self.h.eval(&base) {
                worst = worst.min(w[0].re);
                found += 1;
            }
        }
        rep.push(Entry::check("support_min_re_w1", worst, worst, SUPPORT_TOL));
        rep.push(Entry::info("support_samples", found as f64));
        let rp = rho.value(&self.p_j);
        rep.push(Entry::check("rho_at_p_j", rp.abs(), 1e-12 - rp.abs(), 0.0));
        let hq = self.h.eval(&self.q_j).map(|w| {
            let mut target = CVector::zeros(n);
            target[0] = self.phase() * self.r_j;
            norm(&(w - target))
        });
        let defect = hq.unwrap_or(f64::INFINITY);
        rep.push(Entry::check(
            "h_q_defect",
            defect,
            1e-12 * self.r_j.max(1.0) - defect,
            0.0,
        ));
        let tail_gap = (1..n)
            .map(|k| (self.p_j[k] - self.q_j[k]).norm())
            .fold(0.0, f64::max);
        rep.push(Entry::check("tail_gap", tail_gap, -tail_gap, 0.0));
        let dist_gap = (norm(&(&self.p_j - &self.q_j)) - self.r_j).abs();
        rep.push(Entry::check(
            "foot_distance",
            dist_gap,
            1e-12 * self.r_j.max(1e-300) - dist_gap,
            0.0,
        ));
        rep.push(Entry::info("theta_j", self.theta_j));
        rep
    }
}

fn h_linear(phase: Complex64, t: &CVector) -> COperator {
    let n = t.len();
    let mut a = COperator::identity(n, n);
    a[(0, 0)] = phase;
    for k in 1..n {
        a[(0, k)] = t[k];
    }
    a
}

/// Builds `H_j` at the boundary foot of `q_j`. `H_j` sends `p_j` to 0, its
/// complex tangent hyperplane to `{w_1 = 0}` and the inner normal to `+Re w_1`.
pub fn build_stage(normalized: &NormalizedDomain, q_j: &CVector, j: usize) -> Result<ScalingStage> {
    let n = normalized.dim();
    if q_j.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: q_j.len(),
        });
    }
    let rho = normalized.rho();
    if !rho.neighborhood().contains(q_j) || !(rho.value(q_j) < 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "q_{j} is not interior to the normalized domain"
        )));
    }
    let domain = normalized.as_domain();
    let hit = ray_boundary_point(&domain, q_j)?;
    let p_j = hit.point;
    let r_j = hit.distance;

    // Re w_1 = −Re Σ a_k (z_k − p_k) / |a_1| vanishes on the real tangent
    // hyperplane and is positive inside
    let a = rho.complex_gradient(&p_j);
    let a1 = a[0].norm();
    if !(a1 > TANGENT_FLOOR * norm(&a)) {
        return Err(Error::DegenerateTangent);
    }
    let phase = -a[0] / a1;
    let mut t_j = CVector::zeros(n);
    for k in 1..n {
        t_j[k] = -a[k] / a1;
    }
    let lin = h_linear(phase, &t_j);
    let h = HoloMap::affine(lin.clone(), -(&lin * &p_j), MapTag::Affine);
    let l = build_l(r_j, n)?;
    Ok(ScalingStage {
        j,
        q_j: q_j.clone(),
        p_j,
        r_j,
        theta_j: phase.arg(),
        t_j,
        h,
        l,
    })
}

/// Anisotropic dilation `L(w) = (w_1 / r, w' / √r)`.
pub fn build_l(r: f64, n: usize) -> Result<HoloMap> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::NonpositiveRadius(r));
    }
    let mut d = COperator::identity(n, n).scale(1.0 / r.sqrt());
    d[(0, 0)] = ONE / r;
    Ok(HoloMap::linear(d, MapTag::Dilation))
}

/// Largest relative defect `|Re w_1 − ‖w'‖²| / max(1, Re w_1)` of `L(w)` over
/// sampled points `w` of the paraboloid `{Re w_1 = ‖w'‖²}`.
pub fn paraboloid_defect<R: rand::Rng + ?Sized>(
    l: &HoloMap,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let n = l.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut w = crate::sampling::gaussian_vector(n, rng);
        w[0].re = crate::linalg::tail_norm_sqr(&w);
        let out = l.eval(&w)?;
        let defect = (out[0].re - crate::linalg::tail_norm_sqr(&out)).abs();
        worst = worst.max(defect / out[0].re.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{normalize_at, DomainSpec};
    use crate::linalg::basis;
    use crate::sampling::gaussian_vector;

    #[test]
    fn dilation_values() {
        let l = build_l(1.0, 3).unwrap();
        let z = gaussian_vector(3, &mut Streams::new(1).stream(0));
        assert!(norm(&(l.eval(&z).unwrap() - &z)) < 1e-15);
        let l = build_l(0.25, 3).unwrap();
        let w = CVector::from_vec(vec![ONE, ONE, Complex64::new(0.0, 0.0)]);
        let out = l.eval(&w).unwrap();
        assert_eq!(
            out,
            CVector::from_vec(vec![ONE * 4.0, ONE * 2.0, Complex64::new(0.0, 0.0)])
        );
        assert!(matches!(build_l(0.0, 2), Err(Error::NonpositiveRadius(_))));
        assert!(matches!(build_l(-1.0, 2), Err(Error::NonpositiveRadius(_))));
        assert!(l.closed_inverse().is_some());
    }

    #[test]
    fn dilation_preserves_paraboloid() {
        let s = Streams::new(2);
        let mut rng = s.stream(0);
        for r in [1.0, 0.25, 1e-3, 2f64.powi(-30)] {
            let l = build_l(r, 4).unwrap();
            for _ in 0..1000 {
                let mut w = gaussian_vector(4, &mut rng);
                w[0].re = crate::linalg::tail_norm_sqr(&w);
                let out = l.eval(&w).unwrap();
                let defect = out[0].re - crate::linalg::tail_norm_sqr(&out);
                assert!(defect.abs() <= 1e-14 * out[0].re.abs().max(1.0), "{defect}");
            }
        }
    }

    #[test]
    fn siegel_model_stage_is_a_translation() {
        let sg = DomainSpec::siegel(3);
        let nd = normalize_at(&sg, &CVector::zeros(3)).unwrap();
        for j in 1..6 {
            let r = 0.5f64.powi(j);
            let q = basis(3, 0).scale(r);
            let st = build_stage(&nd, &q, j as usize).unwrap();
            assert!(norm(&st.p_j) < 1e-15);
            assert!((st.r_j - r).abs() < 1e-15 * r.max(1.0));
            assert!(st.theta_j.abs() < 1e-15);
            assert!(norm(&st.t_j) < 1e-15);
            let rep = st.verify(&nd, 0.1, 200, &Streams::new(3));
            assert!(rep.pass(), "{}", rep.to_json());
        }
    }

    #[test]
    fn sphere_foot_tilt() {
        // off-axis approach on the normalized ball: the foot moves tangentially
        // and T_j carries the tilt of the tangent plane there
        let ball = DomainSpec::unit_ball(3);
        let nd = normalize_at(&ball, &basis(3, 0)).unwrap();
        let s = Streams::new(4);
        for j in 1..=10 {
            let r = 0.5f64.powi(j);
            let mut q = basis(3, 0).scale(2.0 * r);
            q[1] = Complex64::new(0.3 * r.sqrt(), 0.1 * r.sqrt());
            let st = build_stage(&nd, &q, j as usize).unwrap();
            // ρ_G = −Re w_1 + |w_1|²/2 + ‖w'‖², so ∂ρ_G = (−1/2 + w̄_1/2, w̄')
            let a1 = Complex64::new(-0.5, 0.0) + st.p_j[0].conj() * 0.5;
            for k in 1..3 {
                let expect = -st.p_j[k].conj() / a1.norm();
                assert!(
                    (st.t_j[k] - expect).norm() < 1e-9,
                    "{} vs {}",
                    st.t_j[k],
                    expect
                );
            }
            let rep = st.verify(&nd, 0.1, 1000, &s);
            assert!(rep.pass(), "{}", rep.to_json());
            assert!((st.phase() - ONE).norm() < 2.0 * st.r_j.sqrt());
        }
    }

    #[test]
    fn outside_point_is_rejected() {
        let nd = normalize_at(&DomainSpec::siegel(2), &CVector::zeros(2)).unwrap();
        let q = basis(2, 0).scale(-0.1);
        assert!(matches!(
            build_stage(&nd, &q, 1),
            Err(Error::PreconditionViolated(_))
        ));
    }
}
