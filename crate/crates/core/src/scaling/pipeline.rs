use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::automorphisms::{ball_recentering, cayley, OrbitSchedule};
use crate::domains::{normalize_at, DomainSpec, NormalizedDomain};
use crate::error::{Error, Result};
use crate::holomap::{HoloMap, Holomorphic, MapTag};
use crate::kobayashi::sample_kobayashi_ball;
use crate::linalg::{condition_number, gram_schmidt, norm, COperator, CVector};
use crate::sampling::Streams;

use super::stage::{build_stage, ScalingStage};

/// Tunables of the scaling construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingConfig {
    /// `dom(G)` is the source ball `B(p, u_radius)` intersected with the
    /// validity neighborhood of the defining function.
    pub u_radius: f64,
    /// Candidate Kobayashi radii `R`, increasing.
    pub radius_grid: Vec<f64>,
    /// Kobayashi-ball samples per radius in the localization scan.
    pub localization_samples: usize,
    /// Kobayashi-ball samples for the image bound `ε_j`.
    pub image_samples: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            u_radius: 2.5,
            radius_grid: vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0],
            localization_samples: 256,
            image_samples: 1000,
        }
    }
}

/// Identity on `dom(G)`; evaluation elsewhere fails with
/// [`Error::DomainEscape`] for the stage it belongs to.
#[derive(Debug, Clone)]
struct DomainGuard {
    center: CVector,
    radius: f64,
    source: DomainSpec,
    stage: usize,
}

impl DomainGuard {
    fn admits(&self, z: &CVector) -> bool {
        norm(&(z - &self.center)) < self.radius && self.source.neighborhood().contains(z)
    }
}

impl Holomorphic for DomainGuard {
    fn eval(&self, z: &CVector) -> Result<CVector> {
        if self.admits(z) {
            Ok(z.clone())
        } else {
            Err(Error::DomainEscape { stage: self.stage })
        }
    }

    fn jacobian(&self, z: &CVector) -> Result<COperator> {
        self.eval(z)?;
        Ok(COperator::identity(z.len(), z.len()))
    }

    fn inverse(&self) -> Option<HoloMap> {
        Some(HoloMap::identity(self.center.len()))
    }
}

/// Fixed ingredients shared by all stages: the domain, the base point `q`,
/// the normalization `G` at `p`, and the Cayley map `Ψ`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub domain: DomainSpec,
    pub q: CVector,
    pub normalized: NormalizedDomain,
    pub psi: HoloMap,
    pub config: ScalingConfig,
}

/// Gram–Schmidt calibration of `dτ_j(q)` after recentering.
#[derive(Debug, Clone)]
pub struct Calibration {
    /// `S_j`, unitary with `S_j(f_{jm}/‖f_{jm}‖) = e_m`.
    pub s: COperator,
    pub sigma: HoloMap,
    /// `‖f_{jm}‖`, `m = 1..N`.
    pub f_norms: Vec<f64>,
    /// `τ_j(q)`, moved to 0 by the recentering automorphism.
    pub tau_at_q: CVector,
}

impl Pipeline {
    pub fn new(
        domain: &DomainSpec,
        p: &CVector,
        q: &CVector,
        config: ScalingConfig,
    ) -> Result<Self> {
        if !domain.contains(q) {
            return Err(Error::PreconditionViolated(
                "base point is not interior".into(),
            ));
        }
        let normalized = normalize_at(domain, p)?;
        let psi = cayley(domain.dim())?.0;
        Ok(Pipeline {
            domain: domain.clone(),
            q: q.clone(),
            normalized,
            psi,
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn guard(&self, stage: usize) -> DomainGuard {
        DomainGuard {
            center: self.normalized.base.clone(),
            radius: self.config.u_radius,
            source: self.domain.clone(),
            stage,
        }
    }

    /// `G` restricted to `dom(G)`, failing as stage `stage`.
    pub fn guarded_g(&self, stage: usize) -> HoloMap {
        let n = self.dim();
        self.normalized
            .g
            .after(&HoloMap::from_leaf(self.guard(stage), MapTag::Custom, n))
    }

    pub fn in_dom_g(&self, z: &CVector) -> bool {
        self.guard(0).admits(z)
    }

    /// `ω_j = L_j ∘ H_j ∘ G ∘ φ_j` and `τ_j = Ψ ∘ ω_j`.
    pub fn compose(&self, stage: &ScalingStage, phi: &HoloMap) -> (HoloMap, HoloMap) {
        let omega = HoloMap::compose_all(&[
            phi.clone(),
            self.guarded_g(stage.j),
            stage.h.clone(),
            stage.l.clone(),
        ]);
        let tau = self.psi.after(&omega);
        (omega, tau)
    }

    /// `σ_j = S_j ∘ A_j ∘ τ_j` with `A_j` the ball automorphism taking
    /// `τ_j(q)` to 0 and `S_j` from Gram–Schmidt on the columns of
    /// `d(A_j ∘ τ_j)(q)`.
    pub fn calibrate(&self, tau: &HoloMap) -> Result<Calibration> {
        let n = self.dim();
        let c = tau.eval(&self.q)?;
        let centred = ball_recentering(&c)?.after(tau);
        let jac = centred.jacobian(&self.q)?;
        let cond = condition_number(&jac);
        if !(cond < 1e8) {
            return Err(Error::SingularDifferential(format!(
                "condition number {cond:.3e}"
            )));
        }
        let cols: Vec<CVector> = (0..n).map(|m| jac.column(m).into_owned()).collect();
        let gs = gram_schmidt(&cols).map_err(|e| Error::SingularDifferential(e.to_string()))?;
        let s = COperator::from_columns(&gs.orthonormal).adjoint();
        let sigma = HoloMap::linear(s.clone(), MapTag::Calibration).after(&centred);
        Ok(Calibration {
            s,
            sigma,
            f_norms: gs.norms,
            tau_at_q: c,
        })
    }
}

/// Per-stage scaling data and the calibrated maps.
#[derive(Debug, Clone)]
pub struct ScalingState {
    pub pipeline: Pipeline,
    pub stages: Vec<ScalingStage>,
    pub phis: Vec<HoloMap>,
    pub omegas: Vec<HoloMap>,
    pub taus: Vec<HoloMap>,
    pub calibrations: Vec<Calibration>,
    /// Sampled `sup ‖τ_j‖ − 1` over `B^K(q, R_j)`, clamped at 0.
    pub eps: Vec<f64>,
    /// Kobayashi radii on which `ω_j` is defined; nondecreasing.
    pub radii: Vec<f64>,
}

impl ScalingState {
    /// Builds every stage of the orbit schedule.
    pub fn build(pipeline: Pipeline, orbit: &OrbitSchedule, streams: &Streams) -> Result<Self> {
        let mut stages = Vec::with_capacity(orbit.len());
        for (i, phi) in orbit.maps.iter().enumerate() {
            let x = phi.eval(&pipeline.q)?;
            if !pipeline.in_dom_g(&x) {
                return Err(Error::DomainEscape { stage: i + 1 });
            }
            let q_j = pipeline.normalized.g.eval(&x)?;
            stages.push(build_stage(&pipeline.normalized, &q_j, i + 1)?);
        }
        let radii = localization_radii(&pipeline, &orbit.maps, streams)?;

        let mut omegas = Vec::with_capacity(stages.len());
        let mut taus = Vec::with_capacity(stages.len());
        let mut calibrations = Vec::with_capacity(stages.len());
        let mut eps = Vec::with_capacity(stages.len());
        let mut rng = streams.stream(0x1a6e);
        for (k, stage) in stages.iter().enumerate() {
            let (omega, tau) = pipeline.compose(stage, &orbit.maps[k]);
            eps.push(image_excess(
                &pipeline,
                &tau,
                radii[k],
                pipeline.config.image_samples,
                &mut rng,
            )?);
            calibrations.push(pipeline.calibrate(&tau)?);
            omegas.push(omega);
            taus.push(tau);
        }
        Ok(ScalingState {
            pipeline,
            stages,
            phis: orbit.maps.clone(),
            omegas,
            taus,
            calibrations,
            eps,
            radii,
        })
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// `σ_j` for the 1-based stage index `j`.
    pub fn sigma(&self, j: usize) -> &HoloMap {
        &self.calibrations[j - 1].sigma
    }

    /// `dσ_j(q)`.
    pub fn dsigma(&self, j: usize) -> Result<COperator> {
        self.sigma(j).jacobian(&self.pipeline.q)
    }

    /// `σ_j^{-1}` through the closed-form inverses of every factor.
    pub fn sigma_inverse(&self, j: usize) -> Result<HoloMap> {
        self.sigma(j)
            .closed_inverse()
            .ok_or_else(|| Error::InvalidArgument(format!("σ_{j} has no closed-form inverse")))
    }

    /// `min_m ‖f_{jm}‖` per stage.
    pub fn c0_per_stage(&self) -> Vec<f64> {
        self.calibrations
            .iter()
            .map(|c| c.f_norms.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// Largest grid radius `R` with every sampled `φ_j(B^K(q, R))` inside
/// `dom(G)`, made nondecreasing in `j` by a suffix minimum (0 if none).
pub fn localization_radii(
    pipeline: &Pipeline,
    phis: &[HoloMap],
    streams: &Streams,
) -> Result<Vec<f64>> {
    let cfg = &pipeline.config;
    let mut clouds = Vec::with_capacity(cfg.radius_grid.len());
    for (i, &r) in cfg.radius_grid.iter().enumerate() {
        let mut rng = streams.stream(0x10ca + i as u64);
        clouds.push(sample_kobayashi_ball(
            &pipeline.domain,
            &pipeline.q,
            r,
            cfg.localization_samples,
            &mut rng,
        )?);
    }
    let mut local = Vec::with_capacity(phis.len());
    for phi in phis {
        let mut best = 0.0;
        for (cloud, &r) in clouds.iter().zip(&cfg.radius_grid) {
            let inside = cloud
                .iter()
                .all(|y| phi.eval(y).map(|x| pipeline.in_dom_g(&x)).unwrap_or(false));
            if !inside {
                break;
            }
            best = r;
        }
        local.push(best);
    }
    let mut radii = local.clone();
    for k in (0..radii.len().saturating_sub(1)).rev() {
        radii[k] = radii[k].min(radii[k + 1]);
    }
    Ok(radii)
}

/// `max(0, sup ‖τ(x)‖ − 1)` over sampled `x ∈ B^K(q, radius)`.
fn image_excess<R: Rng + ?Sized>(
    pipeline: &Pipeline,
    tau: &HoloMap,
    radius: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if radius <= 0.0 {
        return Ok(0.0);
    }
    let pts = sample_kobayashi_ball(&pipeline.domain, &pipeline.q, radius, samples, rng)?;
    let mut worst: f64 = 0.0;
    for x in &pts {
        worst = worst.max(norm(&tau.eval(x)?));
    }
    Ok((worst - 1.0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automorphisms::orbit_to_boundary;
    use crate::linalg::{basis, flag_preserving, max_abs_entry};
    use crate::sampling::uniform_ball;

    fn ball_state(n: usize, count: usize, cfg: ScalingConfig) -> ScalingState {
        let ball = DomainSpec::unit_ball(n);
        let q = CVector::zeros(n);
        let p = basis(n, 0);
        let orbit = orbit_to_boundary(&ball, &q, &p, 0.5, count).unwrap();
        let pipe = Pipeline::new(&ball, &p, &q, cfg).unwrap();
        ScalingState::build(pipe, &orbit, &Streams::new(1)).unwrap()
    }

    #[test]
    fn ball_pipeline_closed_form() {
        let st = ball_state(
            3,
            12,
            ScalingConfig {
                image_samples: 200,
                ..Default::default()
            },
        );
        let s = Streams::new(2);
        let mut rng = s.stream(0);
        for (k, tau) in st.taus.iter().enumerate() {
            let r = 0.5f64.powi(k as i32 + 1);
            assert!((st.stages[k].r_j - r).abs() < 1e-12 * r);
            // τ_j(z) = (−(2−r) z_1, −2√(1−r/2) z') / (2 + r z_1) up to a unitary on z'
            for _ in 0..50 {
                let z = uniform_ball(3, 0.95, &mut rng);
                let t = tau.eval(&z).unwrap();
                let den = num_complex::Complex64::new(2.0, 0.0) + z[0] * r;
                let first = -z[0] * (2.0 - r) / den;
                assert!((t[0] - first).norm() < 1e-9, "{} vs {}", t[0], first);
                let tail_expect =
                    2.0 * (1.0 - r / 2.0).sqrt() * crate::linalg::tail_norm_sqr(&z).sqrt()
                        / den.norm();
                assert!((crate::linalg::tail_norm_sqr(&t).sqrt() - tail_expect).abs() < 1e-9);
            }
            assert!(st.eps[k] == 0.0);
        }
        for j in 1..=st.len() {
            let d = st.dsigma(j).unwrap();
            assert!(flag_preserving(&d, 1e-9));
            assert!(norm(&st.sigma(j).eval(&st.pipeline.q).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn calibration_is_idempotent() {
        let st = ball_state(
            4,
            6,
            ScalingConfig {
                image_samples: 50,
                ..Default::default()
            },
        );
        for j in 1..=st.len() {
            let again = st.pipeline.calibrate(st.sigma(j)).unwrap();
            let dev = max_abs_entry(&(&again.s - COperator::identity(4, 4)));
            assert!(dev < 1e-9, "{dev}");
        }
    }

    #[test]
    fn sigma_inverse_round_trips() {
        let st = ball_state(
            3,
            10,
            ScalingConfig {
                image_samples: 50,
                ..Default::default()
            },
        );
        let s = Streams::new(3);
        let mut rng = s.stream(0);
        for j in [1, 5, 10] {
            let inv = st.sigma_inverse(j).unwrap();
            for _ in 0..20 {
                let y = uniform_ball(3, 0.5, &mut rng);
                let x = inv.eval(&y).unwrap();
                assert!(st.pipeline.domain.contains(&x));
                let back = st.sigma(j).eval(&x).unwrap();
                assert!(norm(&(back - &y)) < 1e-8);
            }
        }
    }

    #[test]
    fn siegel_dilations_cancel() {
        let sg = DomainSpec::siegel(3);
        let q = basis(3, 0);
        let p = CVector::zeros(3);
        let orbit = orbit_to_boundary(&sg, &q, &p, 0.5, 8).unwrap();
        let cfg = ScalingConfig {
            u_radius: f64::INFINITY,
            image_samples: 50,
            localization_samples: 32,
            ..Default::default()
        };
        let pipe = Pipeline::new(&sg, &p, &q, cfg).unwrap();
        let st = ScalingState::build(pipe, &orbit, &Streams::new(4)).unwrap();
        let mut rng = Streams::new(5).stream(0);
        for omega in &st.omegas {
            for _ in 0..20 {
                let z = crate::automorphisms::siegel_interior(3, &mut rng);
                let w = omega.eval(&z).unwrap();
                assert!(norm(&(w - &z)) < 1e-9 * norm(&z).max(1.0));
            }
        }
    }

    #[test]
    fn localization_grows_and_escape_is_reported() {
        let cfg = ScalingConfig {
            u_radius: 0.75,
            image_samples: 50,
            localization_samples: 64,
            ..Default::default()
        };
        let st = ball_state(2, 16, cfg);
        assert!(st.radii.windows(2).all(|w| w[1] >= w[0]));
        assert!(st.radii.last().unwrap() > st.radii.first().unwrap());
        // evaluate an early stage on the Kobayashi ball of a later, larger radius
        let (j, k) = (1..st.len())
            .flat_map(|j| (j + 1..=st.len()).map(move |k| (j, k)))
            .find(|&(j, k)| st.radii[k - 1] > st.radii[j - 1])
            .unwrap();
        let mut rng = Streams::new(6).stream(0);
        let pts = sample_kobayashi_ball(
            &st.pipeline.domain,
            &st.pipeline.q,
            st.radii[k - 1],
            256,
            &mut rng,
        )
        .unwrap();
        let escaped = pts.iter().any(|x| matches!(st.omegas[j - 1].eval(x), Err(Error::DomainEscape { stage }) if stage == j));
        assert!(escaped);
    }
}
