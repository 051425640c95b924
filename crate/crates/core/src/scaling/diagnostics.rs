use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::DomainSpec;
use crate::error::Result;
use crate::kobayashi::{
    exact, metric_upper, sample_kobayashi_ball, DEFAULT_BUDGET, DEFAULT_DEGREE,
};
use crate::linalg::{lower_defect, norm, op_norm, COperator, CVector};
use crate::report::{Entry, Report, Table};
use crate::sampling::{uniform_ball, unit_sphere, Streams};

use super::hausdorff::hausdorff_to_siegel;
use super::{nonincreasing, nonincreasing_within, rounding_floor, ScalingState, MONOTONE_TOL};

/// Column layout of the per-stage table.
pub const STAGE_COLUMNS: [&str; 7] = [
    "j",
    "r_j",
    "theta_j",
    "eps_j",
    "est_lo_margin",
    "est_hi_margin",
    "hausdorff_dev",
];

/// Tolerance on the relative `(est)` sandwich margins.
const EST_TOL: f64 = 1e-3;
/// Required final `(est0)` residual.
const EST0_FINAL: f64 = 1e-2;
/// Relative invariance defect of the paraboloid under `L_j`.
const PARABOLOID_TOL: f64 = 1e-14;
/// Largest strictly-lower entry of `dσ_j(q)` for a flag-preserving map.
const FLAG_TOL: f64 = 1e-9;
/// Allowed relative drift of `c₀` when the stage count is halved.
const C0_STABILITY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    /// Random unit directions `v` for the metric sandwich (the basis vectors
    /// are always included).
    pub directions: usize,
    /// Samples per side of the `(1 ± 1/j)` containment sandwich.
    pub sandwich_samples: usize,
    /// Boundary samples per stage for the Hausdorff deviation; 0 skips it.
    pub hausdorff_samples: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            directions: 64,
            sandwich_samples: 200,
            hausdorff_samples: 100,
        }
    }
}

/// `k_Ω(x, v)`: exact on the ball models, the best disc upper bound elsewhere.
pub fn reference_metric(domain: &DomainSpec, x: &CVector, v: &CVector) -> Result<f64> {
    match exact::exact_metric(domain, x, v) {
        Some(k) => k,
        None => Ok(metric_upper(domain, x, v, DEFAULT_DEGREE, DEFAULT_BUDGET)?.upper),
    }
}

/// `b_j = u(1 − 1/j) = ½ ln(2j − 1)`.
pub fn b_j(j: usize) -> f64 {
    0.5 * (2.0 * j as f64 - 1.0).ln()
}

#[derive(Debug, Clone, Default)]
struct StageDiag {
    sigma_q: f64,
    flag_defect: f64,
    d_norm: f64,
    d_inv_norm: f64,
    est_lo: f64,
    est_hi: f64,
    est0: f64,
    upper: f64,
    lower: f64,
}

/// Properties of the calibrated maps `σ_j` at `q` across stages: centring,
/// flag preservation, Cauchy differences of `dσ_j(q)`, the metric sandwich
/// `(1−1/j)k ≤ ‖dσ_j(q)v‖ ≤ (1+1/j)(1−1/j)^{-1}k`, the limit residual
/// `|‖dσ_j(q)v‖ − k|/k`, the `(1 ± 1/j)` containment sandwich, and the
/// Gram–Schmidt floor `c₀`.
pub fn scaling_diagnostics(
    state: &ScalingState,
    cfg: &DiagnosticsConfig,
    streams: &Streams,
) -> Result<Report> {
    let mut rep = Report::new("scaling");
    let pipe = &state.pipeline;
    let (domain, q, n) = (&pipe.domain, &pipe.q, pipe.dim());

    let mut dirs: Vec<CVector> = (0..n).map(|k| crate::linalg::basis(n, k)).collect();
    let mut rng = streams.stream(0xd1a9);
    dirs.extend((0..cfg.directions).map(|_| unit_sphere(n, &mut rng)));
    let ks: Vec<f64> = dirs
        .iter()
        .map(|v| reference_metric(domain, q, v))
        .collect::<Result<_>>()?;

    let jacobians: Vec<COperator> = (1..=state.len())
        .map(|j| state.dsigma(j))
        .collect::<Result<_>>()?;

    // containment samples, drawn up front so the stage loop is order-free
    let mut outer = Vec::with_capacity(state.len());
    let mut inner = Vec::with_capacity(state.len());
    for j in 1..=state.len() {
        let mut rng = streams.stream(0x5a0d + j as u64);
        let radius = b_j(j).min(state.radii[j - 1]);
        outer.push(if radius > 0.0 {
            sample_kobayashi_ball(domain, q, radius, cfg.sandwich_samples, &mut rng)?
        } else {
            vec![q.clone()]
        });
        let shrink = 1.0 - 1.0 / j as f64;
        inner.push(
            (0..cfg.sandwich_samples)
                .map(|_| uniform_ball(n, shrink, &mut rng))
                .collect::<Vec<_>>(),
        );
    }

    let diags: Vec<StageDiag> = (1..=state.len())
        .into_par_iter()
        .map(|j| {
            stage_diag(
                state,
                j,
                &jacobians[j - 1],
                &dirs,
                &ks,
                &outer[j - 1],
                &inner[j - 1],
            )
        })
        .collect::<Result<_>>()?;

    let sigma_q = diags.iter().map(|d| d.sigma_q).fold(0.0, f64::max);
    rep.push(Entry::check(
        "sigma_q_norm_max",
        sigma_q,
        1e-9 - sigma_q,
        0.0,
    ));
    let mut rng = streams.stream(0x9a7a);
    let mut parab: f64 = 0.0;
    for st in &state.stages {
        parab = parab.max(super::paraboloid_defect(&st.l, 200, &mut rng)?);
    }
    rep.push(Entry::check(
        "paraboloid_defect_max",
        parab,
        PARABOLOID_TOL - parab,
        0.0,
    ));
    let defect = diags.iter().map(|d| d.flag_defect).fold(0.0, f64::max);
    rep.push(Entry::check(
        "flag_defect_max",
        defect,
        FLAG_TOL - defect,
        0.0,
    ));
    rep.push(Entry::info(
        "dsigma_norm_max",
        diags.iter().map(|d| d.d_norm).fold(0.0, f64::max),
    ));
    rep.push(Entry::info(
        "dsigma_inv_norm_max",
        diags.iter().map(|d| d.d_inv_norm).fold(0.0, f64::max),
    ));

    // changes below the rounding floor of the gap r_j count as ties
    let floors: Vec<f64> = state.stages.iter().map(|s| rounding_floor(s.r_j)).collect();
    let cauchy: Vec<f64> = jacobians
        .windows(2)
        .map(|w| op_norm(&(&w[1] - &w[0])))
        .collect();
    if let Some(&last) = cauchy.last() {
        rep.push(Entry::info("cauchy_diff_final", last));
        rep.push(Entry::flag(
            "cauchy_diff_monotone",
            nonincreasing_within(&cauchy, &floors[1..], MONOTONE_TOL),
        ));
    }

    let lo = diags.iter().map(|d| d.est_lo).fold(f64::INFINITY, f64::min);
    let hi = diags.iter().map(|d| d.est_hi).fold(f64::INFINITY, f64::min);
    rep.push(Entry::check("est_lo_margin_min", lo, lo, EST_TOL));
    rep.push(Entry::check("est_hi_margin_min", hi, hi, EST_TOL));
    let est0: Vec<f64> = diags.iter().map(|d| d.est0).collect();
    let final_est0 = *est0.last().unwrap_or(&f64::INFINITY);
    rep.push(Entry::check(
        "est0_residual_final",
        final_est0,
        EST0_FINAL - final_est0,
        0.0,
    ));
    rep.push(Entry::flag(
        "est0_monotone",
        nonincreasing_within(&est0, &floors, MONOTONE_TOL),
    ));

    let upper = diags.iter().map(|d| d.upper).fold(f64::INFINITY, f64::min);
    let lower = diags.iter().map(|d| d.lower).fold(f64::INFINITY, f64::min);
    rep.push(Entry::check(
        "sandwich_upper_min",
        upper,
        upper,
        MONOTONE_TOL,
    ));
    rep.push(Entry::check(
        "sandwich_lower_min",
        lower,
        lower,
        MONOTONE_TOL,
    ));

    rep.push(Entry::info(
        "eps_max",
        state.eps.iter().cloned().fold(0.0, f64::max),
    ));
    rep.push(Entry::flag(
        "eps_monotone",
        nonincreasing(&state.eps, MONOTONE_TOL),
    ));
    rep.push(Entry::flag(
        "radii_monotone",
        state.radii.windows(2).all(|w| w[1] >= w[0]),
    ));
    rep.push(Entry::info(
        "rounding_floor_final",
        *floors.last().unwrap_or(&0.0),
    ));
    rep.push(Entry::info(
        "radius_final",
        *state.radii.last().unwrap_or(&0.0),
    ));

    // c₀: the Gram–Schmidt floor must not degrade as stages are added
    let per_stage = state.c0_per_stage();
    let c0 = per_stage.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = per_stage[..per_stage.len().div_ceil(2)]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let drift = (half - c0).abs() / c0;
    rep.push(Entry::check("c0", c0, c0, 0.0));
    rep.push(Entry::info("c0_half", half));
    rep.push(Entry::check(
        "c0_stability",
        drift,
        C0_STABILITY - drift,
        0.0,
    ));
    let top = per_stage.iter().cloned().fold(0.0, f64::max);
    rep.push(Entry::info("c0_stage_spread", (top - c0) / top));

    let hausdorff = if cfg.hausdorff_samples > 0 {
        let h = hausdorff_to_siegel(
            &pipe.normalized,
            &state.stages,
            cfg.hausdorff_samples,
            streams,
        )?;
        let devs: Option<Vec<f64>> = h
            .tables
            .iter()
            .find(|t| t.name == "hausdorff")
            .map(|t| t.rows.iter().map(|r| r[2]).collect());
        rep.absorb("hausdorff", h);
        devs
    } else {
        None
    };
    rep.tables.push(stage_table(
        state,
        &diags
            .iter()
            .map(|d| (d.est_lo, d.est_hi))
            .collect::<Vec<_>>(),
        hausdorff.as_deref(),
    ));
    Ok(rep)
}

fn stage_diag(
    state: &ScalingState,
    j: usize,
    d: &COperator,
    dirs: &[CVector],
    ks: &[f64],
    outer: &[CVector],
    inner: &[CVector],
) -> Result<StageDiag> {
    let q = &state.pipeline.q;
    let sigma = state.sigma(j);
    let jf = j as f64;
    let (shrink, grow) = (1.0 - 1.0 / jf, 1.0 + 1.0 / jf);
    let mut out = StageDiag {
        sigma_q: norm(&sigma.eval(q)?),
        flag_defect: lower_defect(d),
        d_norm: op_norm(d),
        d_inv_norm: d
            .clone()
            .try_inverse()
            .map(|m| op_norm(&m))
            .unwrap_or(f64::INFINITY),
        est_lo: f64::INFINITY,
        est_hi: f64::INFINITY,
        ..Default::default()
    };
    for (v, &k) in dirs.iter().zip(ks) {
        let m = norm(&(d * v));
        out.est_lo = out.est_lo.min((m - shrink * k) / k);
        if shrink > 0.0 {
            out.est_hi = out.est_hi.min((grow / shrink * k - m) / k);
        }
        out.est0 = out.est0.max((m - k).abs() / k);
    }
    let mut worst: f64 = 0.0;
    for x in outer {
        worst = worst.max(sigma.eval(x).map(|y| norm(&y)).unwrap_or(f64::INFINITY));
    }
    out.upper = grow - worst;
    let inv = state.sigma_inverse(j)?;
    let domain = &state.pipeline.domain;
    let mut worst_rho = f64::NEG_INFINITY;
    for y in inner {
        let rho = inv.eval(y).map(|x| domain.rho(&x)).unwrap_or(f64::INFINITY);
        worst_rho = worst_rho.max(if rho.is_nan() { f64::INFINITY } else { rho });
    }
    out.lower = -worst_rho;
    Ok(out)
}

/// Per-stage table with [`STAGE_COLUMNS`]; missing Hausdorff deviations are NaN.
pub fn stage_table(state: &ScalingState, est: &[(f64, f64)], hausdorff: Option<&[f64]>) -> Table {
    let mut t = Table::new("stages", &STAGE_COLUMNS);
    for (k, st) in state.stages.iter().enumerate() {
        let (lo, hi) = est.get(k).copied().unwrap_or((f64::NAN, f64::NAN));
        let dev = hausdorff
            .and_then(|h| h.get(k).copied())
            .unwrap_or(f64::NAN);
        t.push(vec![
            st.j as f64,
            st.r_j,
            st.theta_j,
            state.eps[k],
            lo,
            hi,
            dev,
        ]);
    }
    t
}
