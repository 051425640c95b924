//! Pinchuk scaling: per-stage affine normalizations `H_j` and anisotropic
//! dilations `L_j`, the composed maps `ω_j = L_j ∘ H_j ∘ G ∘ φ_j`, the
//! bounded modifications `τ_j = Ψ ∘ ω_j`, and the Gram–Schmidt calibrated
//! maps `σ_j`, together with their diagnostics.
//!
//! Normalized coordinates put the interior along `+Re w_1`; `H_j` keeps that
//! orientation, so `H_j(q_j) = e^{iθ_j} r_j e_1` and the scaled domains
//! converge to the Siegel domain `{Re w_1 > ‖w'‖²}`.

mod diagnostics;
mod hausdorff;
mod pipeline;
mod stage;

pub use diagnostics::{
    b_j, reference_metric, scaling_diagnostics, stage_table, DiagnosticsConfig, STAGE_COLUMNS,
};
pub use hausdorff::{fit_exponent, hausdorff_to_siegel, CLOUD_COLUMNS, RESOLVED_GAP};
pub use pipeline::{localization_radii, Calibration, Pipeline, ScalingConfig, ScalingState};
pub use stage::{build_l, build_stage, paraboloid_defect, ScalingStage, StageRecord, SUPPORT_TOL};

use crate::domains::NormalizedDomain;
use crate::error::Result;
use crate::linalg::{basis, CVector};

/// Tie tolerance for the monotonicity checks across stages.
pub const MONOTONE_TOL: f64 = 1e-9;

/// Root of `f` near `guess` for a function that is positive (or undefined)
/// below the root and negative above it, as `ρ` along the inner normal.
///
/// The bracket is grown geometrically from `width` on both sides, then
/// bisected to full double precision. Returns `None` when no sign change
/// with a finite outer value is found.
pub fn solve_real_shift(f: impl Fn(f64) -> f64, guess: f64, width: f64) -> Option<f64> {
    let positive = |v: f64| !v.is_finite() || v > 0.0;
    let width = if width > 0.0 && width.is_finite() {
        width
    } else {
        1.0
    };
    if f(guess) == 0.0 {
        return Some(guess);
    }
    // inner end: f < 0; try growing offsets first, then shrinking ones
    let offsets = (0..40)
        .map(|m| width * 2f64.powi(m))
        .chain((1..40).map(|m| width * 2f64.powi(-m)));
    let hi = offsets.clone().map(|d| guess + d).find(|&s| f(s) < 0.0)?;
    let lo = offsets.map(|d| guess - d).find(|&s| {
        let v = f(s);
        positive(v)
    })?;
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return Some(mid);
        }
        if positive(v) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the outer end must have been a genuine crossing, not the edge of U
    let (flo, fhi) = (f(lo), f(hi));
    if !flo.is_finite() {
        return None;
    }
    Some(if flo.abs() <= fhi.abs() { lo } else { hi })
}

/// Synthetic orbit in normalized coordinates for domains without an
/// automorphism factory: `q_j = rate^j (e_1 + offset·e_2)`, `j = 1..=count`.
pub fn synthetic_points(dim: usize, rate: f64, offset: f64, count: usize) -> Vec<CVector> {
    let mut dir = basis(dim, 0);
    if dim > 1 {
        dir[1].re = offset;
    }
    (1..=count)
        .map(|j| dir.scale(rate.powi(j as i32)))
        .collect()
}

/// Stages driven by the synthetic orbit; only the boundary geometry is
/// exercised, no `φ_j` is involved.
pub fn synthetic_stages(
    normalized: &NormalizedDomain,
    rate: f64,
    offset: f64,
    count: usize,
) -> Result<Vec<ScalingStage>> {
    synthetic_points(normalized.dim(), rate, offset, count)
        .iter()
        .enumerate()
        .map(|(i, q)| build_stage(normalized, q, i + 1))
        .collect()
}

/// `true` when `xs` never increases by more than `tol` (relative to the
/// previous value).
pub fn nonincreasing(xs: &[f64], tol: f64) -> bool {
    xs.windows(2)
        .all(|w| w[1] <= w[0] + tol * w[0].abs().max(1.0))
}

/// Relative error carried by stage quantities at gap `r`: points near the
/// boundary are computed in unit-scale coordinates, so their absolute
/// rounding error is amplified by the `1/r` dilation.
pub fn rounding_floor(r: f64) -> f64 {
    8.0 * f64::EPSILON / r
}

/// [`nonincreasing`] where step `k → k+1` may also rise by `floors[k+1]`,
/// the resolution of the later value.
pub fn nonincreasing_within(xs: &[f64], floors: &[f64], tol: f64) -> bool {
    xs.windows(2)
        .zip(floors.iter().skip(1))
        .all(|(w, f)| w[1] <= w[0] + (tol * w[0].abs().max(1.0)).max(*f))
}
