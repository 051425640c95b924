use num_complex::Complex64;

use crate::domains::{DefiningFunction, NormalizedDomain};
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::report::{Entry, Report, Table};
use crate::sampling::{uniform_ball, Streams};

use super::{nonincreasing, solve_real_shift, ScalingStage, MONOTONE_TOL};

/// Column layout of the boundary-sample cloud.
pub const CLOUD_COLUMNS: [&str; 4] = ["j", "re_w1", "norm_w_tail_sq", "deviation"];

/// Smallest `r_j` whose scaled deviation is above the rounding floor of the
/// defining function: `ρ_G` carries absolute error near machine epsilon, which
/// the `1/r_j` dilation of the normal coordinate turns into `ε/r_j`.
pub const RESOLVED_GAP: f64 = 1e-6;

/// Deviation of the scaled boundaries `L_j H_j(∂Ω_U)` from the limit
/// paraboloid `{Re w_1 = ψ₂(w')}`.
///
/// Scaled boundary points are parametrized by `(Im w_1, w') ∈ [−1, 1] ×
/// B^{N−1}`, i.e. a `√r_j`-neighborhood of `p_j` in the tangential
/// directions; the same parameters are used for every stage. For each, the
/// real part `s` with `ρ_G(H_j^{-1} L_j^{-1}(s + it, w')) = 0` is compared
/// with `ψ₂(w') = w'^H M' w'`. The decay exponent is the least-squares slope
/// of `ln dev_j` against `ln r_j` over the resolved stages: those with
/// `r_j ≥` [`RESOLVED_GAP`] whose fibres all meet the boundary.
pub fn hausdorff_to_siegel(
    normalized: &NormalizedDomain,
    stages: &[ScalingStage],
    samples: usize,
    streams: &Streams,
) -> Result<Report> {
    let mut rep = Report::new("hausdorff");
    let n = normalized.dim();
    let rho = normalized.rho();
    let mut rng = streams.stream(0x4a05);
    let params: Vec<(f64, CVector)> = (0..samples)
        .map(|_| {
            let t = 2.0 * rand::Rng::random::<f64>(&mut rng) - 1.0;
            let mut w = uniform_ball(n, 1.0, &mut rng);
            w[0] = Complex64::new(0.0, 0.0);
            (t, w)
        })
        .collect();

    let mut per_stage = Table::new("hausdorff", &["j", "r_j", "deviation", "unsolved"]);
    let mut cloud = Table::new("cloud", &CLOUD_COLUMNS);
    let mut devs = Vec::with_capacity(stages.len());
    let mut total_unsolved = 0usize;
    for st in stages {
        let back = st
            .scaled()
            .closed_inverse()
            .ok_or_else(|| Error::InvalidArgument("scaling map is not invertible".into()))?;
        let mut worst: f64 = 0.0;
        let mut unsolved = 0usize;
        for (t, tail) in &params {
            let model = normalized.psi_quadratic(0.0, tail);
            let f = |s: f64| {
                let mut w = tail.clone();
                w[0] = Complex64::new(s, *t);
                match back.eval(&w) {
                    Ok(z) if rho.neighborhood().contains(&z) => rho.value(&z),
                    _ => f64::NAN,
                }
            };
            // early, coarse stages may have fibres that never meet the boundary
            let dev = match solve_real_shift(f, model, 1.0) {
                Some(s) => {
                    cloud.push(vec![
                        st.j as f64,
                        s,
                        crate::linalg::tail_norm_sqr(tail),
                        (s - model).abs(),
                    ]);
                    (s - model).abs()
                }
                None => f64::INFINITY,
            };
            if dev.is_finite() {
                worst = worst.max(dev);
            } else {
                unsolved += 1;
            }
        }
        per_stage.push(vec![st.j as f64, st.r_j, worst, unsolved as f64]);
        devs.push((st.r_j, worst, unsolved));
        total_unsolved += unsolved;
    }

    // a stage is comparable with the others only when every fibre was solved
    // and its gap is above the rounding floor
    let resolved: Vec<(f64, f64)> = devs
        .iter()
        .filter(|&&(r, _, u)| r >= RESOLVED_GAP && u == 0)
        .map(|&(r, d, _)| (r, d))
        .collect();
    rep.push(Entry::info("unsolved_samples", total_unsolved as f64));
    let resolved_devs: Vec<f64> = resolved.iter().map(|&(_, d)| d).collect();
    rep.push(Entry::flag(
        "deviation_monotone",
        nonincreasing(&resolved_devs, MONOTONE_TOL),
    ));
    rep.push(Entry::info("resolved_stages", resolved.len() as f64));
    if let Some(&(_, d, _)) = devs.last() {
        rep.push(Entry::info("deviation_final", d));
    }
    if let Some(&(_, d)) = resolved.last() {
        rep.push(Entry::info("deviation_resolved_final", d));
    }
    rep.push(Entry::info(
        "decay_exponent",
        fit_exponent(&resolved).unwrap_or(f64::NAN),
    ));
    rep.tables.push(per_stage);
    rep.tables.push(cloud);
    Ok(rep)
}

/// Least-squares slope of `ln y` against `ln x`, over pairs with positive
/// finite values; `None` with fewer than two such pairs or a flat `x`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let m = logs.len() as f64;
    let (mx, my) = logs
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
