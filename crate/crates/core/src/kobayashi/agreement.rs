use rand::Rng;

use crate::domains::DomainSpec;
use crate::error::Result;
use crate::linalg::{basis, norm, CVector};
use crate::report::{Entry, Report, Table};
use crate::sampling::{axis_mixed, Streams};

use super::{distance, exact, metric_upper, DEFAULT_BUDGET, DEFAULT_DEGREE, DEFAULT_SEGMENTS};

/// Allowed relative gap between an estimator and the closed form.
pub const AGREEMENT_TOL: f64 = 0.01;

/// Largest Euclidean radius of sampled points.
const MAX_RADIUS: f64 = 0.95;

/// Compares the disc-search metric estimate and the path-integral distance
/// estimate on the unit ball of `C^dim` with the closed forms, over `pairs`
/// random `(x, v)` and `(x, q)` pairs.
///
/// Points and directions are drawn with [`axis_mixed`] around the axis of
/// the previous point, with scalars and frames from separate streams, so the
/// geometry of each pair (radii, angles) has the same law for every `dim`.
pub fn oracle_agreement(dim: usize, pairs: usize, streams: &Streams) -> Result<Report> {
    let ball = DomainSpec::unit_ball(dim);
    let e1 = basis(dim, 0);
    let (mut scalars, mut frame) = (streams.stream(0xa9e1), streams.stream(0xa9e2));
    let mut table = Table::new(
        "oracle_agreement",
        &["pair", "norm_x", "metric_rel_err", "distance_rel_err"],
    );
    let mut worst_k: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    let mut below_k: f64 = 0.0;
    for i in 0..pairs {
        let x = axis_mixed(
            &e1,
            MAX_RADIUS * scalars.random::<f64>().sqrt(),
            &mut scalars,
            &mut frame,
        );
        let axis = if norm(&x) > 0.0 {
            x.unscale(norm(&x))
        } else {
            e1.clone()
        };
        let v = axis_mixed(&axis, 1.0, &mut scalars, &mut frame);
        let q: CVector = axis_mixed(
            &axis,
            MAX_RADIUS * scalars.random::<f64>().sqrt(),
            &mut scalars,
            &mut frame,
        );

        let k_exact = exact::ball_metric(&x, &v)?;
        let k = metric_upper(&ball, &x, &v, DEFAULT_DEGREE, DEFAULT_BUDGET)?.upper;
        let k_err = (k - k_exact).abs() / k_exact;
        // an upper bound may not undercut the closed form
        below_k = below_k.max((k_exact - k) / k_exact);

        let d_exact = exact::ball_distance(&x, &q)?;
        let d = distance(&ball, &x, &q, DEFAULT_SEGMENTS)?.upper;
        let d_err = if d_exact > 0.0 {
            (d - d_exact).abs() / d_exact
        } else {
            d.abs()
        };

        worst_k = worst_k.max(k_err);
        worst_d = worst_d.max(d_err);
        table.push(vec![i as f64, norm(&x), k_err, d_err]);
    }
    let mut rep = Report::new("oracle_agreement");
    rep.push(Entry::info("dim", dim as f64));
    rep.push(Entry::info("pairs", pairs as f64));
    rep.push(Entry::check(
        "metric_rel_err_max",
        worst_k,
        AGREEMENT_TOL - worst_k,
        0.0,
    ));
    rep.push(Entry::check(
        "distance_rel_err_max",
        worst_d,
        AGREEMENT_TOL - worst_d,
        0.0,
    ));
    rep.push(Entry::check("metric_undercut", below_k, -below_k, 1e-9));
    rep.tables.push(table);
    Ok(rep)
}
