use rand::Rng;
use rayon::prelude::*;

use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::kobayashi::exact::model_point_at;
use crate::kobayashi::localization_check;
use crate::linalg::{basis, norm, CVector};
use crate::report::{Entry, Report, Table};
use crate::sampling::{axis_mixed, Streams};

/// Tolerances of the nested-domain estimates: absolute for distances,
/// relative for the metric.
pub const DISTANCE_TOL: f64 = 1e-6;
pub const METRIC_TOL: f64 = 1e-6;

/// One nested configuration `x ∈ B^K(q, a) ⊂ B^K(q, b) ⊂ Ω' ⊂ Ω = B`.
#[derive(Debug, Clone)]
pub struct NestedConfig {
    pub q: CVector,
    pub x: CVector,
    pub b: f64,
    /// Radius of the Kobayashi ball used as `Ω'`; at least `b`.
    pub outer: f64,
}

/// Random nested configurations in the unit ball of `C^dim`. The scalars
/// (radii, overlaps) and the frames come from separate streams, so the
/// scalar content of the `i`-th configuration does not depend on `dim`.
pub fn nested_configs(dim: usize, count: usize, streams: &Streams) -> Result<Vec<NestedConfig>> {
    let ball = DomainSpec::unit_ball(dim);
    let e1 = basis(dim, 0);
    let (mut scalars, mut frame) = (streams.stream(0x10c1), streams.stream(0x10c2));
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let q = axis_mixed(&e1, 0.7 * scalars.random::<f64>(), &mut scalars, &mut frame);
        let b = 0.2 + 2.3 * scalars.random::<f64>();
        let outer = b + scalars.random::<f64>();
        let a = b * (0.02 + 0.96 * scalars.random::<f64>());
        out.push(place(&ball, &e1, q, a, b, outer, &mut scalars, &mut frame)?);
    }
    Ok(out)
}

/// Random nested configurations with the given `a = d(x, q) < b`; the
/// centers, directions and outer radii are drawn as in [`nested_configs`].
pub fn nested_configs_at(
    dim: usize,
    a: f64,
    b: f64,
    count: usize,
    streams: &Streams,
) -> Result<Vec<NestedConfig>> {
    if !(a >= 0.0 && a < b && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 ≤ a < b, got a = {a}, b = {b}"
        )));
    }
    let ball = DomainSpec::unit_ball(dim);
    let e1 = basis(dim, 0);
    let (mut scalars, mut frame) = (streams.stream(0x10c1), streams.stream(0x10c2));
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let q = axis_mixed(&e1, 0.7 * scalars.random::<f64>(), &mut scalars, &mut frame);
        let outer = b + scalars.random::<f64>();
        out.push(place(&ball, &e1, q, a, b, outer, &mut scalars, &mut frame)?);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn place<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    ball: &DomainSpec,
    e1: &CVector,
    q: CVector,
    a: f64,
    b: f64,
    outer: f64,
    scalars: &mut R1,
    frame: &mut R2,
) -> Result<NestedConfig> {
    let dir = axis_mixed(e1, 1.0, scalars, frame);
    let x =
        model_point_at(ball, &q, &dir.unscale(norm(&dir)), a).ok_or(Error::NoEnclosingBall)??;
    Ok(NestedConfig { q, x, b, outer })
}

/// Runs the nested-domain check on every configuration, with `Ω` the unit
/// ball and `Ω'` the Kobayashi ball `B^K(q, outer)`, where both metrics are
/// exact. Reports the worst absolute distance margin, the worst relative
/// metric margin, and the violation count.
pub fn localization_suite(
    dim: usize,
    configs: usize,
    directions: usize,
    streams: &Streams,
) -> Result<Report> {
    localization_suite_with(
        dim,
        &nested_configs(dim, configs, streams)?,
        directions,
        streams,
    )
}

/// [`localization_suite`] over the given configurations.
pub fn localization_suite_with(
    dim: usize,
    cfgs: &[NestedConfig],
    directions: usize,
    streams: &Streams,
) -> Result<Report> {
    let ball = DomainSpec::unit_ball(dim);
    let results: Vec<Result<Report>> = cfgs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let sub = DomainSpec::kobayashi_ball(&c.q, c.outer)?;
            localization_check(
                &ball,
                &sub,
                &c.q,
                &c.x,
                c.b,
                directions,
                &streams.child(i as u64),
            )
        })
        .collect();

    let mut table = Table::new(
        "localization",
        &[
            "config",
            "a",
            "b",
            "outer",
            "distance_margin",
            "metric_margin_rel",
        ],
    );
    let mut d_min = f64::INFINITY;
    let mut k_min = f64::INFINITY;
    let mut violations = 0usize;
    for (i, (c, r)) in cfgs.iter().zip(results).enumerate() {
        let r = r?;
        let d = r
            .get("distance_margin")
            .map(|e| e.margin)
            .unwrap_or(f64::NEG_INFINITY);
        let k = r
            .get("metric_margin_rel")
            .map(|e| e.margin)
            .unwrap_or(f64::NEG_INFINITY);
        if d < -DISTANCE_TOL || k < -METRIC_TOL {
            violations += 1;
        }
        d_min = d_min.min(d);
        k_min = k_min.min(k);
        table.push(vec![
            i as f64,
            r.value("a").unwrap_or(f64::NAN),
            c.b,
            c.outer,
            d,
            k,
        ]);
    }
    let mut rep = Report::new("localization_suite");
    rep.push(Entry::info("configs", cfgs.len() as f64));
    rep.push(Entry::check(
        "distance_margin_min",
        d_min,
        d_min,
        DISTANCE_TOL,
    ));
    rep.push(Entry::check(
        "metric_margin_rel_min",
        k_min,
        k_min,
        METRIC_TOL,
    ));
    rep.push(Entry::check(
        "violations",
        violations as f64,
        -(violations as f64),
        0.0,
    ));
    rep.tables.push(table);
    Ok(rep)
}

/// Sampled `Q_a ⊂ Q_b` for `a < b`, with `Q_s = B^K(q, s)` in the unit ball:
/// every sample inside `Q_a` must lie in `Q_b`.
pub fn nested_sublevels(
    dim: usize,
    q: &CVector,
    radii: &[f64],
    samples: usize,
    streams: &Streams,
) -> Result<bool> {
    let mut rng = streams.stream(0x0a0b);
    let pts: Vec<CVector> = (0..samples)
        .map(|_| crate::sampling::uniform_ball(dim, 0.999, &mut rng))
        .collect();
    let mut dists = Vec::with_capacity(samples);
    for y in &pts {
        dists.push(crate::kobayashi::exact::ball_distance(y, q)?);
    }
    Ok(radii.windows(2).all(|w| {
        let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
        dists.iter().all(|&d| !(d < a) || d < b)
    }))
}
