//! Kobayashi metric and distance estimates: closed forms on the ball models,
//! analytic-disc upper bounds, enclosing-ball lower bounds, path-integral
//! distances, Kobayashi balls and the nested-domain localization estimate.

mod agreement;
pub mod disc;
pub mod exact;

use std::sync::OnceLock;

use rand::Rng;

use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::linalg::{norm, CVector};
use crate::report::{Entry, Report};
use crate::sampling::{gaussian_vector, uniform_ball, Streams};

pub use agreement::{oracle_agreement, AGREEMENT_TOL};
pub use disc::{exit_time, AnalyticDisc, CERTIFY_SAMPLES, SEARCH_SAMPLES};
pub use exact::{poincare_u, poincare_u_inv};

/// Disc degree used when the caller does not choose one.
pub const DEFAULT_DEGREE: usize = 4;
/// Shape evaluations allowed per disc search by default.
pub const DEFAULT_BUDGET: usize = 2000;
/// Path pieces used by [`kobayashi_ball_membership`].
pub const DEFAULT_SEGMENTS: usize = 8;
/// Gauss–Legendre nodes per path segment.
pub const QUADRATURE_NODES: usize = 32;

/// Disc settings for metric evaluations inside path integrals.
const PATH_DEGREE: usize = 2;
const PATH_BUDGET: usize = 300;

/// A `(lower, upper)` pair bracketing a Kobayashi quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEstimate {
    pub lower: f64,
    pub upper: f64,
    pub witness: Option<AnalyticDisc>,
}

impl MetricEstimate {
    pub fn exact(value: f64) -> Self {
        MetricEstimate {
            lower: value,
            upper: value,
            witness: None,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_point(domain: &DomainSpec, x: &CVector) -> Result<()> {
    if x.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            found: x.len(),
        });
    }
    if !domain.contains(x) {
        return Err(Error::PreconditionViolated("point not interior".into()));
    }
    Ok(())
}

/// Lower bound: the exact metric of the ball models (each is its own
/// enclosing model), otherwise the metric of an enclosing Euclidean ball.
pub fn metric_lower(domain: &DomainSpec, x: &CVector, v: &CVector) -> Result<f64> {
    check_point(domain, x)?;
    if let Some(k) = exact::exact_metric(domain, x, v) {
        return k;
    }
    let (c, r) = domain.enclosing_ball().ok_or(Error::NoEnclosingBall)?;
    exact::euclidean_ball_metric(&c, r, x, v)
}

/// Upper bound from the best certified disc of the given degree found within
/// `budget` shape evaluations; the lower bound is [`metric_lower`] when one
/// exists and 0 otherwise.
pub fn metric_upper(
    domain: &DomainSpec,
    x: &CVector,
    v: &CVector,
    degree: usize,
    budget: usize,
) -> Result<MetricEstimate> {
    check_point(domain, x)?;
    let lower = match metric_lower(domain, x, v) {
        Ok(k) => k,
        Err(Error::NoEnclosingBall) => 0.0,
        Err(e) => return Err(e),
    };
    let target = (lower > 0.0).then_some(lower);
    let found = disc::search(domain, x, v, degree, budget, target)?;
    Ok(MetricEstimate {
        lower,
        upper: found.upper,
        witness: Some(found.witness),
    })
}

/// Best available pointwise upper bound: exact on the ball models, a disc
/// search elsewhere.
fn metric_upper_value(domain: &DomainSpec, x: &CVector, v: &CVector) -> Result<f64> {
    if let Some(k) = exact::exact_metric(domain, x, v) {
        return k;
    }
    Ok(disc::search(
        domain,
        x,
        v,
        PATH_DEGREE,
        PATH_BUDGET,
        metric_lower(domain, x, v).ok(),
    )?
    .upper)
}

/// `(nodes, weights)` of the 32-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = QUADRATURE_NODES;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes.push(0.5 * (1.0 - x));
            weights.push(1.0 / ((1.0 - x * x) * dp * dp));
        }
        (nodes, weights)
    })
}

/// `∫ k(γ, γ')` along the polygon through `nodes`; `∞` if it leaves the domain.
fn polygon_length(domain: &DomainSpec, nodes: &[CVector]) -> Result<f64> {
    let (ts, ws) = gauss_legendre();
    let mut total = 0.0;
    for pair in nodes.windows(2) {
        let step = &pair[1] - &pair[0];
        if norm(&step) == 0.0 {
            continue;
        }
        for (t, w) in ts.iter().zip(ws) {
            let z = &pair[0] + step.scale(*t);
            if !domain.contains(&z) {
                return Ok(f64::INFINITY);
            }
            total += w * metric_upper_value(domain, &z, &step)?;
        }
    }
    Ok(total)
}

fn straight_polygon(x: &CVector, q: &CVector, segments: usize) -> Vec<CVector> {
    (0..=segments)
        .map(|k| x + (q - x).scale(k as f64 / segments as f64))
        .collect()
}

/// Distance bracket: the upper bound minimizes the metric integral over the
/// straight polygon and, on the ball models, the polygon inscribed in the
/// geodesic; the lower bound is the exact or enclosing-ball distance.
pub fn distance(
    domain: &DomainSpec,
    x: &CVector,
    q: &CVector,
    segments: usize,
) -> Result<MetricEstimate> {
    check_point(domain, x)?;
    check_point(domain, q)?;
    if x == q {
        return Ok(MetricEstimate::exact(0.0));
    }
    let segments = segments.max(1);
    let lower = match exact::exact_distance(domain, x, q) {
        Some(d) => d?,
        None => match domain.enclosing_ball() {
            Some((c, r)) => exact::euclidean_ball_distance(&c, r, x, q)?,
            None => 0.0,
        },
    };
    let mut upper = polygon_length(domain, &straight_polygon(x, q, segments))?;
    let ts: Vec<f64> = (0..=segments).map(|k| k as f64 / segments as f64).collect();
    if let Some(nodes) = exact::model_geodesic(domain, x, q, &ts) {
        upper = upper.min(polygon_length(domain, &nodes?)?);
    }
    Ok(MetricEstimate {
        lower,
        upper,
        witness: None,
    })
}

/// Conservative membership `x ∈ B^K(q, r)`: the distance upper bound is below `r`.
pub fn kobayashi_ball_membership(
    domain: &DomainSpec,
    q: &CVector,
    r: f64,
    x: &CVector,
) -> Result<bool> {
    if !domain.contains(x) {
        return Ok(false);
    }
    if let Some(d) = exact::exact_distance(domain, x, q) {
        return Ok(d? < r);
    }
    Ok(distance(domain, x, q, DEFAULT_SEGMENTS)?.upper < r)
}

/// Random points of the Kobayashi ball `B^K(q, radius)`. On the ball models
/// they are images of uniform points of `tanh(radius)·B`; elsewhere,
/// candidates from the Kobayashi ball of an enclosing ball are kept when the
/// distance upper bound certifies membership.
pub fn sample_kobayashi_ball<R: Rng + ?Sized>(
    domain: &DomainSpec,
    q: &CVector,
    radius: f64,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<CVector>> {
    check_point(domain, q)?;
    let n = domain.dim();
    let s = radius.tanh();
    if exact::has_exact(domain) {
        let mut out = Vec::with_capacity(samples);
        while out.len() < samples {
            let w = uniform_ball(n, s, rng);
            // walk the geodesic from q in the direction of w for distance atanh‖w‖
            let nw = norm(&w);
            if nw == 0.0 {
                out.push(q.clone());
                continue;
            }
            let y = model_ray(domain, q, &w.unscale(nw), nw.atanh())?;
            out.push(y);
        }
        return Ok(out);
    }
    let (c, r) = domain.enclosing_ball().ok_or(Error::NoEnclosingBall)?;
    let host = DomainSpec::ball(c, r);
    let mut out = Vec::with_capacity(samples);
    let mut tries = 0;
    while out.len() < samples && tries < 50 * samples.max(1) {
        tries += 1;
        let w = uniform_ball(n, s, rng);
        let nw = norm(&w);
        let y = if nw == 0.0 {
            q.clone()
        } else {
            model_ray(&host, q, &w.unscale(nw), nw.atanh())?
        };
        if kobayashi_ball_membership(domain, q, radius, &y)? {
            out.push(y);
        }
    }
    if out.is_empty() && samples > 0 {
        return Err(Error::PreconditionViolated(
            "no certified Kobayashi-ball samples".into(),
        ));
    }
    Ok(out)
}

fn model_ray(domain: &DomainSpec, q: &CVector, dir: &CVector, dist: f64) -> Result<CVector> {
    exact::model_point_at(domain, q, dir, dist).unwrap_or(Err(Error::NoEnclosingBall))
}

/// Numerical check of the nested-domain estimates
/// `d_{Ω'}(x, q) ≤ a / tanh(b − a)` and `k_{Ω'}(x, v) ≤ k_Ω(x, v) / tanh(b − a)`
/// for `Ω' ⊇ B^K_Ω(q, b)` and `a = d_Ω(x, q) < b`.
pub fn localization_check(
    domain: &DomainSpec,
    subdomain: &DomainSpec,
    q: &CVector,
    x: &CVector,
    b: f64,
    directions: usize,
    streams: &Streams,
) -> Result<Report> {
    let a = match exact::exact_distance(domain, x, q) {
        Some(d) => d?,
        None => distance(domain, x, q, DEFAULT_SEGMENTS)?.upper,
    };
    if !(a < b) {
        return Err(Error::PreconditionViolated(format!(
            "a = {a} is not below b = {b}"
        )));
    }
    let mut rng = streams.stream(0x51);
    let inclusion = sample_kobayashi_ball(domain, q, b, 256, &mut rng)?;
    if let Some(bad) = inclusion.iter().find(|y| !subdomain.contains(y)) {
        return Err(Error::PreconditionViolated(format!(
            "subdomain misses a sampled point of B^K(q, b): rho' = {:.3e}",
            subdomain.rho(bad)
        )));
    }
    let t = (b - a).tanh();
    let d_sub = match exact::exact_distance(subdomain, x, q) {
        Some(d) => d?,
        None => distance(subdomain, x, q, DEFAULT_SEGMENTS)?.upper,
    };
    let mut rep = Report::new("localization");
    rep.push(Entry::info("a", a));
    rep.push(Entry::info("b", b));
    rep.push(Entry::info("d_sub", d_sub));
    rep.push(Entry::check("distance_margin", d_sub, a / t - d_sub, 1e-6));

    let mut worst_rel = f64::INFINITY;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..directions {
        let v = gaussian_vector(domain.dim(), &mut rng);
        let k = match exact::exact_metric(domain, x, &v) {
            Some(k) => k?,
            None => metric_lower(domain, x, &v)?,
        };
        let k_sub = match exact::exact_metric(subdomain, x, &v) {
            Some(k) => k?,
            None => metric_upper(subdomain, x, &v, DEFAULT_DEGREE, DEFAULT_BUDGET)?.upper,
        };
        worst_rel = worst_rel.min((k / t - k_sub) / k);
        worst_ratio = worst_ratio.max(k_sub / k);
    }
    rep.push(Entry::check(
        "metric_margin_rel",
        worst_rel,
        worst_rel,
        1e-6,
    ));
    rep.push(Entry::info("metric_ratio_max", worst_ratio));
    rep.push(Entry::info("inclusion_samples", inclusion.len() as f64));
    Ok(rep)
}
