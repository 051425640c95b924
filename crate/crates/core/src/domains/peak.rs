use std::fmt;
use std::sync::Arc;

use super::DomainSpec;
use crate::error::{Error, Result};
use crate::linalg::{inner, norm, CVector};
use crate::report::{Entry, Report};
use crate::sampling::{uniform_ball, Streams};

/// Candidate peak function `h` at the boundary point `p`.
#[derive(Clone)]
pub struct PeakFunction {
    pub p: CVector,
    h: Arc<dyn Fn(&CVector) -> f64 + Send + Sync>,
}

impl fmt::Debug for PeakFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeakFunction(p = {:?})", self.p.as_slice())
    }
}

impl PeakFunction {
    pub fn new<F>(p: CVector, h: F) -> Self
    where
        F: Fn(&CVector) -> f64 + Send + Sync + 'static,
    {
        PeakFunction { p, h: Arc::new(h) }
    }

    /// `h(z) = Re⟨z − p, n_p⟩` with `n_p` the outer unit normal.
    pub fn linear_support(domain: &DomainSpec, p: &CVector) -> Result<Self> {
        let a = domain.defining().complex_gradient(p);
        let na = norm(&a);
        if na == 0.0 {
            return Err(Error::DegenerateInput("vanishing gradient".into()));
        }
        let normal = a.map(|c| c.conj()).unscale(na);
        let base = p.clone();
        Ok(Self::new(p.clone(), move |z: &CVector| {
            inner(&(z - &base), &normal).re
        }))
    }

    pub fn eval(&self, z: &CVector) -> f64 {
        (self.h)(z)
    }
}

/// Fraction of `|h(p)|`-tolerance used for the peak value.
const PEAK_VALUE_TOL: f64 = 1e-12;

/// Closure samples: uniform in balls of radius `R·2^{-k}` about `p`, kept when
/// `ρ ≤ 0` inside the defining neighborhood, plus `p` itself.
fn closure_samples(
    domain: &DomainSpec,
    p: &CVector,
    count: usize,
    streams: &Streams,
) -> Vec<CVector> {
    let n = domain.dim();
    let outer = match domain.enclosing_ball() {
        Some((c, r)) => norm(&(p - &c)) + r,
        None => 2.0,
    };
    let levels = 12;
    let mut rng = streams.stream(0x9ea4);
    let mut out = vec![p.clone()];
    let per_level = count.div_ceil(levels).max(1);
    let u = domain.neighborhood();
    for level in 0..levels {
        let radius = outer * 0.5f64.powi(level as i32);
        let mut kept = 0;
        let mut tries = 0;
        while kept < per_level && tries < 50 * per_level {
            tries += 1;
            let z = p + uniform_ball(n, radius, &mut rng);
            if u.contains(&z) && domain.rho(&z) <= 0.0 {
                out.push(z);
                kept += 1;
            }
        }
    }
    out
}

/// Samples the closure near `p` and reports `h(p)`, the supremum of `h` away
/// from `p`, and diameters of `V_m = {h > −1/m}` for `m = 1..=m_max`.
pub fn peak_verify(
    domain: &DomainSpec,
    p: &CVector,
    h: &PeakFunction,
    m_max: usize,
    samples: usize,
    streams: &Streams,
) -> Report {
    let mut rep = Report::new("peak");
    let hp = h.eval(p);
    rep.push(Entry::check(
        "h_at_p",
        hp.abs(),
        PEAK_VALUE_TOL - hp.abs(),
        0.0,
    ));

    let pts = closure_samples(domain, p, samples, streams);
    let outer = pts.iter().map(|z| norm(&(z - p))).fold(0.0, f64::max);
    let delta = 0.1 * outer.max(1e-12);
    let sup_off = pts
        .iter()
        .filter(|z| norm(&(*z - p)) >= delta)
        .map(|z| h.eval(z))
        .fold(f64::NEG_INFINITY, f64::max);
    // strict negativity: a zero supremum is a violation
    rep.push(Entry {
        name: "sup_off_ball".into(),
        value: sup_off,
        margin: -sup_off,
        pass: sup_off < 0.0,
    });
    rep.push(Entry::info("delta", delta));

    let values: Vec<(f64, f64)> = pts.iter().map(|z| (h.eval(z), norm(&(z - p)))).collect();
    let mut diams = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let level = -1.0 / m as f64;
        let reach = values
            .iter()
            .filter(|(v, _)| *v > level)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max);
        let diam = 2.0 * reach;
        rep.push(Entry::info(format!("diam_V_{m}"), diam));
        diams.push(diam);
    }
    let monotone = diams.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    rep.push(Entry::flag("diam_monotone", monotone));
    if let (Some(first), Some(last)) = (diams.first(), diams.last()) {
        let shrink = first - last;
        rep.push(Entry {
            name: "diam_shrinks".into(),
            value: *last,
            margin: shrink,
            pass: m_max > 1 && shrink > 0.0,
        });
    }
    rep.push(Entry::info("samples", pts.len() as f64));
    rep
}
