use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::holomap::HoloMap;
use crate::linalg::{
    basis, inner, min_eigenvalue_hermitian, norm, norm_sqr, COperator, CVector, HERMITIAN_TOL,
};
use crate::report::{Entry, Report, Table};
use crate::sampling::{axis_mixed, unit_sphere, Streams};
use crate::scaling::{nonincreasing, MONOTONE_TOL};

/// Slack on the squared-norm bounds of the convergence argument.
pub const BOUND_SLACK: f64 = 1e-9;
/// Allowed `‖g_j(0)‖`; composed maps fix the origin only up to rounding.
pub const ORIGIN_TOL: f64 = 1e-9;
/// Points on the circle `{z ζ : |z| = r}` added to every sweep so that radial
/// sups are attained exactly.
const RIM_POINTS: usize = 16;

/// One member `g_j` of a family of ball self-maps with `g_j(0) = 0`.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub j: usize,
    pub map: HoloMap,
    /// Derivative floor: `dg_j(0) ≥ (1 − a_j) I`.
    pub a: f64,
}

/// Self-maps of the unit ball fixing the origin, indexed by `j`, whose
/// derivative floors `a_j` tend to zero.
#[derive(Debug, Clone)]
pub struct SelfMapFamily {
    pub dim: usize,
    /// Distinguished direction of the family (used to bias sampling toward
    /// the directions where the maps move most).
    pub axis: CVector,
    pub members: Vec<FamilyMember>,
}

impl SelfMapFamily {
    pub fn new(dim: usize, axis: CVector, members: Vec<FamilyMember>) -> Result<Self> {
        if dim == 0 || axis.len() != dim || members.iter().any(|m| m.map.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: axis.len(),
            });
        }
        Ok(SelfMapFamily {
            dim,
            axis: axis.unscale(norm(&axis).max(f64::MIN_POSITIVE)),
            members,
        })
    }

    /// `g_j = (1 − a_j) I` with `a_j = 1/j`, `j = 1..=j_max`.
    pub fn linear(dim: usize, j_max: usize) -> Self {
        let members = (1..=j_max)
            .map(|j| {
                let a = 1.0 / j as f64;
                let m = COperator::identity(dim, dim).scale(1.0 - a);
                FamilyMember {
                    j,
                    map: HoloMap::linear(m, crate::holomap::MapTag::Affine),
                    a,
                }
            })
            .collect();
        SelfMapFamily {
            dim,
            axis: basis(dim, 0),
            members,
        }
    }

    /// `g_j(x) = x · m_j(⟨x, u⟩)` with the disc automorphism-like multiplier
    /// `m(w) = ((1 − a) + a w)/(1 + (1 − a) a w)`, `a = a_j = 1/j`.
    ///
    /// `|m| ≤ 1` on the disc, so `‖g_j(x)‖ ≤ ‖x‖`; `dg_j(0) = (1 − a_j) I`
    /// exactly, and `g_j − I` is largest along `−u`.
    pub fn multiplier(dim: usize, j_max: usize) -> Self {
        let u = basis(dim, 0);
        let members = (1..=j_max)
            .map(|j| {
                let a = 1.0 / j as f64;
                let c = 1.0 - a;
                let axis = u.clone();
                let map = HoloMap::custom(dim, move |x: &CVector| {
                    let w = inner(x, &axis);
                    let m = (c + w * a) / (1.0 + w * (c * a));
                    Ok(x * m)
                });
                FamilyMember { j, map, a }
            })
            .collect();
        SelfMapFamily {
            dim,
            axis: u,
            members,
        }
    }
}

/// `min eig` of the Hermitian part of `dg(0) − (1 − a) I`.
pub fn derivative_floor_margin(dg0: &COperator, a: f64) -> f64 {
    let n = dg0.nrows();
    let d = dg0 - COperator::identity(n, n).scale(1.0 - a);
    let h = (&d + d.adjoint()).scale(0.5);
    min_eigenvalue_hermitian(&h)
}

/// Sample points of `rB`: dimension-free draws `r·U^{1/4}·(mixed direction)`
/// plus the rim `r·e^{iγ}·(±axis)`.
fn ball_samples(family: &SelfMapFamily, r: f64, samples: usize, streams: &Streams) -> Vec<CVector> {
    let (mut scalars, mut frame) = (streams.stream(0xfa01), streams.stream(0xfa02));
    let mut pts: Vec<CVector> = (0..RIM_POINTS)
        .map(|k| {
            family.axis.clone()
                * Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / RIM_POINTS as f64)
        })
        .collect();
    while pts.len() < samples.max(RIM_POINTS) {
        let rho = r * scalars.random::<f64>().powf(0.25);
        pts.push(axis_mixed(&family.axis, rho, &mut scalars, &mut frame));
    }
    pts
}

/// Sampled check that `g_j → I` uniformly on `rB`, with the intermediate
/// bounds of the slice argument.
///
/// For unit `ζ` and `|z| < 1`, let `f_j(z) = ⟨g_j(zζ), ζ⟩` and
/// `h_j(z) = g_j(zζ) − f_j(z) ζ`; with `ε_j = max |f_j(z) − z|` over the
/// sampled slices, Schwarz's lemma forces `‖h_j(z)‖² ≤ 2ε_j − ε_j²` and
/// `‖g_j(zζ) − zζ‖² ≤ 2ε_j`. Both are checked on every sample with slack
/// [`BOUND_SLACK`].
///
/// The order `dg_j(0) ≥ (1 − a_j) I` is tested on the Hermitian part of the
/// difference; members violating it raise `PreconditionViolated`.
pub fn ball_convergence_check(
    family: &SelfMapFamily,
    r: f64,
    samples: usize,
    streams: &Streams,
) -> Result<Report> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("radius {r} outside (0, 1)")));
    }
    let n = family.dim;
    let zero = CVector::zeros(n);
    for m in &family.members {
        let dg0 = m.map.jacobian(&zero)?;
        let margin = derivative_floor_margin(&dg0, m.a);
        if margin < -HERMITIAN_TOL {
            return Err(Error::PreconditionViolated(format!(
                "dg_{}(0) ≱ (1 − a_{}) I: Hermitian margin {margin:.3e}",
                m.j, m.j
            )));
        }
        let g0 = norm(&m.map.eval(&zero)?);
        if g0 > ORIGIN_TOL {
            return Err(Error::PreconditionViolated(format!(
                "g_{}(0) has norm {g0:.3e}",
                m.j
            )));
        }
    }

    let pts = ball_samples(family, r, samples, streams);
    // slices (z, ζ): ζ on the sphere, z on the disc of radius r
    let mut rng = streams.stream(0xfa03);
    let slices: Vec<(Complex64, CVector)> = pts
        .iter()
        .take(samples.clamp(1, 2000))
        .map(|x| {
            let nx = norm(x);
            let zeta = if nx > 0.0 {
                x.unscale(nx)
            } else {
                unit_sphere(n, &mut rng)
            };
            (
                Complex64::from_polar(nx, std::f64::consts::TAU * rng.random::<f64>()),
                zeta,
            )
        })
        .collect();

    struct Row {
        sup: f64,
        eps: f64,
        h_margin: f64,
        g_margin: f64,
        escape: f64,
    }
    let rows: Vec<Result<Row>> = family
        .members
        .par_iter()
        .map(|m| {
            let mut sup: f64 = 0.0;
            let mut escape: f64 = 0.0;
            for x in &pts {
                let gx = m.map.eval(x)?;
                sup = sup.max(norm(&(&gx - x)));
                escape = escape.max(norm(&gx) - 1.0);
            }
            let mut vals = Vec::with_capacity(slices.len());
            let mut eps: f64 = 0.0;
            for (z, zeta) in &slices {
                let zz = zeta * *z;
                let g = m.map.eval(&zz)?;
                let f = inner(&g, zeta);
                eps = eps.max((f - z).norm());
                let h = &g - zeta * f;
                vals.push((norm_sqr(&h), norm_sqr(&(&g - &zz))));
            }
            let h_margin = vals
                .iter()
                .map(|(h2, _)| 2.0 * eps - eps * eps + BOUND_SLACK - h2)
                .fold(f64::INFINITY, f64::min);
            let g_margin = vals
                .iter()
                .map(|(_, g2)| 2.0 * eps + BOUND_SLACK - g2)
                .fold(f64::INFINITY, f64::min);
            Ok(Row {
                sup,
                eps,
                h_margin,
                g_margin,
                escape,
            })
        })
        .collect();
    let rows: Vec<Row> = rows.into_iter().collect::<Result<_>>()?;

    let mut rep = Report::new("ball_convergence");
    let mut table = Table::new("ball_convergence", &["j", "a_j", "sup_deviation", "eps_j"]);
    for (m, row) in family.members.iter().zip(&rows) {
        table.push(vec![m.j as f64, m.a, row.sup, row.eps]);
    }
    let sups: Vec<f64> = rows.iter().map(|r| r.sup).collect();
    rep.push(Entry::info("radius", r));
    rep.push(Entry::info("samples", pts.len() as f64));
    rep.push(Entry::flag(
        "sup_monotone",
        nonincreasing(&sups, MONOTONE_TOL),
    ));
    if let (Some(first), Some(last)) = (sups.first(), sups.last()) {
        rep.push(Entry::info("sup_first", *first));
        rep.push(Entry::info("sup_final", *last));
    }
    let escape = rows
        .iter()
        .map(|r| r.escape)
        .fold(f64::NEG_INFINITY, f64::max);
    rep.push(Entry::check("image_in_ball", escape, -escape, ORIGIN_TOL));
    let h_margin = rows
        .iter()
        .map(|r| r.h_margin)
        .fold(f64::INFINITY, f64::min);
    let g_margin = rows
        .iter()
        .map(|r| r.g_margin)
        .fold(f64::INFINITY, f64::min);
    rep.push(Entry::check("h_bound_margin", h_margin, h_margin, 0.0));
    rep.push(Entry::check("g_bound_margin", g_margin, g_margin, 0.0));
    rep.tables.push(table);
    Ok(rep)
}
