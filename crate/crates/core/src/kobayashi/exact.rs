//! Closed-form Kobayashi metric and distance on the ball models: the unit
//! ball, Euclidean balls, Kobayashi balls of the unit ball and (through the
//! Cayley transform) the Siegel domain.

use crate::automorphisms::{cayley, Mobius};
use crate::domains::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::holomap::Holomorphic;
use crate::linalg::{inner, norm_sqr, CVector};

/// `u(t) = ½ ln((1+t)/(1−t)) = d_Δ(0, t)` for `t ∈ [0, 1)`.
pub fn poincare_u(t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("u(t) needs 0 ≤ t < 1, got {t}")));
    }
    Ok(t.atanh())
}

/// `u^{-1}(s) = tanh s` for `s ≥ 0`.
pub fn poincare_u_inv(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::OutOfRange(format!("u^-1(s) needs s ≥ 0, got {s}")));
    }
    Ok(s.tanh())
}

fn check_in_ball(x: &CVector) -> Result<f64> {
    let x2 = norm_sqr(x);
    if x2 >= 1.0 {
        return Err(Error::OutOfRange(format!(
            "point outside the unit ball: |x| = {}",
            x2.sqrt()
        )));
    }
    Ok(x2)
}

/// `k_B(x, v) = sqrt(‖v‖²/(1−‖x‖²) + |⟨v, x⟩|²/(1−‖x‖²)²)`.
pub fn ball_metric(x: &CVector, v: &CVector) -> Result<f64> {
    let x2 = check_in_ball(x)?;
    let d = 1.0 - x2;
    Ok((norm_sqr(v) / d + inner(v, x).norm_sqr() / (d * d)).sqrt())
}

/// `d_B(x, y) = atanh ‖φ_x(y)‖`, evaluated through
/// `1 − ‖φ_x(y)‖² = (1−‖x‖²)(1−‖y‖²)/|1−⟨y, x⟩|²` to keep accuracy near the
/// sphere. The complementary numerator `‖y−x‖² − Σ_{i<j}|x_i d_j − x_j d_i|²`
/// (Lagrange identity, `d = y − x`) keeps accuracy for nearby points.
pub fn ball_distance(x: &CVector, y: &CVector) -> Result<f64> {
    let x2 = check_in_ball(x)?;
    let y2 = check_in_ball(y)?;
    let den = (crate::linalg::ONE - inner(y, x)).norm_sqr();
    let d = y - x;
    let mut wedge = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            wedge += (x[i] * d[j] - x[j] * d[i]).norm_sqr();
        }
    }
    let s2 = ((norm_sqr(&d) - wedge) / den).clamp(0.0, 1.0);
    let delta = ((1.0 - x2) * (1.0 - y2) / den).min(1.0);
    let s = s2.sqrt();
    if s < 0.5 {
        return Ok(s.atanh());
    }
    // atanh s = ln((1+s)/√δ)
    Ok(((1.0 + s) / delta.sqrt()).ln())
}

/// Holomorphic chart onto the unit ball for the ball models.
enum Chart {
    Scaled { center: CVector, radius: f64 },
    Kobayashi { mobius: Mobius, s: f64 },
    Siegel,
}

fn chart(domain: &DomainSpec) -> Option<Chart> {
    match domain.kind() {
        DomainKind::Ball { center, radius } => Some(Chart::Scaled {
            center: center.clone(),
            radius: *radius,
        }),
        DomainKind::KobayashiBall { center, radius } => Some(Chart::Kobayashi {
            mobius: Mobius::new(center.clone()).ok()?,
            s: radius.tanh(),
        }),
        DomainKind::Siegel => Some(Chart::Siegel),
        _ => None,
    }
}

impl Chart {
    fn point(&self, x: &CVector) -> Result<CVector> {
        match self {
            Chart::Scaled { center, radius } => Ok((x - center).unscale(*radius)),
            Chart::Kobayashi { mobius, s } => Ok(mobius.eval(x)?.unscale(*s)),
            Chart::Siegel => cayley(x.len())?.0.eval(x),
        }
    }

    fn push(&self, x: &CVector, v: &CVector) -> Result<(CVector, CVector)> {
        match self {
            Chart::Scaled { radius, .. } => Ok((self.point(x)?, v.unscale(*radius))),
            Chart::Kobayashi { mobius, s } => {
                Ok((self.point(x)?, (mobius.jacobian(x)? * v).unscale(*s)))
            }
            Chart::Siegel => {
                let psi = cayley(x.len())?.0;
                Ok((psi.eval(x)?, psi.jacobian(x)? * v))
            }
        }
    }

    fn unpoint(&self, y: &CVector) -> Result<CVector> {
        match self {
            Chart::Scaled { center, radius } => Ok(center + y.scale(*radius)),
            Chart::Kobayashi { mobius, s } => mobius.eval(&y.scale(*s)),
            Chart::Siegel => cayley(y.len())?.1.eval(y),
        }
    }
}

/// Point at parameter `t ∈ [0, 1]` of the unit-ball geodesic from `a` to `b`:
/// `φ_a(tanh(t·D) w)` with `D = d_B(a, b)` and `w = φ_a(b)/‖φ_a(b)‖`.
pub fn ball_geodesic(a: &CVector, b: &CVector, t: f64) -> Result<CVector> {
    let m = Mobius::new(a.clone())?;
    let w = m.eval(b)?;
    let nw = crate::linalg::norm(&w);
    if nw == 0.0 {
        return Ok(a.clone());
    }
    let d = ball_distance(a, b)?;
    m.eval(&w.scale((t * d).tanh() / nw))
}

/// Points `γ(t)` of the geodesic of a ball model from `x` to `y`.
pub fn model_geodesic(
    domain: &DomainSpec,
    x: &CVector,
    y: &CVector,
    ts: &[f64],
) -> Option<Result<Vec<CVector>>> {
    let c = chart(domain)?;
    let run = || -> Result<Vec<CVector>> {
        let (a, b) = (c.point(x)?, c.point(y)?);
        ts.iter()
            .map(|&t| c.unpoint(&ball_geodesic(&a, &b, t)?))
            .collect()
    };
    Some(run())
}

/// Point of a ball model at distance `dist` from `q`, leaving along the unit
/// chart direction `dir`: the image of `tanh(dist)·dir` under the chart
/// automorphism taking `0` to `q`. `None` off the ball models.
pub fn model_point_at(
    domain: &DomainSpec,
    q: &CVector,
    dir: &CVector,
    dist: f64,
) -> Option<Result<CVector>> {
    let c = chart(domain)?;
    let run = || -> Result<CVector> {
        let m = Mobius::new(c.point(q)?)?;
        c.unpoint(&m.eval(&dir.scale(dist.tanh()))?)
    };
    Some(run())
}

/// Whether [`exact_metric`] and [`exact_distance`] have a closed form for `domain`.
pub fn has_exact(domain: &DomainSpec) -> bool {
    chart(domain).is_some()
}

/// Exact `k_Ω(x, v)` on the ball models, `None` elsewhere.
pub fn exact_metric(domain: &DomainSpec, x: &CVector, v: &CVector) -> Option<Result<f64>> {
    let c = chart(domain)?;
    Some(c.push(x, v).and_then(|(y, w)| ball_metric(&y, &w)))
}

/// Exact `d_Ω(x, y)` on the ball models, `None` elsewhere.
pub fn exact_distance(domain: &DomainSpec, x: &CVector, y: &CVector) -> Option<Result<f64>> {
    let c = chart(domain)?;
    Some(c.point(x).and_then(|a| ball_distance(&a, &c.point(y)?)))
}

/// Metric of the Euclidean ball `B(c, R)`.
pub fn euclidean_ball_metric(
    center: &CVector,
    radius: f64,
    x: &CVector,
    v: &CVector,
) -> Result<f64> {
    ball_metric(&(x - center).unscale(radius), &v.unscale(radius))
}

/// Distance of the Euclidean ball `B(c, R)`.
pub fn euclidean_ball_distance(
    center: &CVector,
    radius: f64,
    x: &CVector,
    y: &CVector,
) -> Result<f64> {
    ball_distance(&(x - center).unscale(radius), &(y - center).unscale(radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automorphisms::{ball_mobius, siegel_interior};
    use crate::linalg::{basis, norm};
    use crate::sampling::{gaussian_vector, uniform_ball, Streams};

    #[test]
    fn poincare_u_values() {
        assert_eq!(poincare_u(0.0).unwrap(), 0.0);
        assert!((poincare_u(0.5).unwrap() - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((poincare_u(0.5).unwrap() - 0.549306).abs() < 1e-6);
        assert!((poincare_u(2f64.tanh()).unwrap() - 2.0).abs() < 1e-12);
        for t in [0.0, 0.1, 0.5, 0.9, 0.999] {
            assert!((poincare_u_inv(poincare_u(t).unwrap()).unwrap() - t).abs() < 1e-12);
        }
        assert!(matches!(poincare_u(1.0), Err(Error::OutOfRange(_))));
        assert!(matches!(poincare_u(-0.1), Err(Error::OutOfRange(_))));
        assert!(matches!(poincare_u_inv(-1.0), Err(Error::OutOfRange(_))));
        let mut prev = -1.0;
        for k in 0..100 {
            let u = poincare_u(k as f64 / 100.0).unwrap();
            assert!(u > prev);
            prev = u;
        }
    }

    #[test]
    fn ball_metric_closed_forms() {
        let v = basis(3, 0);
        assert!((ball_metric(&CVector::zeros(3), &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((ball_metric(&basis(3, 0).scale(0.5), &v).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        // tangential direction at 0.5 e1: 1/√(1 − 1/4)
        let t = ball_metric(&basis(3, 0).scale(0.5), &basis(3, 1)).unwrap();
        assert!((t - 1.0 / 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ball_distance_along_axis() {
        for j in 2..40 {
            let t = 1.0 - 1.0 / j as f64;
            let d = ball_distance(&basis(4, 0).scale(t), &CVector::zeros(4)).unwrap();
            assert!((d - 0.5 * (2.0 * j as f64 - 1.0).ln()).abs() < 1e-12);
        }
        let x = basis(2, 1).scale(0.3);
        assert_eq!(ball_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn metric_is_infinitesimal_distance() {
        let s = Streams::new(11);
        let mut rng = s.stream(0);
        for _ in 0..50 {
            let x = uniform_ball(3, 0.9, &mut rng);
            let v = gaussian_vector(3, &mut rng);
            let h = 1e-6;
            let d = ball_distance(&x, &(&x + v.scale(h))).unwrap() / h;
            let k = ball_metric(&x, &v).unwrap();
            assert!((d - k).abs() < 1e-4 * k);
        }
    }

    #[test]
    fn mobius_invariance() {
        let s = Streams::new(12);
        let mut rng = s.stream(0);
        for _ in 0..100 {
            let a = uniform_ball(3, 0.9, &mut rng);
            let m = ball_mobius(&a).unwrap();
            let x = uniform_ball(3, 0.9, &mut rng);
            let v = gaussian_vector(3, &mut rng);
            let k0 = ball_metric(&x, &v).unwrap();
            let k1 = ball_metric(&m.eval(&x).unwrap(), &(m.jacobian(&x).unwrap() * &v)).unwrap();
            assert!((k0 - k1).abs() < 1e-9 * k0);
        }
    }

    #[test]
    fn nested_kobayashi_ball_chart() {
        let q = basis(2, 0).scale(0.4);
        let kb = DomainSpec::kobayashi_ball(&q, 1.5).unwrap();
        // distance to the centre is rescaled by tanh R
        let s = Streams::new(13);
        let mut rng = s.stream(0);
        for _ in 0..50 {
            let w = uniform_ball(2, 0.9 * 1.5f64.tanh(), &mut rng);
            let x = ball_mobius(&q).unwrap().eval(&w).unwrap();
            assert!(kb.contains(&x));
            let d = exact_distance(&kb, &x, &q).unwrap().unwrap();
            let expect = (norm(&w) / 1.5f64.tanh()).atanh();
            assert!((d - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn siegel_metric_via_cayley() {
        let sg = DomainSpec::siegel(3);
        let s = Streams::new(14);
        let mut rng = s.stream(0);
        for _ in 0..20 {
            let x = siegel_interior(3, &mut rng);
            let v = gaussian_vector(3, &mut rng);
            let k = exact_metric(&sg, &x, &v).unwrap().unwrap();
            // half-plane check along e1 at x' = 0: 1/(2 Re x1)
            let mut x0 = x.clone();
            for k in 1..3 {
                x0[k] = crate::linalg::ZERO;
            }
            let k1 = exact_metric(&sg, &x0, &basis(3, 0)).unwrap().unwrap();
            assert!((k1 - 1.0 / (2.0 * x0[0].re)).abs() < 1e-12 * k1);
            assert!(k > 0.0);
        }
    }
}
