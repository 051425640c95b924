use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::holomap::HoloMap;
use crate::linalg::{norm, op_norm, singular_range, COperator, CVector};
use crate::report::{Entry, Report};
use crate::sampling::{axis_mixed, Streams};

/// Allowance of the measured contraction ratio over the nominal `ε`.
pub const RATIO_ALLOWANCE: f64 = 0.05;
/// Relative slack on the geometric envelope `ε^k ‖y_1 − y_0‖`.
pub const ENVELOPE_SLACK: f64 = 1e-6;
/// Points used to estimate `sup ‖dψ − I‖` on a ball.
pub const DERIVATIVE_SAMPLES: usize = 1000;
/// Default residual tolerance of the surjectivity sweep.
pub const INVERSION_TOL: f64 = 1e-10;
/// Hard cap on iterations, whatever the predicted count.
const MAX_ITERATIONS: usize = 200;

/// History of the fixed-point iteration `y_k = x + y_{k−1} − ψ(y_{k−1})`.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iterates: Vec<CVector>,
    /// `‖ψ(y_k) − x‖`, which equals the next step length `‖y_{k+1} − y_k‖`.
    pub residuals: Vec<f64>,
    /// Largest measured step ratio `‖y_{k+1} − y_k‖ / ‖y_k − y_{k−1}‖`.
    pub ratio: f64,
    /// Predicted bound on the number of steps.
    pub step_bound: usize,
    /// Whether every step stayed under `ε^k ‖y_1 − y_0‖ (1 + slack)`.
    pub envelope_ok: bool,
}

impl IterationTrace {
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn solution(&self) -> &CVector {
        self.iterates
            .last()
            .expect("trace holds the starting point")
    }

    pub fn final_residual(&self) -> f64 {
        *self
            .residuals
            .last()
            .expect("trace holds the starting residual")
    }
}

/// `ceil(log(tol/‖y_1 − y_0‖)/log ε) + 2`, at least 1.
pub fn predicted_steps(first_step: f64, tol: f64, eps: f64) -> usize {
    if first_step <= tol {
        return 1;
    }
    ((tol / first_step).ln() / eps.ln()).ceil().max(0.0) as usize + 2
}

/// Solves `ψ(y) = x` by the iteration `y_0 = x`, `y_k = x + y_{k−1} − ψ(y_{k−1})`,
/// which contracts with ratio `sup ‖dψ − I‖ < ε` on `(1 + 2ε) r B`.
///
/// Checks `‖x‖ < r` and `(1 + 2ε) r < 1`; the derivative bound itself is
/// sampled by [`derivative_deviation`] (see [`surjectivity_radius`]), while
/// here every measured step ratio is held to `ε +` [`RATIO_ALLOWANCE`].
pub fn invert_by_iteration(
    psi: &HoloMap,
    x: &CVector,
    r: f64,
    eps: f64,
    tol: f64,
) -> Result<IterationTrace> {
    if !(eps > 0.0 && eps < 1.0) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < ε < 1 and tol > 0, got ε = {eps}, tol = {tol}"
        )));
    }
    if !(norm(x) < r) || !((1.0 + 2.0 * eps) * r < 1.0) {
        return Err(Error::PreconditionViolated(format!(
            "need ‖x‖ < r and (1 + 2ε) r < 1: ‖x‖ = {}, r = {r}",
            norm(x)
        )));
    }
    let allowed = eps + RATIO_ALLOWANCE;
    let mut iterates = vec![x.clone()];
    let mut residuals = vec![norm(&(psi.eval(x)? - x))];
    let first = residuals[0];
    let step_bound = predicted_steps(first, tol, eps);
    let mut ratio: f64 = 0.0;
    let mut envelope_ok = true;
    let mut y = x.clone();
    let mut k = 0;
    while residuals[k] > tol {
        if k >= MAX_ITERATIONS {
            return Err(Error::NonConvergence(k));
        }
        let step = x - psi.eval(&y)?;
        y += step;
        let res = norm(&(psi.eval(&y)? - x));
        iterates.push(y.clone());
        residuals.push(res);
        k += 1;
        // residual k is the length of step k + 1; steps below the tolerance
        // are at the evaluation floor of ψ and carry no contraction information
        if res > tol {
            ratio = ratio.max(res / residuals[k - 1]);
            if ratio > allowed {
                return Err(Error::ContractionFailure { ratio, allowed });
            }
            if res > eps.powi(k as i32) * first * (1.0 + ENVELOPE_SLACK) {
                envelope_ok = false;
            }
        }
    }
    Ok(IterationTrace {
        iterates,
        residuals,
        ratio,
        step_bound,
        envelope_ok,
    })
}

/// Sampled `sup ‖dψ(y) − I‖` over `radius·B`.
pub fn derivative_deviation(
    psi: &HoloMap,
    axis: &CVector,
    radius: f64,
    samples: usize,
    streams: &Streams,
) -> Result<f64> {
    let n = psi.dim();
    let id = COperator::identity(n, n);
    let (mut scalars, mut frame) = (streams.stream(0x1d01), streams.stream(0x1d02));
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let rho = radius * scalars.random::<f64>().powf(0.25);
        let y = axis_mixed(axis, rho, &mut scalars, &mut frame);
        worst = worst.max(op_norm(&(psi.jacobian(&y)? - &id)));
    }
    Ok(worst)
}

/// Sampled surjectivity `rB ⊂ ψ(B)` and injectivity of `ψ` on `rB`.
///
/// `samples` targets of `rB` are inverted with [`invert_by_iteration`]
/// (errors propagate); `samples` pairs of `rB` give the injectivity margin
/// `min ‖ψ(u) − ψ(v)‖ / ‖u − v‖`, checked against `1 − ε`. Each pair
/// contributes also its infinitesimal limit, the least singular value of
/// `dψ(u)`, so the margin does not hinge on random pairs happening to align
/// with the worst direction, which becomes rarer as the dimension grows. Sampling is
/// biased along `axis`, the direction in which `ψ` departs from the identity.
pub fn surjectivity_radius(
    psi: &HoloMap,
    axis: &CVector,
    r: f64,
    eps: f64,
    samples: usize,
    streams: &Streams,
) -> Result<Report> {
    surjectivity_radius_with_tol(psi, axis, r, eps, samples, INVERSION_TOL, streams)
}

/// [`surjectivity_radius`] with residual tolerance `tol`, for maps whose
/// evaluation carries more rounding error than [`INVERSION_TOL`].
pub fn surjectivity_radius_with_tol(
    psi: &HoloMap,
    axis: &CVector,
    r: f64,
    eps: f64,
    samples: usize,
    tol: f64,
    streams: &Streams,
) -> Result<Report> {
    let dev = derivative_deviation(
        psi,
        axis,
        (1.0 + 2.0 * eps) * r,
        DERIVATIVE_SAMPLES,
        streams,
    )?;
    let (mut scalars, mut frame) = (streams.stream(0x5e01), streams.stream(0x5e02));
    let mut draw = |scale: f64| {
        let rho = scale * scalars.random::<f64>().powf(0.25);
        axis_mixed(axis, rho, &mut scalars, &mut frame)
    };

    let mut max_steps = 0usize;
    let mut max_ratio: f64 = 0.0;
    let mut max_residual: f64 = 0.0;
    let mut envelope = true;
    let mut over_bound = 0usize;
    for _ in 0..samples {
        // strictly inside rB
        let x = draw(r * (1.0 - 1e-12));
        let t = invert_by_iteration(psi, &x, r, eps, tol)?;
        max_steps = max_steps.max(t.steps());
        max_ratio = max_ratio.max(t.ratio);
        max_residual = max_residual.max(t.final_residual());
        envelope &= t.envelope_ok;
        if t.steps() > t.step_bound {
            over_bound += 1;
        }
    }

    let mut injectivity = f64::INFINITY;
    for _ in 0..samples {
        let (u, v) = (draw(r), draw(r));
        injectivity = injectivity.min(singular_range(&psi.jacobian(&u)?).0);
        let d = norm(&(&u - &v));
        if d > 1e-9 {
            injectivity = injectivity.min(norm(&(psi.eval(&u)? - psi.eval(&v)?)) / d);
        }
    }

    let mut rep = Report::new("surjectivity");
    rep.push(Entry::info("radius", r));
    rep.push(Entry::info("eps", eps));
    rep.push(Entry::info("tol", tol));
    rep.push(Entry::check("derivative_deviation", dev, eps - dev, 0.0));
    rep.push(Entry::info("targets", samples as f64));
    rep.push(Entry::info("max_steps", max_steps as f64));
    rep.push(Entry::check(
        "steps_over_bound",
        over_bound as f64,
        -(over_bound as f64),
        0.0,
    ));
    rep.push(Entry::check(
        "max_ratio",
        max_ratio,
        eps + RATIO_ALLOWANCE - max_ratio,
        0.0,
    ));
    rep.push(Entry::check(
        "max_residual",
        max_residual,
        tol - max_residual,
        0.0,
    ));
    rep.push(Entry::flag("geometric_envelope", envelope));
    rep.push(Entry::check(
        "injectivity_margin",
        injectivity,
        injectivity - (1.0 - eps),
        0.0,
    ));
    Ok(rep)
}

/// `ψ(z) = z + γ ⟨z, u⟩^m w`: a polynomial perturbation of the identity with
/// `‖dψ(z) − I‖ = γ m |⟨z, u⟩|^{m−1} ‖w‖`.
pub fn polynomial_perturbation(u: &CVector, w: &CVector, gamma: f64, power: i32) -> HoloMap {
    let (u, w) = (u.clone(), w.clone());
    HoloMap::custom(u.len(), move |z: &CVector| {
        let s = crate::linalg::inner(z, &u).powi(power);
        Ok(z + &w * (s * Complex64::new(gamma, 0.0)))
    })
}
