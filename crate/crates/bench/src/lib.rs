//! Fixtures shared by the benchmarks.

use scalelab::automorphisms::orbit_to_boundary;
use scalelab::linalg::basis;
use scalelab::scaling::{Pipeline, ScalingConfig, ScalingState};
use scalelab::{CVector, DomainSpec, Result, Streams};

/// The point `0.6 e_1 + 0.3 e_2` of the unit ball and the direction
/// `e_1 + i e_2`.
pub fn ball_point(n: usize) -> (CVector, CVector) {
    let x = basis(n, 0).scale(0.6) + basis(n, 1).scale(0.3);
    let v = basis(n, 0) + basis(n, 1) * scalelab::linalg::I;
    (x, v)
}

/// Scaling state of the unit ball along the orbit `(1 − rate^j) e_1`.
pub fn ball_state(n: usize, stages: usize, rate: f64) -> Result<ScalingState> {
    let ball = DomainSpec::unit_ball(n);
    let (q, p) = (CVector::zeros(n), basis(n, 0));
    let orbit = orbit_to_boundary(&ball, &q, &p, rate, stages)?;
    let pipe = Pipeline::new(&ball, &p, &q, ScalingConfig::default())?;
    ScalingState::build(pipe, &orbit, &Streams::new(1))
}
