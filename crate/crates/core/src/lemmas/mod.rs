//! Numerical verification suites for the lemmas of the scaling argument:
//! nested-domain estimates, the disc lemma, convergence of ball self-maps,
//! inversion by fixed-point iteration, and the end-to-end replay on the ball.

mod disc;
mod family;
mod iteration;
mod localization;
mod theorem;

pub use disc::{
    blaschke_family, disc_lemma_check, empirical_delta, empirical_delta_with, grid_deviation,
    DiscMap, DELTA_GRID,
};
pub use family::{
    ball_convergence_check, derivative_floor_margin, FamilyMember, SelfMapFamily, BOUND_SLACK,
    ORIGIN_TOL,
};
pub use iteration::{
    derivative_deviation, invert_by_iteration, polynomial_perturbation, predicted_steps,
    surjectivity_radius, surjectivity_radius_with_tol, IterationTrace, INVERSION_TOL,
    RATIO_ALLOWANCE,
};
pub use localization::{
    localization_suite, localization_suite_with, nested_configs, nested_configs_at,
    nested_sublevels, NestedConfig, DISTANCE_TOL, METRIC_TOL,
};
pub use theorem::{c_j, main_theorem_pipeline, t_j, TheoremConfig};
