use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // linear algebra
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("singular operator: {0}")]
    SingularOperator(String),
    #[error("operators not comparable: {0}")]
    NotComparable(String),

    // domains
    #[error("point outside the defining neighborhood")]
    OutsideNeighborhood,
    #[error("not a boundary point: rho = {0:.3e}")]
    NotBoundaryPoint(f64),
    #[error("ray left the defining neighborhood before reaching the boundary")]
    NoBoundaryHit,
    #[error("not strongly pseudoconvex: Levi minimum {0:.3e}")]
    NotStronglyPseudoconvex(f64),

    // kobayashi
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("no admissible disc through the point in the requested direction")]
    NoAdmissibleDisc,
    #[error("no enclosing ball known for this domain")]
    NoEnclosingBall,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    // automorphisms
    #[error("center outside the unit ball: |a| = {0}")]
    OutOfBall(f64),
    #[error("evaluation at a pole")]
    PoleHit,
    #[error("domain has no automorphism factory: {0}")]
    UnsupportedDomain(String),
    #[error("inverse did not converge: residual {0:.3e}")]
    InverseFailed(f64),

    // scaling
    #[error("tangent plane degenerate with respect to e1")]
    DegenerateTangent,
    #[error("nonpositive dilation radius {0}")]
    NonpositiveRadius(f64),
    #[error("sampled point escaped the normalization neighborhood at stage {stage}")]
    DomainEscape { stage: usize },
    #[error("singular differential: {0}")]
    SingularDifferential(String),

    // fixed-point inversion
    #[error("contraction ratio {ratio:.4} exceeds allowance {allowed:.4}")]
    ContractionFailure { ratio: f64, allowed: f64 },
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
}
