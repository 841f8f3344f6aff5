use thiserror::Error;

use crate::barycenter::BarycenterSolution;

/// Which standing assumption on the cost profile failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AssumptionClause {
    /// `h(0) = 0`.
    H1,
    /// `h(t)/t -> 0` as `t -> 0`.
    H2,
    /// `h' > 0` and `h'' > 0` on `(0, inf)`.
    H3,
}

impl std::fmt::Display for AssumptionClause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AssumptionClause::H1 => "H1",
            AssumptionClause::H2 => "H2",
            AssumptionClause::H3 => "H3",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {coords:?} is not a valid point of the {chart} chart: {reason}")]
    ChartMembership {
        chart: String,
        coords: Vec<f64>,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("points are on (or within tolerance of) each other's cut locus: distance {distance} vs injectivity radius {radius}")]
    CutLocus { distance: f64, radius: f64 },

    #[error("distance gradient/Hessian is undefined on the diagonal")]
    Diagonal,

    #[error("cost profile violates {clause} at t = {witness}: {detail}")]
    AssumptionViolation {
        clause: AssumptionClause,
        witness: f64,
        detail: String,
    },

    #[error("cost profile violates the standing assumptions (h'(0) != 0); only the counterexample path may use it")]
    ProfileViolatesAssumptions,

    #[error("barycenter descent did not converge (best residual {})", best.grad_residual)]
    NonConvergence { best: Box<BarycenterSolution> },

    #[error("linear program did not terminate within {iterations} pivots")]
    LpIterationLimit { iterations: usize },

    #[error("instance has {tuples} index tuples, above the limit of {limit}")]
    SizeLimit { tuples: usize, limit: usize },

    #[error("empty point set")]
    EmptySet,

    #[error("injectivity violated: tuples {first:?} and {second:?} share a barycenter but their configurations differ by {distance:e}")]
    InjectivityViolation {
        first: Vec<usize>,
        second: Vec<usize>,
        distance: f64,
    },

    #[error("|V| = {norm} exceeds h'(domain_max) = {limit}")]
    InvDerivOverflow { norm: f64, limit: f64 },

    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("region violates the collision constraint: {0}")]
    RegionConstraint(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
