//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error enum. Variants are grouped by the operation family that
/// raises them; the payload carries enough context to report the failure
/// without access to the operands.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("breakpoint sequence is not monotone at position {index}: {prev} then {next}")]
    NonMonotoneBreakpoints { index: usize, prev: f64, next: f64 },

    #[error("breakpoint sequence must start at 0, got {got}")]
    MissingOrigin { got: f64 },

    #[error("point ({t}, {j}) is outside the arc domain")]
    OutOfDomain { t: f64, j: i64 },

    #[error("base point ({t}, {j}) is not in the forward time domain")]
    NotInForwardDomain { t: f64, j: i64 },

    #[error("memory reaches depth {max_depth} but the memory size requires at least {required}")]
    MemoryTooShort { max_depth: f64, required: f64 },

    #[error("invalid arc: {0}")]
    InvalidArc(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("radius must be nonnegative, got {rho}")]
    NegativeRadius { rho: f64 },

    #[error("arcs have different domains: {0}")]
    DomainMismatch(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("perturbation scale must lie in [0, 1], got {delta}")]
    InvalidScale { delta: f64 },

    #[error("memory arc is not in the flow set (flow margin {margin})")]
    NotInFlowSet { margin: f64 },

    #[error("initial data lies in neither the flow set nor the jump set (margins {flow_margin}, {jump_margin})")]
    InitialDataNotInCd { flow_margin: f64, jump_margin: f64 },

    #[error("system map evaluation failed at ({t}, {j}): {source}")]
    MapEvaluation {
        t: f64,
        j: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("target set is empty")]
    EmptyTarget,

    #[error("segment interior is empty after excluding boundary and exceptional points")]
    EmptyInterior,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
