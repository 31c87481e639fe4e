use thiserror::Error;

/// Errors raised by the weighting toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch { context: &'static str, expected: (usize, usize), found: (usize, usize) },

    #[error("non-finite value in {context} at ({row}, {col})")]
    NonFinite { context: &'static str, row: usize, col: usize },

    #[error("accuracy {value} at ({row}, {col}) is outside [0, 1]")]
    AccuracyOutOfRange { row: usize, col: usize, value: f64 },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("duplicate name `{0}`")]
    DuplicateName(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("imbalance ratio undefined: class {class} has no instances")]
    UndefinedRatio { class: usize },

    #[error("ensemble size K={k} is invalid for n={n} classifiers")]
    InvalidEnsembleSize { n: usize, k: usize },

    #[error("no subset of size {k} admits weights satisfying all constraints ({tried} subsets tried)")]
    AllSubsetsInfeasible { k: usize, tried: usize },

    #[error("problem too large for enumeration: {vars} variables (limit {limit})")]
    ProblemTooLarge { vars: usize, limit: usize },

    #[error("quadratic coefficient {value} at index {index} is negative; problem is not convex")]
    NotConvex { index: usize, value: f64 },

    #[error("variable {index} has no finite upper bound; grid enumeration impossible")]
    UnboundedVariable { index: usize },

    #[error("class {class} has no true instances; recall undefined")]
    EmptyTrueClass { class: usize },

    #[error("class {class} is absent from the labels but has target {target}")]
    AbsentClass { class: usize, target: usize },

    #[error("class index {class} out of range for {m} classes")]
    UnknownClass { class: usize, m: usize },

    #[error("all accuracies are zero; normalized weights undefined")]
    ZeroAccuracy,

    #[error("class column {class} sums to zero; posterior undefined")]
    ZeroClassColumn { class: usize },

    #[error("target imbalance ratio {rho} is not reachable: {reason}")]
    UnreachableRatio { rho: f64, reason: String },

    #[error("solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
