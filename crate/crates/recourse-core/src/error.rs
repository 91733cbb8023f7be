use thiserror::Error;

/// Crate-wide error type. Variants carry enough context (row, column,
/// line, field) to point at the offending input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {column:?} in {path}")]
    MissingColumn { path: String, column: String },
    #[error("row {row}, column {column:?}: unparsable numeric cell {value:?}")]
    BadNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column {column:?}: unknown categorical level {value:?}")]
    UnknownLevel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column {column:?}: invalid label {value:?} (expected 0 or 1)")]
    InvalidLabel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("malformed model file: {0}")]
    MalformedModel(String),
    #[error("parameter out of range: {0}")]
    InvalidParameter(String),
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:.3e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("cardinality violation: selection has {got} indices, expected {expected}")]
    CardinalityViolation { expected: usize, got: usize },
    #[error("combinatorial budget exceeded: C({n},{k}) > {budget}")]
    BudgetExceeded { n: usize, k: usize, budget: u128 },
    #[error("screening set has {got} indices, smaller than K={k}")]
    ScreeningTooSmall { k: usize, got: usize },
    #[error("no reachable favorable nodes from the input")]
    NoReachableCandidates,
    #[error("isolated input: no training node within epsilon matches the immutable features")]
    IsolatedInput,
    #[error("unreachable target node {0}")]
    UnreachableTarget(usize),
    #[error("malformed graph file at line {line}: {reason}")]
    MalformedGraph { line: usize, reason: String },
    #[error("path weight {path_weight} disagrees with shortest-path distance {dist}")]
    PathWeightMismatch { path_weight: f64, dist: f64 },
    #[error("invalid prototype: classifier labels it 0")]
    InvalidPrototype,
    #[error("input already receives the favorable label")]
    InputAlreadyFavorable,
    #[error("only {got} candidate prototypes available, need at least {need}")]
    TooFewCandidates { need: usize, got: usize },
    #[error("zero-norm direction vector for recourse {0}")]
    ZeroNormDirection(usize),
    #[error("malformed plan file: {0}")]
    MalformedPlan(String),
}

pub type Result<T> = std::result::Result<T, Error>;
