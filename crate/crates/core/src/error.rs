use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("experimental row for treatment x{0} has zero total count")]
    ZeroRowTotal(usize),

    #[error("observational table has zero grand total")]
    ZeroGrandTotal,

    #[error("invalid problem space: {0}")]
    InvalidSpace(String),

    #[error("invalid probability {value} at ({row}, {col}); entries must lie in [0, 1]")]
    InvalidProbability { row: usize, col: usize, value: f64 },

    #[error("invalid dataset file: {0}")]
    DatasetFormat(String),

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("infeasible interval: lower bound {lower} (candidate {lower_witness}) exceeds upper bound {upper} (candidate {upper_witness})")]
    InfeasibleInterval {
        lower: f64,
        upper: f64,
        lower_witness: String,
        upper_witness: String,
    },

    #[error("conditioning event has probability {0}, which is indistinguishable from zero")]
    ZeroEvidenceProbability(f64),

    #[error("query has {k} counterfactual terms; the configured limit is {limit}")]
    TooManyTerms { k: usize, limit: usize },

    #[error("dataset failed validation: {0}")]
    Validation(ValidationReport),

    #[error("dataset is not binary (m = {m}, n = {n})")]
    NotBinary { m: usize, n: usize },

    #[error("linear program has {variables} variables; the budget is {budget}")]
    BudgetExceeded { variables: usize, budget: usize },

    #[error("no joint distribution of response types reproduces the dataset")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simulation retry limit of {0} attempts reached")]
    RetryLimit(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
