//! Concept selection: morphological matrix, QFD characteristic weights,
//! Pugh screening and weighted ranking, two-axis plot data and risk scoring.

mod data;
mod morph;
mod pipeline;
mod plot;
mod pugh;
mod qfd;
mod risk;

use thiserror::Error;

pub use data::{
    bundled, parse_needs_correlation, parse_risk_register, parse_score_table, Bundled, Characteristic, ScoreTable,
};
pub use morph::{Concept, MorphMatrix};
pub use pipeline::{evaluate, EvalInputs, EvalOutput};
pub use plot::{two_axis_plot_data, PlotPoint};
pub use pugh::{pugh_rank, pugh_screen, PughMatrix, PughMode, ScreenOutcome};
pub use qfd::{qfd_weights, select_top_k, QfdInput, QfdWeights, CORRELATION_SCALE};
pub use risk::{risk_score, RiskBand, RiskItem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConceptError {
    #[error("invalid option for function {function:?}: {reason}")]
    InvalidOption { function: String, reason: String },
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("duplicate name {0:?}")]
    Duplicate(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("correlation at need {need:?}, characteristic {characteristic:?} is {value}; allowed values are 0, 1, 3, 9")]
    InvalidCorrelation {
        need: String,
        characteristic: String,
        value: f64,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("datum {datum:?} has nonzero entry for criterion {criterion:?}")]
    DatumNotZero { datum: String, criterion: String },
    #[error("screening score {value} for {concept:?}/{criterion:?} is not -1, 0 or +1")]
    InvalidScreeningScore {
        concept: String,
        criterion: String,
        value: f64,
    },
    #[error("invalid weight {value} for {name:?}; weights must be finite and > 0")]
    InvalidWeight { name: String, value: f64 },
    #[error("{op} needs a matrix in {expected} mode")]
    WrongMode { op: &'static str, expected: &'static str },
    #[error("concept keys differ between axes: {0}")]
    KeyMismatch(String),
    #[error("{field} = {value} outside 1..=5")]
    OutOfRange { field: &'static str, value: i64 },
    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },
}
