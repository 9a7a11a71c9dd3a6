//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RaredynError {
    #[error("step map produced a non-finite state at step {step}")]
    NumericalBlowup { step: usize },

    #[error("numerical blowup at time {time:.6}: {what}")]
    WaveBlowup { time: f64, what: String },

    #[error("empty trajectory: empirical measure needs at least one step")]
    EmptyTrajectory,

    #[error("non-finite value encountered in {context}")]
    NonFiniteValue { context: String },

    #[error("metric is degenerate: atoms {a} and {b} are distinct but at distance 0")]
    MetricDegenerate { a: usize, b: usize },

    #[error("McShane extension requires a nonempty subset")]
    EmptySubset,

    #[error("kernel is not irreducible; strongly connected classes: {classes:?}")]
    NotIrreducible { classes: Vec<Vec<usize>> },

    #[error("Perron eigenvalue is not simple in modulus (periodic class)")]
    PeriodicSpectrum,

    #[error("kernel is not mixing: {reason}")]
    NotMixing { reason: String },

    #[error("measure is not a probability measure: {reason}")]
    InvalidMeasure { reason: String },

    #[error("level-1 constraint infeasible: p={p} outside [{lo}, {hi}]")]
    Infeasible { p: f64, lo: f64, hi: f64 },

    #[error("horizon must be at least 1")]
    InvalidHorizon,

    #[error("exact computation too large: {what}")]
    TooLarge { what: String },

    #[error("linear solve failed: {what}")]
    SolveFailed { what: String },

    #[error("model does not support this diagnostic: {what}")]
    Unsupported { what: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("config parse error at line {line}: {what}")]
    ConfigParse { line: usize, what: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RaredynError>;
