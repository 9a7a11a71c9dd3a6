//! Large-deviation machinery for randomly kicked dissipative systems:
//! exact finite-state computations (pressure, rate functions, equilibrium
//! states, Feynman-Kac asymptotics), brute-force oracles, reproducible
//! Monte Carlo, coupling constructions, and a 1D spectral surrogate of a
//! locally damped cubic wave equation.

pub mod chain;
pub mod config;
pub mod coupling;
pub mod engine;
pub mod instances;
pub mod error;
pub mod oracle;
pub mod mc;
pub mod measure;
pub mod metrics;
pub mod rds;
pub mod report;
pub mod rng;
pub mod wave;

pub use chain::{ChainState, FiniteMarkovKernel};
pub use error::{RaredynError, Result};
pub use measure::{integrate, DiscreteMeasure, Potential};
pub use rds::{
    empirical_measure, kick_record, simulate_stream, simulate_trajectory, ChainRds,
    EmpiricalMeasure, RdsModel, Trajectory,
};
pub use rng::KickStream;
