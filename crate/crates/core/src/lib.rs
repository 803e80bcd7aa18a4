//! Leverage-score-sampled nuclear-norm matrix completion.
//!
//! Sample the entries of a low-rank matrix with probabilities that follow
//! its row and column leverage scores, then recover it by nuclear-norm
//! minimization. Includes the two-phase procedure that estimates scores
//! from a uniform first pass, weighted nuclear-norm completion, a
//! lower-bound construction, certificate diagnostics, and an experiment
//! harness.

pub mod certify;
pub mod error;
pub mod harness;
pub mod io;
pub mod leverage;
pub mod lowerbound;
pub mod matrix;
pub mod observation;
pub mod operators;
pub mod pipelines;
pub mod sampling;
pub mod solver;
pub mod svd;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use observation::{Observation, ObservationSet};
