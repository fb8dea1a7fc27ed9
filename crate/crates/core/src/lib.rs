//! Monte Carlo simulation of quantum state filtering from a continuous weak
//! measurement record that has been digitised to one bit per time step.
//!
//! A "true" system is integrated with a stochastic master equation and
//! emits a measurement record; a filter reconstructs the state from that
//! record (full analog or one-bit), optionally steering both with feedback.
//! Ensembles of trajectories are reduced to time-gridded statistics of
//! purity, fidelity and, for two qubits, classical correlations and discord.

// `!(x > 0.0)` is deliberate: it rejects NaN along with the bad values.
// The fixed-size matrix kernels read better as index loops.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod feedback;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod obr;
pub mod output;
pub mod presets;
pub mod stream;
pub mod validate;

pub use error::{Error, Result};
