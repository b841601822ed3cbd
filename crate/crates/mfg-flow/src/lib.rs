//! Finite-state mean-field games: a forward-backward solver and an
//! operator-learning pipeline for the equilibrium value function.
//!
//! The crate has three layers:
//!
//! * [`model`], [`types`], [`models`] — the game contract (costs,
//!   Hamiltonian, optimal rate selector) and the two built-in benchmark
//!   games: a d-state quadratic game and a 4-state cybersecurity game.
//! * [`solver`] — damped Picard iteration on the time-discretized
//!   forward-backward system, plus distribution recovery from an
//!   externally supplied value function.
//! * [`nn`], [`pipeline`] — a from-scratch ReLU network with manual
//!   backpropagation and the sampling / training / evaluation pipeline
//!   that learns the map from (time, initial distribution, terminal-cost
//!   parameter) to the equilibrium value function.
//!
//! The `mfg-flow` binary exposes the pipeline as subcommands; see the
//! repository README.

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use model::{discrete_gradient, extended_hamiltonian, MfgModel};
pub use solver::{picard_solve, DiscretizedSolution, PicardConfig, PicardOutcome};
pub use types::{ActionBounds, ParamBox, SimplexDist, StateSpace, TimeGrid};
