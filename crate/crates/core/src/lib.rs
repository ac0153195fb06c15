//! Energy-flow-assisted two-hop MIMO amplify-and-forward relaying.
//!
//! The relay harvests energy from both the source and the destination by
//! power splitting, then forwards the source signal with the harvested power.
//! The crate diagonalizes the channels, solves the relay and source power
//! allocations in alternation, evaluates rates, and drives Monte Carlo sweeps.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ao_driver;
pub mod baseline_noef;
pub mod channel_model;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod hpm_plm;
pub mod linalg;
pub mod oracles;
pub mod relay_solver;
pub mod source_solver;
pub mod table;

pub use error::{RelayError, Result};

/// Dense complex matrix used for all channel and covariance quantities.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
