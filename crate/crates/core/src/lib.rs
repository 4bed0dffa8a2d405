//! Evolutionary-game model of proof-of-work mining participation.
//!
//! A population of `n` strategic miners chooses between mining and staying
//! out while `m` miners always mine. The share `x1` of strategic miners that
//! mine follows the replicator flow
//!
//! ```text
//! dx1/dt = x1 (1 - x1) / (m + n x1) * (R - d / (m + n x1))
//! ```
//!
//! where `R` is the block reward and `d` the effective difficulty. This crate
//! provides the model ([`model`]), equilibrium and bifurcation analysis
//! ([`equilibrium`]), integration and hysteresis sweeps ([`dynamics`]),
//! reward feedback design ([`controller`]), a finite-population simulator
//! ([`agents`]) and CSV I/O ([`csv_io`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod controller;
pub mod csv_io;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod model;

pub use controller::{
    ControllerSpec, EpsInterval, InfeasibilityReport, ValidationReport, Violation,
};
pub use dynamics::{RewardPolicy, SettleOutcome, SweepPoint, Trajectory};
pub use equilibrium::{
    EquilibriumReport, Region, Stability, TranscriticalCheck, TranscriticalPoint,
};
pub use error::{Error, Result};
pub use model::{MiningEnvironment, ModelParams, PopulationState, Strategy};
