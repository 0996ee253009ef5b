//! Configuration-driven entry points for the `rodflow` binary: Eulerian and
//! Lagrangian simulation, verification of the transported-momentum identity,
//! and the non-uniform dependence experiment. Every run writes its artifacts
//! and then a `manifest.json` listing them.

pub mod commands;
pub mod config;
pub mod exit;

pub use commands::{run, Command, Outcome, RunManifest, Status};
pub use config::{Formulation, InitialData, RunConfig};
pub use exit::Failure;
