//! Spectral and flow-map solvers for the periodic hyperelastic rod equation
//!
//! ```text
//! u_t - u_txx + 3 u u_x = γ (2 u_x u_xx + u u_xxx)
//! ```
//!
//! in the rescaled Eulerian form `v_t + v v_x = B(v, v)` and in the
//! Lagrangian (flow-map) form `φ_tt = B(φ_t∘φ⁻¹, φ_t∘φ⁻¹)∘φ`.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

pub mod diffeo;
pub mod config;
pub mod conservation;
pub mod error;
pub mod eulerian;
pub mod grid;
pub mod interp;
pub mod io;
pub mod lagrangian;
pub mod nonuniform;
pub mod rk4;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction};
pub use interp::EvalMethod;
pub use spectral::{SobolevIndex, Spectrum};
pub use diffeo::{compose, invert_diffeo, Diffeo};
pub use config::SolverConfig;
pub use eulerian::{b_operator, eulerian_rhs, integrate_eulerian, Trajectory};
pub use lagrangian::{exp_map, integrate_spray, FlowState, FlowTrajectory};
pub use nonuniform::{run_experiment, ExperimentConfig, ExperimentReport};
