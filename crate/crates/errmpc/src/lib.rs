//! Error-model-compensated model predictive control for quadruped locomotion.
//!
//! The crate combines four pieces:
//!
//! - [`armav`]: a generic multivariate ARMAV(n, m) time-series engine with
//!   least-squares estimation, F-test order selection, residual diagnostics
//!   and multi-step forecasting;
//! - [`srb`]: linearised single-rigid-body dynamics of a quadruped driven by
//!   ground reaction forces;
//! - [`qp`]: a dense active-set quadratic-program solver with the friction
//!   constraints used by the force optimiser;
//! - [`mpc`] and [`error_model`]: a condensed model-predictive controller
//!   whose state predictions are corrected by forecasts of its own recent
//!   prediction errors;
//! - [`sim`]: a nonlinear rigid-body simulator, trot gait schedule and
//!   scenario runner for exercising the controller under model mismatch.
//!
//! See the `examples/` directory for end-to-end usage, from fitting a series
//! to running a payload-disturbance experiment.

pub mod armav;
pub mod error_model;
pub mod mpc;
pub mod qp;
pub mod sim;
pub mod srb;

pub use armav::{ArmavError, ArmavModel, FitDiagnostics, InverseExpansion, SeriesWindow};
pub use error_model::{
    ErrorBuffer, ErrorModelConfig, ErrorModelManager, ErrorSample, InputAwareErrorModel,
    SelectMatrix,
};
pub use mpc::{BodyCommand, MpcConfig, MpcController, MpcError, MpcOutput};
pub use qp::{QpProblem, QpSolution, QpStatus};
pub use sim::{
    paired_compare, run_scenario, ComparisonReport, GaitSchedule, MeasurementNoise, RunMetrics,
    ScenarioConfig, ScenarioError, ScenarioRun, SimWorld,
};
pub use srb::{DiscreteDynamics, ModelParams, RobotState};
