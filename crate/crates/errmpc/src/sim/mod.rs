//! Closed-loop simulation harness.
//!
//! Everything needed to exercise the controller against a plant it does
//! not perfectly know: a nonlinear rigid-body truth model ([`world`]), a
//! periodic gait schedule ([`gait`]), per-tick telemetry with summary
//! statistics ([`telemetry`]) and scripted experiments with paired
//! with/without-compensation comparison ([`scenario`]).

pub mod gait;
pub mod scenario;
pub mod telemetry;
pub mod world;

pub use gait::GaitSchedule;
pub use scenario::{
    paired_compare, run_scenario, ComparisonReport, PairedRuns, ScenarioConfig, ScenarioError,
    ScenarioRun,
};
pub use telemetry::{compute_metrics, telemetry_to_csv, RunMetrics, SolveLabel, TelemetryRecord};
pub use world::{MeasurementNoise, SimWorld};
