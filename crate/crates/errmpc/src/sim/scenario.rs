//! Scenario configuration and the closed-loop runner.
//!
//! A scenario bundles everything a run needs: true vs. modelled mass,
//! payload drops, gait, noise, controller tuning and the error-model
//! schedule. Runs are deterministic per seed; the measurement stream is
//! the only consumer of randomness, so toggling compensation on the same
//! seed replays the identical disturbance sequence.

use crate::error_model::{
    static_input_baseline, ErrorModelConfig, ErrorModelManager, ErrorSample,
};
use crate::mpc::{BodyCommand, MpcConfig, MpcController, MpcError};
use crate::qp::QpStatus;
use crate::sim::gait::GaitSchedule;
use crate::sim::telemetry::{
    compute_metrics, telemetry_to_csv, MetricsError, RunMetrics, SolveLabel, TelemetryRecord,
};
use crate::sim::world::{MeasurementNoise, SimWorld};
use crate::srb::{ModelParams, RobotState, GRAVITY, INPUT_DIM, STATE_DIM};
use nalgebra::{Matrix3, SVector, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Seconds of telemetry excluded from summary statistics.
pub const WARMUP_SECONDS: f64 = 2.0;
/// Body height below which the run counts as fallen (m).
pub const FALL_HEIGHT: f64 = 0.15;
/// Roll or pitch beyond which the run counts as fallen (rad).
pub const FALL_TILT: f64 = 0.6;
/// Error samples are not recorded during known transients: the first
/// seconds of the run (stand-up settling) and the first moments after
/// compensation engages. Fitting data should describe steady operation; a
/// ramp in the window skews the lag structure and fails the whiteness
/// audit, which would withdraw compensation mid-run. The serving model
/// still observes every tick, so its forecasts keep tracking the live
/// state through the gap.
pub const RECORD_SKIP_SECONDS: f64 = 2.0;
/// Recording gap after compensation first engages (s), covering the step
/// change in closed-loop behaviour while the trim and forecasts take hold.
pub const ENGAGE_MASK_SECONDS: f64 = 1.5;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("failed to parse scenario: {0}")]
    Parse(String),
    #[error("controller failed at t = {time:.3} s: {source}")]
    Controller {
        time: f64,
        #[source]
        source: MpcError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Constant body-frame velocity and yaw-rate command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommandProfile {
    /// Horizontal velocity (m/s).
    pub velocity: [f64; 2],
    /// Yaw rate (rad/s).
    pub yaw_rate: f64,
}

impl Default for CommandProfile {
    fn default() -> Self {
        Self {
            velocity: [0.0, 0.0],
            yaw_rate: 0.0,
        }
    }
}

/// A mass silently added to the body at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadEvent {
    pub time: f64,
    pub mass: f64,
}

/// Model orders: fixed `[n, m]` or `"auto"` for data-driven selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderSpec {
    Fixed([usize; 2]),
    Named(String),
}

impl Default for OrderSpec {
    fn default() -> Self {
        OrderSpec::Fixed([10, 0])
    }
}

impl OrderSpec {
    pub fn resolve(&self) -> Result<Option<(usize, usize)>, ScenarioError> {
        match self {
            OrderSpec::Fixed([n, m]) => Ok(Some((*n, *m))),
            OrderSpec::Named(s) if s == "auto" => Ok(None),
            OrderSpec::Named(s) => Err(ScenarioError::InvalidConfig(format!(
                "orders must be [n, m] or \"auto\", got \"{s}\""
            ))),
        }
    }
}

/// Controller tuning exposed to scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcTuning {
    pub horizon: usize,
    pub dt: f64,
    pub state_weights: Vec<f64>,
    pub input_weight: f64,
    pub mu: f64,
    pub fz_min: f64,
    pub fz_max: f64,
    /// Accumulation rate of the slow compensation trim (0 disables it).
    pub integral_gain: f64,
    /// Per-tick decay of the trim.
    pub integral_leak: f64,
}

impl Default for MpcTuning {
    fn default() -> Self {
        let c = MpcConfig::default();
        Self {
            horizon: c.horizon,
            dt: c.dt,
            state_weights: c.state_weights.iter().copied().collect(),
            input_weight: c.input_weight,
            mu: c.mu,
            fz_min: c.fz_bounds.0,
            fz_max: c.fz_bounds.1,
            integral_gain: c.integral_gain,
            integral_leak: c.integral_leak,
        }
    }
}

impl MpcTuning {
    fn to_config(&self, compensation: bool) -> Result<MpcConfig, ScenarioError> {
        if self.state_weights.len() != STATE_DIM {
            return Err(ScenarioError::InvalidConfig(format!(
                "state_weights needs {STATE_DIM} entries, got {}",
                self.state_weights.len()
            )));
        }
        Ok(MpcConfig {
            horizon: self.horizon,
            dt: self.dt,
            state_weights: SVector::from_column_slice(&self.state_weights),
            input_weight: self.input_weight,
            mu: self.mu,
            fz_bounds: (self.fz_min, self.fz_max),
            compensation_enabled: compensation,
            integral_gain: self.integral_gain,
            integral_leak: self.integral_leak,
        })
    }
}

/// Error-model schedule exposed to scenario files.
///
/// The defaults differ from the library-level ones on purpose: closed-loop
/// error series at the 33 Hz tick carry a strong gait-synchronous component
/// (the 2 Hz trot line and its harmonics), and whitening it takes about ten
/// autoregressive lags. Low orders fit fine but fail the whiteness audit,
/// which rightly keeps compensation switched off. Moving-average terms are
/// skipped: the inverse-expansion estimates turn unstable on this kind of
/// quasi-periodic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelTuning {
    pub capacity: usize,
    pub refit_interval: u64,
    pub min_fit_samples: usize,
    pub residual_window: usize,
    pub orders: OrderSpec,
    pub force_zero_c: bool,
}

impl Default for ModelTuning {
    fn default() -> Self {
        Self {
            capacity: 600,
            refit_interval: 250,
            min_fit_samples: 300,
            residual_window: 400,
            orders: OrderSpec::default(),
            force_zero_c: false,
        }
    }
}

fn default_height() -> f64 {
    0.38
}
fn default_duration() -> f64 {
    30.0
}
fn default_ident() -> f64 {
    18.0
}
fn default_dither() -> f64 {
    10.0
}
fn default_dither_hz() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_inertia() -> [f64; 3] {
    [0.35, 1.3, 1.5]
}
fn default_physics_dt() -> f64 {
    1e-3
}

/// Full description of one closed-loop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// Mass the physics integrates (kg).
    pub true_mass: f64,
    /// Mass the controller believes (kg).
    pub control_mass: f64,
    /// Evaluated run length (s); telemetry and metrics cover exactly this.
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Identification prelude (s) run before the evaluated window: the
    /// error model records and fits, and compensation engages at the first
    /// adequate fit, so an evaluated run with compensation on opens with
    /// the engagement transient already settled. Both legs of a paired
    /// comparison share the prelude length exactly, which keeps the
    /// comparison between steady states.
    #[serde(default = "default_ident")]
    pub ident_duration: f64,
    /// Force dither during the prelude: amplitude (N) of slow sinusoids
    /// added to the stance-leg vertical forces after the solve. A steady
    /// trot barely varies the total vertical force, leaving the
    /// force-to-error map in the model unidentifiable, and exciting the
    /// reference instead would correlate commanded force with the error
    /// definition through the command itself and flip the estimated sign.
    /// Dithering the applied forces keeps the correlation causal: the
    /// recorded inputs contain the dither, the error contains its
    /// response, and the regression sees force cause error. Zero disables.
    #[serde(default = "default_dither")]
    pub ident_dither: f64,
    /// Base dither frequency (Hz); heave uses it directly, the roll and
    /// pitch components run at fixed non-commensurate multiples so the
    /// attitude rows of the input map get their own excitation.
    #[serde(default = "default_dither_hz")]
    pub ident_dither_hz: f64,
    #[serde(default = "default_height")]
    pub desired_height: f64,
    #[serde(default)]
    pub command: CommandProfile,
    #[serde(default)]
    pub payload: Vec<PayloadEvent>,
    /// Feed error forecasts into the controller.
    #[serde(default = "default_true")]
    pub compensation: bool,
    /// Run the error model at all (record + fit). With compensation off
    /// this exercises the bookkeeping without influencing control.
    #[serde(default = "default_true")]
    pub error_model: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: MeasurementNoise,
    #[serde(default)]
    pub gait: GaitSchedule,
    #[serde(default)]
    pub mpc: MpcTuning,
    #[serde(default)]
    pub model: ModelTuning,
    /// Diagonal body inertia, shared by truth and controller (kg m^2).
    #[serde(default = "default_inertia")]
    pub inertia_diag: [f64; 3],
    #[serde(default = "default_physics_dt")]
    pub physics_dt: f64,
}

impl ScenarioConfig {
    fn base(name: &str, true_mass: f64, control_mass: f64, duration: f64) -> Self {
        Self {
            name: name.to_string(),
            true_mass,
            control_mass,
            duration,
            ident_duration: default_ident(),
            ident_dither: default_dither(),
            ident_dither_hz: default_dither_hz(),
            desired_height: default_height(),
            command: CommandProfile::default(),
            payload: Vec::new(),
            compensation: true,
            error_model: true,
            seed: 0,
            noise: MeasurementNoise::default(),
            gait: GaitSchedule::default(),
            mpc: MpcTuning::default(),
            model: ModelTuning::default(),
            inertia_diag: default_inertia(),
            physics_dt: default_physics_dt(),
        }
    }

    /// Controller and plant agree exactly; residual errors come from noise,
    /// gait transients and the linearisation.
    pub fn ground_truth() -> Self {
        Self::base("ground_truth", 23.7, 23.7, 30.0)
    }

    /// Controller believes a mass 11 kg above the real one.
    pub fn wrong_mass() -> Self {
        Self::base("wrong_mass", 23.7, 34.7, 30.0)
    }

    /// An unmodelled 8 kg payload lands on the body at t = 5 s.
    pub fn payload_8kg() -> Self {
        let mut cfg = Self::base("payload_8kg", 23.7, 23.7, 40.0);
        cfg.payload = vec![PayloadEvent {
            time: 5.0,
            mass: 8.0,
        }];
        cfg
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "ground_truth" => Some(Self::ground_truth()),
            "wrong_mass" => Some(Self::wrong_mass()),
            "payload_8kg" => Some(Self::payload_8kg()),
            _ => None,
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["ground_truth", "wrong_mass", "payload_8kg"]
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidConfig(msg));
        if !(self.true_mass > 0.0 && self.control_mass > 0.0) {
            return bad("masses must be positive".into());
        }
        if !(self.duration > 0.0) {
            return bad("duration must be positive".into());
        }
        if !(self.ident_duration >= 0.0) {
            return bad("ident_duration must be non-negative".into());
        }
        if !(self.ident_excitation >= 0.0 && self.ident_excitation_hz >= 0.0) {
            return bad("prelude excitation amplitude and frequency must be non-negative".into());
        }
        if self.ident_excitation >= self.desired_height - FALL_HEIGHT {
            return bad("prelude excitation amplitude would cross the fall threshold".into());
        }
        if !(self.desired_height > FALL_HEIGHT) {
            return bad(format!("desired_height must exceed {FALL_HEIGHT}"));
        }
        if !(self.physics_dt > 0.0 && self.mpc.dt > 0.0) {
            return bad("time steps must be positive".into());
        }
        let ratio = self.mpc.dt / self.physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio < 1.0 {
            return bad(format!(
                "controller dt {} must be an integer multiple of physics dt {}",
                self.mpc.dt, self.physics_dt
            ));
        }
        if self.mpc.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.mpc.state_weights.len() != STATE_DIM {
            return bad(format!(
                "state_weights needs {STATE_DIM} entries, got {}",
                self.mpc.state_weights.len()
            ));
        }
        if !(self.gait.period > 0.0 && self.gait.duty > 0.0 && self.gait.duty <= 1.0) {
            return bad("gait needs period > 0 and duty in (0, 1]".into());
        }
        if !(self.mpc.fz_max > self.mpc.fz_min && self.mpc.fz_min >= 0.0) {
            return bad("need fz_max > fz_min >= 0".into());
        }
        if !(self.mpc.mu > 0.0) {
            return bad("friction coefficient must be positive".into());
        }
        for p in &self.payload {
            if !(p.time >= 0.0 && p.mass.is_finite()) {
                return bad("payload events need time >= 0 and finite mass".into());
            }
        }
        self.model.orders.resolve()?;
        Ok(())
    }
}

/// Hip positions relative to the CoM for the reference robot: a
/// 0.78 x 0.37 m footprint (m).
pub fn default_hip_offsets() -> [Vector3<f64>; 4] {
    [
        Vector3::new(0.39, 0.185, 0.0),
        Vector3::new(0.39, -0.185, 0.0),
        Vector3::new(-0.39, 0.185, 0.0),
        Vector3::new(-0.39, -0.185, 0.0),
    ]
}

/// One finished run: summary metrics plus the full telemetry.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub metrics: RunMetrics,
    pub records: Vec<TelemetryRecord>,
    /// Error-log CSV (the model's training buffer), when the error model ran.
    pub error_log: Option<String>,
}

impl ScenarioRun {
    pub fn telemetry_csv(&self) -> String {
        telemetry_to_csv(&self.records)
    }

    pub fn fell_over(&self) -> bool {
        self.metrics.fell_over
    }
}

fn state_row(state: &RobotState) -> [f64; 13] {
    let v = state.to_vector();
    let mut row = [0.0; 13];
    row.copy_from_slice(v.as_slice());
    row
}

/// Runs one closed-loop scenario to completion (or until the robot falls).
///
/// The run has two phases. During the identification prelude
/// (`ident_duration` seconds) the error model records and fits; if the
/// scenario asks for compensation it engages at the first adequate fit,
/// giving its transient the rest of the prelude to settle. One final fit
/// on the full prelude window happens at the boundary. The evaluated
/// window (`duration` seconds, telemetry time starting at zero) then runs
/// to completion. A fall inside the prelude leaves no evaluated telemetry
/// and surfaces as an empty-window error.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
    config.validate()?;
    let inertia = Matrix3::from_diagonal(&Vector3::new(
        config.inertia_diag[0],
        config.inertia_diag[1],
        config.inertia_diag[2],
    ));
    let hips = default_hip_offsets();
    let mut world = SimWorld::standing(
        config.true_mass,
        inertia,
        hips,
        config.desired_height,
        config.physics_dt,
    );
    // Payload event times are relative to the evaluated window.
    world.payload_schedule = config
        .payload
        .iter()
        .map(|p| (p.time + config.ident_duration, p.mass))
        .collect();

    let mut feet = [Vector3::zeros(); 4];
    for (f, anchor) in feet.iter_mut().zip(world.foot_anchors.iter()) {
        *f = anchor - world.position;
    }
    let params = ModelParams {
        mass: config.control_mass,
        inertia,
        foot_positions: feet,
    };
    let mpc_config = config.mpc.to_config(config.compensation)?;
    let mut controller = MpcController::new(mpc_config.clone(), params)
        .map_err(|e| ScenarioError::Controller { time: 0.0, source: e })?;

    let mut manager = if config.error_model {
        let mut mc = ErrorModelConfig::new(static_input_baseline(config.control_mass));
        mc.capacity = config.model.capacity;
        mc.refit_interval = config.model.refit_interval;
        mc.min_fit_samples = config.model.min_fit_samples;
        mc.residual_window = config.model.residual_window;
        mc.orders = config.model.orders.resolve()?;
        mc.force_zero_c = config.model.force_zero_c;
        Some(ErrorModelManager::new(mc))
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dt = mpc_config.dt;
    let substeps = (dt / config.physics_dt).round() as usize;
    let prelude_ticks = (config.ident_duration / dt).round() as usize;
    let ticks = prelude_ticks + (config.duration / dt).round() as usize;
    let v_cmd = Vector2::new(config.command.velocity[0], config.command.velocity[1]);
    let stance_time = config.gait.duty * config.gait.period;

    // Force paired with the first error sample: the static support guess.
    let mut last_applied = SVector::<f64, INPUT_DIM>::zeros();
    let share = config.control_mass * GRAVITY / 4.0;
    for leg in 0..4 {
        last_applied[3 * leg + 2] = share;
    }

    let mut records: Vec<TelemetryRecord> = Vec::with_capacity(ticks);
    let mut fell = false;
    // First tick the model started serving forecasts; keys the recording
    // mask that keeps the engagement transient out of the fitting data.
    let mut engaged_at: Option<usize> = None;

    for tick in 0..ticks {
        let in_prelude = tick < prelude_ticks;
        let t = tick as f64 * dt;

        // Hand the evaluated window a model fitted on the full prelude.
        if tick == prelude_ticks {
            if let Some(mgr) = manager.as_mut() {
                if mgr.buffer().len() >= config.model.min_fit_samples {
                    mgr.refit(tick as u64);
                }
            }
        }

        let measured = world.measure(&config.noise, &mut rng);

        // During the prelude a slow height wobble keeps the fitting data
        // informative: it moves the planned vertical forces and the height
        // error together, which is what identifies the input term.
        let desired_h = if in_prelude && config.ident_excitation > 0.0 {
            let w = 2.0 * std::f64::consts::PI * config.ident_excitation_hz;
            config.desired_height + config.ident_excitation * (w * t).sin()
        } else {
            config.desired_height
        };
        let command = BodyCommand {
            velocity: v_cmd,
            yaw_rate: config.command.yaw_rate,
            height: desired_h,
            attitude: Vector2::zeros(),
        };

        // Book the tracking error against the commanded pose for this tick.
        // The paired force is the one that acted over the previous interval,
        // i.e. the force that produced this error.
        let desired_yaw = config.command.yaw_rate * t;
        let e = SVector::<f64, 4>::new(
            -measured.theta.x,
            -measured.theta.y,
            desired_yaw - measured.theta.z,
            desired_h - measured.p.z,
        );
        if let Some(mgr) = manager.as_mut() {
            let sample = ErrorSample {
                e,
                u: last_applied,
                tick: tick as u64,
            };
            let in_startup = t < RECORD_SKIP_SECONDS;
            let in_engage_mask = engaged_at
                .is_some_and(|e0| ((tick - e0) as f64 * dt) < ENGAGE_MASK_SECONDS);
            if in_startup || in_engage_mask {
                mgr.observe_serving(&sample);
            } else if mgr.record(sample).is_err() {
                // Errors out of the plausible band mean the sim diverged.
                fell = true;
                break;
            }
            if engaged_at.is_none() && mgr.compensation_ready() {
                engaged_at = Some(tick);
                // Engaging changes the closed-loop error process; samples
                // from the uncompensated regime would sit in the window as
                // a mean step no candidate fit can whiten.
                mgr.reset_window();
            }
        }

        let mut lever_arms = [Vector3::zeros(); 4];
        for (arm, anchor) in lever_arms.iter_mut().zip(world.foot_anchors.iter()) {
            *arm = anchor - measured.p;
        }
        controller.set_foot_positions(lever_arms);

        // Compensation engages as soon as the first adequate fit exists,
        // normally well inside the prelude, so its engagement transient and
        // the slow trim settle before the evaluated window opens.
        let served_model = manager.as_ref();

        let masks = config.gait.horizon_masks(t, dt, mpc_config.horizon);
        let (applied, status, iterations, compensation) =
            match controller.control_tick(&measured, &command, &masks, served_model) {
                Ok(out) => {
                    let label = match out.status {
                        QpStatus::Solved => SolveLabel::Solved,
                        QpStatus::MaxIterations => SolveLabel::MaxIterations,
                        QpStatus::Infeasible => SolveLabel::InfeasibleHeld,
                    };
                    (out.grfs[0], label, out.iterations, out.compensation)
                }
                Err(MpcError::SolverInfeasible) => (
                    controller.held_grfs(),
                    SolveLabel::InfeasibleHeld,
                    0,
                    SVector::zeros(),
                ),
                Err(e) => return Err(ScenarioError::Controller { time: t, source: e }),
            };

        if std::env::var_os("ERRMPC_TRACE").is_some() && tick % 10 == 0 {
            eprintln!(
                "[tick] {tick} h={:.4} c4={:+.4} fz={:.1}",
                measured.p.z,
                compensation[3],
                applied[2] + applied[5] + applied[8] + applied[11]
            );
        }
        if !in_prelude {
            let reference_state = RobotState {
                theta: Vector3::new(0.0, 0.0, desired_yaw),
                p: Vector3::new(v_cmd.x * t, v_cmd.y * t, config.desired_height),
                omega: Vector3::new(0.0, 0.0, config.command.yaw_rate),
                v: Vector3::new(v_cmd.x, v_cmd.y, 0.0),
            };
            let mut grf_row = [0.0; 12];
            grf_row.copy_from_slice(applied.as_slice());
            records.push(TelemetryRecord {
                time: (tick - prelude_ticks) as f64 * dt,
                measured: state_row(&measured),
                reference: state_row(&reference_state),
                compensation: [
                    compensation[0],
                    compensation[1],
                    compensation[2],
                    compensation[3],
                ],
                grfs: grf_row,
                status,
                iterations,
            });
        }
        last_applied = applied;

        for _ in 0..substeps {
            let mask_now = config.gait.stance_mask(world.time);
            world.update_contacts(&mask_now, v_cmd, stance_time);
            world.physics_step(&applied, &mask_now);
        }
        if world.fell_over(FALL_HEIGHT, FALL_TILT) {
            fell = true;
            break;
        }
    }

    let metrics = match compute_metrics(&records, WARMUP_SECONDS, fell) {
        Ok(m) => m,
        // A run that fell inside the warmup window still reports what it saw.
        Err(MetricsError::EmptyWindow(_)) if fell && !records.is_empty() => {
            compute_metrics(&records, 0.0, fell)?
        }
        Err(e) => return Err(e.into()),
    };
    let error_log = manager.as_ref().map(|m| m.buffer().to_csv());
    Ok(ScenarioRun {
        config: config.clone(),
        metrics,
        records,
        error_log,
    })
}

/// Side-by-side outcome of the same scenario with compensation off and on.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub seed: u64,
    pub baseline: RunMetrics,
    pub compensated: RunMetrics,
    /// Reduction of peak-to-peak height oscillation, percent of baseline.
    pub vibration_reduction_pct: f64,
    /// Reduction of |mean height - desired|, percent of baseline.
    pub height_error_reduction_pct: f64,
    /// Per-channel MAE reduction (roll, pitch, yaw, height), percent.
    pub mae_reduction_pct: [f64; 4],
}

fn reduction_pct(base: f64, comp: f64) -> f64 {
    if base.abs() < 1e-15 {
        0.0
    } else {
        (base - comp) / base * 100.0
    }
}

impl ComparisonReport {
    pub fn from_metrics(
        config: &ScenarioConfig,
        baseline: RunMetrics,
        compensated: RunMetrics,
    ) -> Self {
        let mut mae_reduction = [0.0; 4];
        for c in 0..4 {
            mae_reduction[c] = reduction_pct(baseline.mae[c], compensated.mae[c]);
        }
        Self {
            scenario: config.name.clone(),
            seed: config.seed,
            baseline,
            compensated,
            vibration_reduction_pct: reduction_pct(
                baseline.peak_to_peak_height,
                compensated.peak_to_peak_height,
            ),
            height_error_reduction_pct: reduction_pct(
                (baseline.mean_height - config.desired_height).abs(),
                (compensated.mean_height - config.desired_height).abs(),
            ),
            mae_reduction_pct: mae_reduction,
        }
    }
}

/// Both legs of a paired comparison.
#[derive(Debug, Clone)]
pub struct PairedRuns {
    pub report: ComparisonReport,
    pub baseline: ScenarioRun,
    pub compensated: ScenarioRun,
}

impl PairedRuns {
    /// Narrow merged CSV for plotting the two height traces together.
    pub fn merged_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "time,baseline_height,compensated_height,desired_height,\
baseline_comp_c4,compensated_comp_c4,baseline_fz_sum,compensated_fz_sum\n",
        );
        let n = self.baseline.records.len().min(self.compensated.records.len());
        for k in 0..n {
            let b = &self.baseline.records[k];
            let c = &self.compensated.records[k];
            let fz = |r: &TelemetryRecord| r.grfs[2] + r.grfs[5] + r.grfs[8] + r.grfs[11];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                b.time,
                b.measured[5],
                c.measured[5],
                self.baseline.config.desired_height,
                b.compensation[3],
                c.compensation[3],
                fz(b),
                fz(c),
            )
            .unwrap();
        }
        out
    }
}

/// Runs the scenario twice on the same seed, compensation off then on.
pub fn paired_compare(config: &ScenarioConfig) -> Result<PairedRuns, ScenarioError> {
    let mut base_cfg = config.clone();
    base_cfg.compensation = false;
    let mut comp_cfg = config.clone();
    comp_cfg.compensation = true;
    let baseline = run_scenario(&base_cfg)?;
    let compensated = run_scenario(&comp_cfg)?;
    let report = ComparisonReport::from_metrics(config, baseline.metrics, compensated.metrics);
    Ok(PairedRuns {
        report,
        baseline,
        compensated,
    })
}
