//! Condensed model-predictive controller over the linearised rigid-body
//! dynamics, with additive error compensation.
//!
//! Each tick linearises the dynamics at the measured yaw, rolls the state
//! prediction forward over an N-step horizon,
//!
//! ```text
//! x_{k+1} = A x_k + B u_k + gamma_k
//! ```
//!
//! eliminates the states by forward substitution so the stacked ground
//! reaction forces are the only decision variables, and solves the resulting
//! dense QP under friction-pyramid and swing-leg constraints.
//!
//! The affine terms `gamma_k` carry the error compensation: the controller
//! asks the error model to forecast the tracking error over the horizon and
//! injects the forecast into the rollout so the optimiser works against the
//! prediction the physical system is actually headed for. With the error
//! forecast defined as desired minus measured, the injected term is the
//! negated scatter of the forecast; a persistent "robot sits low" forecast
//! then pulls the predicted heights down and the solved vertical forces up.
//!
//! Per-step injection alone corrects each prediction once, which settles at
//! half of any persistent bias (the forecast shrinks as the bias shrinks,
//! and the two meet in the middle). A slow leaky integral of the one-step
//! forecast is therefore added to every step's term; it keeps growing until
//! the remaining forecast is near zero, removing the bias outright, while
//! its small per-tick gain keeps it far below the loop bandwidth.

use crate::error_model::{compensation_term, ErrorModelManager, SelectMatrix, ERROR_DIM};
use crate::qp::{self, build_friction_constraints, QpError, QpProblem, QpStatus};
use crate::srb::{discrete_dynamics, DiscreteDynamics, ModelParams, RobotState, SrbError,
    GRAVITY, INPUT_DIM, STATE_DIM};
use nalgebra::{DMatrix, DVector, SVector, Vector2, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no force assignment satisfies the tick's constraints")]
    SolverInfeasible,
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Dynamics(#[from] SrbError),
}

/// Horizon length, weights and constraint limits of the controller.
///
/// The weights are configuration, not constants: scenario files override
/// them, and the defaults here are merely a stable trotting tune (attitude
/// and height weighted far above velocities, near-zero force effort).
#[derive(Debug, Clone)]
pub struct MpcConfig {
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Controller period (s).
    pub dt: f64,
    /// Diagonal state weights, one per state entry.
    pub state_weights: SVector<f64, STATE_DIM>,
    /// Scalar effort weight on every force component.
    pub input_weight: f64,
    /// Friction coefficient for the pyramid constraints.
    pub mu: f64,
    /// Vertical force limits (N) for stance legs.
    pub fz_bounds: (f64, f64),
    /// Master switch for the error-compensation path.
    pub compensation_enabled: bool,
    /// Per-tick accumulation rate of the slow compensation trim (0 disables).
    ///
    /// The per-step forecast terms correct each predicted state once, which
    /// cancels at most half of a persistent model bias: the optimiser aims
    /// past the reference by the forecast, the plant lands between, and the
    /// forecast then tracks the smaller remainder. The trim integrates the
    /// one-step forecast over time and is added to every step's
    /// compensation, so persistent bias keeps accumulating correction until
    /// the forecast itself is driven to zero.
    pub integral_gain: f64,
    /// Per-tick decay of the trim; bounds its DC gain at
    /// `integral_gain / integral_leak` and forgets stale bias.
    pub integral_leak: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        let mut w = SVector::<f64, STATE_DIM>::zeros();
        w[0] = 50.0; // roll
        w[1] = 50.0; // pitch
        w[2] = 50.0; // yaw
        w[3] = 1.0; // x
        w[4] = 1.0; // y
        w[5] = 100.0; // height
        for i in 6..12 {
            w[i] = 1.0; // angular and linear velocity
        }
        Self {
            horizon: 12,
            dt: 0.03,
            state_weights: w,
            input_weight: 1e-5,
            mu: 0.5,
            fz_bounds: (0.0, 500.0),
            compensation_enabled: true,
            integral_gain: 0.02,
            integral_leak: 0.0005,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon == 0 {
            return Err(MpcError::DimensionMismatch("horizon must be >= 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(MpcError::DimensionMismatch("dt must be positive".into()));
        }
        if self.state_weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(MpcError::DimensionMismatch(
                "state weights must be finite and non-negative".into(),
            ));
        }
        if self.input_weight < 0.0 || !self.input_weight.is_finite() {
            return Err(MpcError::DimensionMismatch(
                "input weight must be finite and non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.integral_gain) || !(0.0..1.0).contains(&self.integral_leak) {
            return Err(MpcError::DimensionMismatch(
                "integral gain and leak must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Commanded body motion: planar velocity, yaw rate, height and attitude.
#[derive(Debug, Clone, Copy)]
pub struct BodyCommand {
    /// World-frame planar velocity (m/s).
    pub velocity: Vector2<f64>,
    /// Yaw rate (rad/s).
    pub yaw_rate: f64,
    /// Body height above ground (m).
    pub height: f64,
    /// Desired roll and pitch (rad), normally zero.
    pub attitude: Vector2<f64>,
}

impl BodyCommand {
    /// Stand-still command at the given height.
    pub fn hold(height: f64) -> Self {
        Self {
            velocity: Vector2::zeros(),
            yaw_rate: 0.0,
            height,
            attitude: Vector2::zeros(),
        }
    }
}

/// Desired states over the horizon, index 0 at the current tick.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    states: Vec<RobotState>,
}

impl ReferenceTrajectory {
    pub fn states(&self) -> &[RobotState] {
        &self.states
    }

    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }
}

/// Builds the reference by integrating the command from the measured state:
/// position and yaw anchor at the measurement and integrate the commanded
/// rates, while height and attitude jump straight to their commanded values.
pub fn build_reference(
    command: &BodyCommand,
    x0: &RobotState,
    config: &MpcConfig,
) -> ReferenceTrajectory {
    assert!(
        command.velocity.iter().all(|v| v.is_finite())
            && command.yaw_rate.is_finite()
            && command.height.is_finite()
            && command.attitude.iter().all(|v| v.is_finite()),
        "command must be finite"
    );
    let mut states = Vec::with_capacity(config.horizon + 1);
    for k in 0..=config.horizon {
        let t = k as f64 * config.dt;
        states.push(RobotState {
            theta: Vector3::new(
                command.attitude.x,
                command.attitude.y,
                x0.theta.z + command.yaw_rate * t,
            ),
            p: Vector3::new(
                x0.p.x + command.velocity.x * t,
                x0.p.y + command.velocity.y * t,
                command.height,
            ),
            omega: Vector3::new(0.0, 0.0, command.yaw_rate),
            v: Vector3::new(command.velocity.x, command.velocity.y, 0.0),
        });
    }
    ReferenceTrajectory { states }
}

/// Eliminates the states from the N-step rollout and assembles the dense QP
/// over the stacked forces.
///
/// `compensation` holds the per-step adjustments `gamma_k` (all zero when
/// compensation is off). The dynamics recursion runs on the unadjusted
/// model states; the adjusted state costed at step k+1 is
/// `A x_k + B u_k + gamma_k`, so a persistent forecast shifts every step by
/// the same bounded amount instead of compounding along the horizon. The
/// terms enter only the linear part of the cost, so H is bit-identical with
/// and without compensation.
pub fn condense(
    dynamics: &DiscreteDynamics,
    compensation: &[SVector<f64, STATE_DIM>],
    x0: &RobotState,
    reference: &ReferenceTrajectory,
    stance_masks: &[[bool; 4]],
    config: &MpcConfig,
) -> Result<QpProblem, MpcError> {
    config.validate()?;
    let n = config.horizon;
    if compensation.len() != n {
        return Err(MpcError::DimensionMismatch(format!(
            "{} compensation terms for horizon {n}",
            compensation.len()
        )));
    }
    if stance_masks.len() != n {
        return Err(MpcError::DimensionMismatch(format!(
            "{} stance masks for horizon {n}",
            stance_masks.len()
        )));
    }
    if reference.states.len() != n + 1 {
        return Err(MpcError::DimensionMismatch(format!(
            "reference has {} states for horizon {n}",
            reference.states.len()
        )));
    }

    let a = DMatrix::from_iterator(STATE_DIM, STATE_DIM, dynamics.a_mat.iter().copied());
    let b = DMatrix::from_iterator(STATE_DIM, INPUT_DIM, dynamics.b_mat.iter().copied());

    // Impulse-response blocks A^i B, i = 0..n-1.
    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    blocks.push(b.clone());
    for i in 1..n {
        let next = &a * &blocks[i - 1];
        blocks.push(next);
    }

    // Stacked input map: block (k-1, j) = A^{k-1-j} B for j < k.
    let mut su = DMatrix::zeros(STATE_DIM * n, INPUT_DIM * n);
    for k in 1..=n {
        for j in 0..k {
            su.view_mut(((k - 1) * STATE_DIM, j * INPUT_DIM), (STATE_DIM, INPUT_DIM))
                .copy_from(&blocks[k - 1 - j]);
        }
    }

    // Force-free rollout: c_k = A^k x0 + gamma_{k-1} - ref_k. The model
    // recursion runs on the unadjusted states; each step's compensation
    // shifts that step's predicted state directly and does not propagate
    // into later steps.
    let x0_vec = DVector::from_column_slice(x0.to_vector().as_slice());
    let mut c = DVector::zeros(STATE_DIM * n);
    let mut free = x0_vec;
    for k in 1..=n {
        free = &a * &free;
        let gamma = &compensation[k - 1];
        let ref_k = reference.states[k].to_vector();
        for i in 0..STATE_DIM {
            c[(k - 1) * STATE_DIM + i] = free[i] + gamma[i] - ref_k[i];
        }
    }

    // Cost: |x - ref|^2_Q + |u|^2_R condensed onto the forces.
    let mut q_su = su.clone();
    for k in 0..n {
        for i in 0..STATE_DIM {
            let w = config.state_weights[i];
            q_su.row_mut(k * STATE_DIM + i).scale_mut(w);
        }
    }
    let su_t = su.transpose();
    let mut h = &su_t * &q_su;
    // Adding the transpose both doubles and symmetrises in one shot.
    let h_t = h.transpose();
    h += h_t;
    for i in 0..INPUT_DIM * n {
        h[(i, i)] += 2.0 * config.input_weight;
    }
    let mut qc = c;
    for k in 0..n {
        for i in 0..STATE_DIM {
            qc[k * STATE_DIM + i] *= config.state_weights[i];
        }
    }
    let mut f = &su_t * &qc;
    f *= 2.0;

    // Friction pyramid, vertical bounds and swing-leg equalities, tiled
    // block-diagonally over the horizon.
    let steps: Vec<_> = stance_masks
        .iter()
        .map(|mask| build_friction_constraints(config.mu, *mask, config.fz_bounds))
        .collect();
    let ineq_rows: usize = steps.iter().map(|s| s.a_ineq.nrows()).sum();
    let eq_rows: usize = steps.iter().map(|s| s.a_eq.nrows()).sum();
    let dim = INPUT_DIM * n;
    let mut a_ineq = DMatrix::zeros(ineq_rows, dim);
    let mut lo = DVector::zeros(ineq_rows);
    let mut hi = DVector::zeros(ineq_rows);
    let mut a_eq = DMatrix::zeros(eq_rows, dim);
    let mut b_eq = DVector::zeros(eq_rows);
    let (mut ir, mut er) = (0, 0);
    for (k, step) in steps.iter().enumerate() {
        let col = k * INPUT_DIM;
        let ni = step.a_ineq.nrows();
        a_ineq
            .view_mut((ir, col), (ni, INPUT_DIM))
            .copy_from(&step.a_ineq);
        lo.rows_mut(ir, ni).copy_from(&step.lo);
        hi.rows_mut(ir, ni).copy_from(&step.hi);
        ir += ni;
        let ne = step.a_eq.nrows();
        a_eq.view_mut((er, col), (ne, INPUT_DIM))
            .copy_from(&step.a_eq);
        b_eq.rows_mut(er, ne).copy_from(&step.b_eq);
        er += ne;
    }

    Ok(QpProblem {
        h,
        f,
        a_ineq,
        lo,
        hi,
        a_eq,
        b_eq,
    })
}

/// One tick's worth of controller output.
#[derive(Debug, Clone)]
pub struct MpcOutput {
    /// Planned forces over the horizon; the first entry is applied.
    pub grfs: Vec<SVector<f64, INPUT_DIM>>,
    /// Compensated state predictions x_1..x_N under the planned forces.
    pub predicted_states: Vec<RobotState>,
    /// First-step applied correction in error-channel space: the one-step
    /// forecast plus the slow trim (zero when compensation is off).
    pub compensation: SVector<f64, ERROR_DIM>,
    pub status: QpStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Receding-horizon force controller.
///
/// Owns the control model (which may deliberately disagree with the
/// simulated truth), the previous solution used for warm starts and error
/// prediction, and the last applied forces for the infeasibility fallback.
#[derive(Debug, Clone)]
pub struct MpcController {
    config: MpcConfig,
    params: ModelParams,
    select: SelectMatrix,
    prev_solution: Option<DVector<f64>>,
    held_grfs: SVector<f64, INPUT_DIM>,
    /// Slow compensation trim in error-channel space: a leaky accumulation
    /// of one-step forecasts. Freezes (applied as zero) whenever the model
    /// stops serving, so a transient adequacy flap does not discard the
    /// learnt bias correction.
    integral: SVector<f64, ERROR_DIM>,
    /// Whether the trim has been seeded by a first engagement.
    integral_primed: bool,
}

impl MpcController {
    pub fn new(config: MpcConfig, params: ModelParams) -> Result<Self, MpcError> {
        config.validate()?;
        // Fail fast on broken model parameters.
        discrete_dynamics(0.0, &params, config.dt)?;
        Ok(Self {
            config,
            params,
            select: SelectMatrix::new(),
            prev_solution: None,
            held_grfs: SVector::zeros(),
            integral: SVector::zeros(),
            integral_primed: false,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    /// Updates the lever arms (world-frame CoM-to-foot vectors) used by the
    /// next linearisation. Call before each tick as the feet re-anchor.
    pub fn set_foot_positions(&mut self, feet: [Vector3<f64>; 4]) {
        self.params.foot_positions = feet;
    }

    /// The forces a caller should hold when a tick reports infeasible:
    /// the first step of the last successful solve.
    pub fn held_grfs(&self) -> SVector<f64, INPUT_DIM> {
        self.held_grfs
    }

    /// First-tick warm start: the body weight split evenly over each step's
    /// stance legs, clamped into the vertical bounds. Feasible by
    /// construction and close to the stationary optimum, it spares the
    /// solver the degenerate all-zero start where every pyramid face and
    /// every vertical lower bound is tight at once.
    fn static_warm_start(&self, stance_masks: &[[bool; 4]]) -> DVector<f64> {
        let weight = self.params.mass * GRAVITY;
        let (fz_min, fz_max) = self.config.fz_bounds;
        let mut w = DVector::zeros(INPUT_DIM * stance_masks.len());
        for (k, mask) in stance_masks.iter().enumerate() {
            let stance = mask.iter().filter(|s| **s).count();
            if stance == 0 {
                continue;
            }
            let share = (weight / stance as f64).clamp(fz_min, fz_max);
            for (leg, on) in mask.iter().enumerate() {
                if *on {
                    w[k * INPUT_DIM + 3 * leg + 2] = share;
                }
            }
        }
        w
    }

    /// Future forces assumed by the error forecast: the previous solution
    /// shifted one step, final step repeated.
    fn shifted_plan(prev: &DVector<f64>, n: usize) -> Vec<SVector<f64, INPUT_DIM>> {
        (0..n)
            .map(|k| {
                let idx = (k + 1).min(n - 1);
                SVector::from_column_slice(&prev.as_slice()[idx * INPUT_DIM..(idx + 1) * INPUT_DIM])
            })
            .collect()
    }

    /// Runs one control cycle: reference, error forecast, condensation and
    /// the QP solve.
    ///
    /// Compensation degrades to zero whenever it cannot be trusted: the
    /// switch is off, no error model is supplied, the model is cold or
    /// inadequate, or there is no previous plan to forecast against. In all
    /// of those cases the output is exactly the uncompensated controller's.
    ///
    /// Returns `SolverInfeasible` without touching the stored plan, so the
    /// caller can apply [`MpcController::held_grfs`] for one tick and retry.
    pub fn control_tick(
        &mut self,
        x_measured: &RobotState,
        command: &BodyCommand,
        stance_masks: &[[bool; 4]],
        error_model: Option<&ErrorModelManager>,
    ) -> Result<MpcOutput, MpcError> {
        let n = self.config.horizon;
        if stance_masks.len() != n {
            return Err(MpcError::DimensionMismatch(format!(
                "{} stance masks for horizon {n}",
                stance_masks.len()
            )));
        }
        let dynamics = discrete_dynamics(x_measured.theta.z, &self.params, self.config.dt)?;
        let reference = build_reference(command, x_measured, &self.config);

        let mut gamma = vec![SVector::<f64, STATE_DIM>::zeros(); n];
        let mut first_forecast = SVector::<f64, ERROR_DIM>::zeros();
        if self.config.compensation_enabled {
            if let (Some(manager), Some(prev)) = (error_model, self.prev_solution.as_ref()) {
                let planned = Self::shifted_plan(prev, n);
                if let Some(mut forecast) = manager.predict(&planned) {
                    let e1 = SVector::<f64, ERROR_DIM>::from_column_slice(
                        forecast[0].as_slice(),
                    );
                    let beta = self.config.integral_gain;
                    let lambda = self.config.integral_leak;
                    if beta > 0.0 {
                        if self.integral_primed {
                            self.integral = self.integral * (1.0 - lambda) + e1 * beta;
                        } else {
                            // First engagement: start the trim at its
                            // predicted resting point so the bias correction
                            // applies at once instead of ramping through the
                            // evaluation.
                            self.integral = e1 * (beta / (2.0 * lambda + beta));
                            self.integral_primed = true;
                        }
                        // Windup guard.
                        for (i, cap) in [0.5, 0.5, 0.5, 0.2].iter().enumerate() {
                            self.integral[i] = self.integral[i].clamp(-cap, *cap);
                        }
                    }
                    // Far horizon steps outrun the model's memory; their
                    // forecasts decay toward the series mean while their
                    // errors do not, so acting on them at full strength
                    // trades correction for injected noise. Scale each step
                    // by the model's own predictive R-squared instead. The
                    // slow trim below is exempt: its low-pass filtering is
                    // its own noise rejection.
                    if let Some(confidence) = manager.forecast_confidence(n) {
                        for (f, w) in forecast.iter_mut().zip(confidence.iter()) {
                            f.component_mul_assign(w);
                        }
                    }
                    let trim = self.select.apply(
                        &DVector::from_column_slice(self.integral.as_slice()),
                    );
                    // The forecast is desired minus measured; pulling the
                    // model's prediction down by it makes the optimiser aim
                    // the physical system at the reference.
                    for (g, s) in gamma
                        .iter_mut()
                        .zip(compensation_term(&forecast, &self.select))
                    {
                        *g = -(s + trim);
                    }
                    if std::env::var_os("ERRMPC_TRACE").is_some() {
                        let w = manager.forecast_confidence(n).unwrap_or_default();
                        eprintln!(
                            "[comp] e1={:+.4} G={:+.4} f1={:+.4} f6={:+.4} f12={:+.4} w1={:.2} w6={:.2} w12={:.2}",
                            e1[3],
                            self.integral[3],
                            forecast[0][3],
                            forecast[5.min(n - 1)][3],
                            forecast[n - 1][3],
                            w.first().map_or(-1.0, |v| v[3]),
                            w.get(5.min(n - 1)).map_or(-1.0, |v| v[3]),
                            w.get(n - 1).map_or(-1.0, |v| v[3]),
                        );
                    }
                    first_forecast = e1 + self.integral;
                }
            }
        }

        let problem = condense(
            &dynamics,
            &gamma,
            x_measured,
            &reference,
            stance_masks,
            &self.config,
        )?;
        let warm: DVector<f64> = match self.prev_solution.as_ref() {
            Some(prev) => {
                let plan = Self::shifted_plan(prev, n);
                DVector::from_iterator(
                    INPUT_DIM * n,
                    plan.iter().flat_map(|u| u.iter().copied().collect::<Vec<_>>()),
                )
            }
            None => self.static_warm_start(stance_masks),
        };
        let solution = qp::solve(&problem, Some(&warm))?;
        if solution.status == QpStatus::Infeasible {
            return Err(MpcError::SolverInfeasible);
        }

        let grfs: Vec<SVector<f64, INPUT_DIM>> = (0..n)
            .map(|k| {
                SVector::from_column_slice(
                    &solution.y.as_slice()[k * INPUT_DIM..(k + 1) * INPUT_DIM],
                )
            })
            .collect();
        // Adjusted predictions: the model recursion stays unadjusted, each
        // step's forecast shift applies to that step alone.
        let mut predicted_states = Vec::with_capacity(n);
        let mut x_vec = x_measured.to_vector();
        for k in 0..n {
            x_vec = dynamics.a_mat * x_vec + dynamics.b_mat * grfs[k];
            predicted_states.push(RobotState::from_vector(&(x_vec + gamma[k])));
        }

        self.prev_solution = Some(solution.y.clone());
        self.held_grfs = grfs[0];
        Ok(MpcOutput {
            grfs,
            predicted_states,
            compensation: first_forecast,
            status: solution.status,
            iterations: solution.iterations,
            kkt_residual: solution.kkt_residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_model::{static_input_baseline, ErrorModelConfig, ErrorSample};
    use crate::srb::GRAVITY;
    use nalgebra::Matrix3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn test_params() -> ModelParams {
        ModelParams {
            mass: 23.7,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.35, 1.3, 1.5)),
            foot_positions: [
                Vector3::new(0.39, 0.185, -0.38),
                Vector3::new(0.39, -0.185, -0.38),
                Vector3::new(-0.39, 0.185, -0.38),
                Vector3::new(-0.39, -0.185, -0.38),
            ],
        }
    }

    fn standing_state(height: f64) -> RobotState {
        RobotState {
            p: Vector3::new(0.0, 0.0, height),
            ..RobotState::default()
        }
    }

    fn diagonal_masks(n: usize) -> Vec<[bool; 4]> {
        vec![[true, false, false, true]; n]
    }

    #[test]
    fn zero_command_gives_constant_reference() {
        let config = MpcConfig::default();
        let x0 = standing_state(0.38);
        let r = build_reference(&BodyCommand::hold(0.38), &x0, &config);
        assert_eq!(r.states().len(), 13);
        for s in r.states() {
            assert_eq!(*s, r.states()[0]);
            assert_eq!(s.p.z, 0.38);
        }
    }

    #[test]
    fn forward_command_integrates_position() {
        let config = MpcConfig::default();
        let x0 = standing_state(0.38);
        let mut cmd = BodyCommand::hold(0.38);
        cmd.velocity = Vector2::new(0.5, 0.0);
        let r = build_reference(&cmd, &x0, &config);
        for (k, s) in r.states().iter().enumerate() {
            assert!((s.p.x - 0.5 * config.dt * k as f64).abs() < 1e-15);
            assert_eq!(s.v.x, 0.5);
        }
    }

    #[test]
    fn yaw_rate_command_integrates_heading() {
        let config = MpcConfig::default();
        let mut x0 = standing_state(0.38);
        x0.theta.z = 0.3;
        let mut cmd = BodyCommand::hold(0.38);
        cmd.yaw_rate = 0.7;
        let r = build_reference(&cmd, &x0, &config);
        for (k, s) in r.states().iter().enumerate() {
            assert!((s.theta.z - (0.3 + 0.7 * config.dt * k as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_step_condensation_matches_hand_written_qp() {
        let mut config = MpcConfig::default();
        config.horizon = 1;
        let dynamics = discrete_dynamics(0.0, &test_params(), config.dt).unwrap();
        let x0 = standing_state(0.35);
        let reference = build_reference(&BodyCommand::hold(0.38), &x0, &config);
        let gamma = [SVector::<f64, STATE_DIM>::zeros()];
        let masks = diagonal_masks(1);
        let qp = condense(&dynamics, &gamma, &x0, &reference, &masks, &config).unwrap();

        // Direct 1-step problem: H = 2 (B'QB + R), f = 2 B'Q (A x0 - ref).
        let a = DMatrix::from_iterator(13, 13, dynamics.a_mat.iter().copied());
        let b = DMatrix::from_iterator(13, 12, dynamics.b_mat.iter().copied());
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(
            config.state_weights.as_slice(),
        ));
        let h_oracle = (&b.transpose() * &q * &b) * 2.0
            + DMatrix::identity(12, 12) * (2.0 * config.input_weight);
        let resid = &a * DVector::from_column_slice(x0.to_vector().as_slice())
            - DVector::from_column_slice(reference.states()[1].to_vector().as_slice());
        let f_oracle = (&b.transpose() * &q * &resid) * 2.0;
        assert!((&qp.h - &h_oracle).amax() < 1e-10, "H mismatch");
        assert!((&qp.f - &f_oracle).amax() < 1e-10, "f mismatch");
        // One stance pair: 2 legs x 5 rows, 2 swing legs x 3 equality rows.
        assert_eq!(qp.a_ineq.nrows(), 10);
        assert_eq!(qp.a_eq.nrows(), 6);
    }

    #[test]
    fn zero_compensation_is_bitwise_baseline() {
        let config = MpcConfig::default();
        let dynamics = discrete_dynamics(0.1, &test_params(), config.dt).unwrap();
        let x0 = standing_state(0.37);
        let reference = build_reference(&BodyCommand::hold(0.38), &x0, &config);
        let masks = diagonal_masks(config.horizon);
        let zeros = vec![SVector::<f64, STATE_DIM>::zeros(); config.horizon];
        let qp1 = condense(&dynamics, &zeros, &x0, &reference, &masks, &config).unwrap();
        let qp2 = condense(&dynamics, &zeros, &x0, &reference, &masks, &config).unwrap();
        assert!(qp1
            .h
            .iter()
            .zip(qp2.h.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(qp1
            .f
            .iter()
            .zip(qp2.f.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn constant_height_compensation_equals_shifted_reference() {
        // A per-step height adjustment delta shifts each step's costed
        // state by exactly delta, which is the same QP as lowering the
        // reference height by delta at every step. The adjustment must NOT
        // compound along the horizon.
        let mut config = MpcConfig::default();
        config.horizon = 2;
        let delta = 0.01;
        let dynamics = discrete_dynamics(0.0, &test_params(), config.dt).unwrap();
        let x0 = standing_state(0.38);
        let reference = build_reference(&BodyCommand::hold(0.38), &x0, &config);
        let masks = diagonal_masks(2);

        let mut gamma = vec![SVector::<f64, STATE_DIM>::zeros(); 2];
        gamma[0][5] = delta;
        gamma[1][5] = delta;
        let compensated =
            condense(&dynamics, &gamma, &x0, &reference, &masks, &config).unwrap();

        let mut shifted = reference.clone();
        shifted.states[1].p.z -= delta;
        shifted.states[2].p.z -= delta;
        let zeros = vec![SVector::<f64, STATE_DIM>::zeros(); 2];
        let baseline = condense(&dynamics, &zeros, &x0, &shifted, &masks, &config).unwrap();

        assert!((&compensated.f - &baseline.f).amax() < 1e-12);
        assert!(compensated
            .h
            .iter()
            .zip(baseline.h.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn linear_term_is_linear_in_compensation() {
        let config = MpcConfig::default();
        let n = config.horizon;
        let dynamics = discrete_dynamics(0.2, &test_params(), config.dt).unwrap();
        let x0 = standing_state(0.36);
        let reference = build_reference(&BodyCommand::hold(0.38), &x0, &config);
        let masks = diagonal_masks(n);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 0.02).unwrap();
        let g1: Vec<SVector<f64, STATE_DIM>> = (0..n)
            .map(|_| SVector::from_fn(|_, _| normal.sample(&mut rng)))
            .collect();
        let g2: Vec<SVector<f64, STATE_DIM>> = (0..n)
            .map(|_| SVector::from_fn(|_, _| normal.sample(&mut rng)))
            .collect();
        let sum: Vec<SVector<f64, STATE_DIM>> =
            g1.iter().zip(g2.iter()).map(|(a, b)| a + b).collect();
        let zeros = vec![SVector::<f64, STATE_DIM>::zeros(); n];

        let build = |g: &[SVector<f64, STATE_DIM>]| {
            condense(&dynamics, g, &x0, &reference, &masks, &config).unwrap()
        };
        let f0 = build(&zeros).f;
        let f1 = build(&g1).f - &f0;
        let f2 = build(&g2).f - &f0;
        let f12 = build(&sum).f - &f0;
        assert!((&f12 - (&f1 + &f2)).amax() < 1e-9);
        assert!(build(&g1)
            .h
            .iter()
            .zip(build(&zeros).h.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn hover_tick_splits_weight_between_stance_legs() {
        let config = MpcConfig::default();
        let params = test_params();
        let mut controller = MpcController::new(config.clone(), params.clone()).unwrap();
        let x0 = standing_state(0.38);
        let out = controller
            .control_tick(
                &x0,
                &BodyCommand::hold(0.38),
                &diagonal_masks(config.horizon),
                None,
            )
            .unwrap();
        assert_eq!(out.status, QpStatus::Solved);
        // The optimum front-loads a little force because nothing beyond the
        // horizon penalises a sagging tail; the applied first step still
        // sits within a few percent of the static share m g / 2.
        let expect = params.mass * GRAVITY / 2.0;
        let first = out.grfs[0];
        for leg in [0, 3] {
            let fz = first[3 * leg + 2];
            assert!(
                (fz - expect).abs() < 0.025 * expect,
                "leg {leg} fz {fz} vs {expect}"
            );
        }
        assert!((first[2] - first[11]).abs() < 1e-9, "diagonal pair asymmetric");
        for leg in [1, 2] {
            for axis in 0..3 {
                assert!(first[3 * leg + axis].abs() < 1e-9, "swing leg {leg} loaded");
            }
        }
        // Level near the front of the horizon; the free tail may sag.
        for s in &out.predicted_states[..6] {
            assert!((s.p.z - 0.38).abs() < 2e-3);
        }
        for s in &out.predicted_states {
            assert!((s.p.z - 0.38).abs() < 1.2e-2);
            assert!(s.theta.x.abs() < 1e-6 && s.theta.y.abs() < 1e-6);
        }
    }

    #[test]
    fn solved_forces_respect_friction_pyramid() {
        let mut config = MpcConfig::default();
        config.mu = 0.4;
        let mut controller = MpcController::new(config.clone(), test_params()).unwrap();
        let mut x0 = standing_state(0.34);
        x0.v = Vector3::new(0.3, -0.2, 0.1);
        x0.theta = Vector3::new(0.05, -0.04, 0.2);
        let mut cmd = BodyCommand::hold(0.38);
        cmd.velocity = Vector2::new(0.4, 0.0);
        let out = controller
            .control_tick(&x0, &cmd, &diagonal_masks(config.horizon), None)
            .unwrap();
        for (k, u) in out.grfs.iter().enumerate() {
            for leg in 0..4 {
                let (fx, fy, fz) = (u[3 * leg], u[3 * leg + 1], u[3 * leg + 2]);
                if [true, false, false, true][leg] {
                    assert!(fz >= -1e-6 && fz <= config.fz_bounds.1 + 1e-6);
                    assert!(fx.abs() <= config.mu * fz + 1e-6, "step {k} leg {leg}");
                    assert!(fy.abs() <= config.mu * fz + 1e-6, "step {k} leg {leg}");
                } else {
                    assert!(fx.abs() + fy.abs() + fz.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn repeated_ticks_are_bitwise_deterministic() {
        let run = || {
            let config = MpcConfig::default();
            let mut controller = MpcController::new(config.clone(), test_params()).unwrap();
            let mut x = standing_state(0.37);
            x.v.x = 0.1;
            let mut bits = Vec::new();
            for _ in 0..3 {
                let out = controller
                    .control_tick(
                        &x,
                        &BodyCommand::hold(0.38),
                        &diagonal_masks(config.horizon),
                        None,
                    )
                    .unwrap();
                bits.extend(out.grfs[0].iter().map(|v| v.to_bits()));
            }
            bits
        };
        assert_eq!(run(), run());
    }

    /// Manager preloaded with a persistent positive height error (robot
    /// sitting low) whose forecast is therefore ~= the offset.
    fn manager_with_height_offset(offset: f64) -> ErrorModelManager {
        let mut cfg = ErrorModelConfig::new(static_input_baseline(23.7));
        cfg.min_fit_samples = 300;
        cfg.orders = Some((1, 0));
        cfg.force_zero_c = true;
        let mut manager = ErrorModelManager::new(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for t in 0..420u64 {
            let mut e = SVector::<f64, ERROR_DIM>::zeros();
            for i in 0..3 {
                e[i] = 1e-4 * normal.sample(&mut rng);
            }
            e[3] = offset + 5e-4 * normal.sample(&mut rng);
            manager
                .record(ErrorSample {
                    e,
                    u: SVector::zeros(),
                    tick: t,
                })
                .unwrap();
        }
        assert!(manager.compensation_ready(), "offset model must be ready");
        manager
    }

    #[test]
    fn persistent_low_height_forecast_raises_vertical_forces() {
        let config = MpcConfig::default();
        let params = test_params();
        let x0 = standing_state(0.38);
        let cmd = BodyCommand::hold(0.38);
        let masks = diagonal_masks(config.horizon);

        let manager = manager_with_height_offset(0.012);
        let mut compensated = MpcController::new(config.clone(), params.clone()).unwrap();
        let mut baseline = MpcController::new(config.clone(), params.clone()).unwrap();

        // First tick seeds the previous plan; compensation kicks in on the
        // second tick once a plan exists to forecast against.
        let b0 = baseline.control_tick(&x0, &cmd, &masks, None).unwrap();
        let c0 = compensated
            .control_tick(&x0, &cmd, &masks, Some(&manager))
            .unwrap();
        assert_eq!(c0.compensation, SVector::<f64, ERROR_DIM>::zeros());
        assert_eq!(
            c0.grfs[0]
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>(),
            b0.grfs[0].iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            "no-plan tick must equal baseline exactly"
        );

        let b1 = baseline.control_tick(&x0, &cmd, &masks, None).unwrap();
        let c1 = compensated
            .control_tick(&x0, &cmd, &masks, Some(&manager))
            .unwrap();
        assert!(
            c1.compensation[3] > 0.008,
            "forecast {} should be near the offset",
            c1.compensation[3]
        );
        let sum_b: f64 = [0, 3].iter().map(|leg| b1.grfs[0][3 * leg + 2]).sum();
        let sum_c: f64 = [0, 3].iter().map(|leg| c1.grfs[0][3 * leg + 2]).sum();
        assert!(
            sum_c > sum_b + 1.0,
            "compensated vertical force {sum_c} not above baseline {sum_b}"
        );
    }

    #[test]
    fn cold_manager_equals_pure_baseline_over_many_ticks() {
        let config = MpcConfig::default();
        let params = test_params();
        // Manager exists but never reaches its first fit.
        let mut cfg = ErrorModelConfig::new(static_input_baseline(23.7));
        cfg.min_fit_samples = 10_000;
        let mut manager = ErrorModelManager::new(cfg);

        let mut with_manager = MpcController::new(config.clone(), params.clone()).unwrap();
        let mut without = MpcController::new(config.clone(), params).unwrap();
        let masks = diagonal_masks(config.horizon);
        let mut x = standing_state(0.36);
        for t in 0..5u64 {
            manager
                .record(ErrorSample {
                    e: SVector::from_column_slice(&[1e-3, 0.0, 0.0, 0.02]),
                    u: SVector::zeros(),
                    tick: t,
                })
                .unwrap();
            let a = with_manager
                .control_tick(&x, &BodyCommand::hold(0.38), &masks, Some(&manager))
                .unwrap();
            let b = without
                .control_tick(&x, &BodyCommand::hold(0.38), &masks, None)
                .unwrap();
            for (u, v) in a.grfs.iter().zip(b.grfs.iter()) {
                assert!(u.iter().zip(v.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
            x.p.z += 1e-4; // drift the state a little each tick
        }
    }

    #[test]
    fn compensation_disabled_ignores_ready_model() {
        let mut config = MpcConfig::default();
        config.compensation_enabled = false;
        let params = test_params();
        let manager = manager_with_height_offset(0.015);
        let masks = diagonal_masks(config.horizon);
        let x0 = standing_state(0.38);
        let cmd = BodyCommand::hold(0.38);

        let mut with_model = MpcController::new(config.clone(), params.clone()).unwrap();
        let mut without = MpcController::new(config, params).unwrap();
        for _ in 0..3 {
            let a = with_model
                .control_tick(&x0, &cmd, &masks, Some(&manager))
                .unwrap();
            let b = without.control_tick(&x0, &cmd, &masks, None).unwrap();
            assert_eq!(a.compensation, SVector::<f64, ERROR_DIM>::zeros());
            for (u, v) in a.grfs.iter().zip(b.grfs.iter()) {
                assert!(u.iter().zip(v.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
        }
    }

    #[test]
    fn shifted_plan_drops_first_and_repeats_last() {
        let prev = DVector::from_fn(36, |i, _| i as f64); // horizon 3
        let plan = MpcController::shifted_plan(&prev, 3);
        assert_eq!(plan[0][0], 12.0);
        assert_eq!(plan[1][0], 24.0);
        assert_eq!(plan[2][0], 24.0); // last repeated
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let config = MpcConfig::default();
        let mut controller = MpcController::new(config.clone(), test_params()).unwrap();
        let err = controller.control_tick(
            &standing_state(0.38),
            &BodyCommand::hold(0.38),
            &diagonal_masks(3), // wrong length
            None,
        );
        assert!(matches!(err, Err(MpcError::DimensionMismatch(_))));

        let mut bad = MpcConfig::default();
        bad.horizon = 0;
        assert!(MpcController::new(bad, test_params()).is_err());
        let mut negative = MpcConfig::default();
        negative.state_weights[2] = -1.0;
        assert!(MpcController::new(negative, test_params()).is_err());
    }
}
