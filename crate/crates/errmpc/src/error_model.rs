//! Robot state-error model: a 4-channel time-series wrapper around the
//! generic ARMAV engine.
//!
//! The tracked channels are the desired-minus-measured roll, pitch, yaw and
//! body height, sampled once per control tick together with the commanded
//! ground reaction forces. Forces enter the model through an input term
//! `C (u - baseline)`:
//!
//! ```text
//! e_t - sum Phi_i e_{t-i} = C (u_t - baseline) + a_t - sum Theta_i a_{t-i}
//! ```
//!
//! `C` is estimated jointly with the long autoregressive stage by appending
//! the input deviations as exogenous regressors; the input contribution is
//! then removed from the series and the standard Phi/Theta recovery runs on
//! the input-free remainder. Predictions add the input term back for the
//! planned future forces.
//!
//! [`ErrorModelManager`] owns the sample window, refits on a fixed cadence,
//! and gates compensation behind a residual-whiteness check so the
//! controller falls back to its uncompensated behaviour whenever the model
//! stops explaining the data.

use crate::armav::{
    fit_ar_ls_with_inputs, fit_armav, fraction_outside_band, residual_autocorrelation,
    select_order, ArmavError, ArmavModel, FitDiagnostics, SeriesWindow, DEFAULT_MAX_K,
};
use crate::srb::{INPUT_DIM, STATE_DIM};
use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use std::collections::VecDeque;
use thiserror::Error;

/// Number of tracked error channels: roll, pitch, yaw, body height.
pub const ERROR_DIM: usize = 4;
/// Default ring-buffer capacity (ticks).
pub const DEFAULT_CAPACITY: usize = 2000;
/// Default refit cadence (ticks).
pub const DEFAULT_REFIT_INTERVAL: u64 = 250;
/// Residual autocorrelation lags inspected by the adequacy check.
pub const ADEQUACY_LAGS: usize = 20;
/// Minimum residual count before the rolling adequacy check is meaningful.
pub const ADEQUACY_MIN_RESIDUALS: usize = 100;

#[derive(Debug, Error)]
pub enum ErrorModelError {
    #[error("sample tick {got} does not advance past {last}")]
    NonMonotonicTick { last: u64, got: u64 },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("malformed error log: {0}")]
    MalformedLog(String),
    #[error(transparent)]
    Armav(#[from] ArmavError),
}

/// One tick of error data: the 4-channel state error and the commanded
/// ground reaction forces that were active when it was measured.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSample {
    /// Desired minus measured (roll, pitch, yaw, body height).
    pub e: SVector<f64, ERROR_DIM>,
    /// Commanded GRFs at the same tick (N).
    pub u: SVector<f64, INPUT_DIM>,
    /// Control-cycle index; strictly increasing within a buffer.
    pub tick: u64,
}

/// Fixed-capacity window of the most recent error samples.
#[derive(Debug, Clone)]
pub struct ErrorBuffer {
    samples: VecDeque<ErrorSample>,
    capacity: usize,
    last_tick: Option<u64>,
}

impl ErrorBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            samples: VecDeque::with_capacity(capacity),
            capacity,
            last_tick: None,
        }
    }

    /// Appends a sample, evicting the oldest once at capacity. Ticks must
    /// strictly increase and the data must be finite with angle errors
    /// inside (-pi, pi).
    pub fn push(&mut self, sample: ErrorSample) -> Result<(), ErrorModelError> {
        if let Some(last) = self.last_tick {
            if sample.tick <= last {
                return Err(ErrorModelError::NonMonotonicTick {
                    last,
                    got: sample.tick,
                });
            }
        }
        if !sample.e.iter().chain(sample.u.iter()).all(|v| v.is_finite()) {
            return Err(ErrorModelError::InvalidSample(
                "non-finite entry in error sample".into(),
            ));
        }
        for axis in 0..3 {
            if sample.e[axis].abs() >= std::f64::consts::PI {
                return Err(ErrorModelError::InvalidSample(format!(
                    "angle error {} out of range on channel {axis}",
                    sample.e[axis]
                )));
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.last_tick = Some(sample.tick);
        self.samples.push_back(sample);
        Ok(())
    }

    /// Removes all samples. Tick monotonicity survives the clear: the next
    /// sample must still advance past the last one ever pushed.
    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn samples(&self) -> impl Iterator<Item = &ErrorSample> {
        self.samples.iter()
    }

    /// Error channels as a series window, oldest first.
    pub fn series_window(&self) -> Result<SeriesWindow, ArmavError> {
        let samples = self
            .samples
            .iter()
            .map(|s| DVector::from_column_slice(s.e.as_slice()))
            .collect();
        SeriesWindow::new(samples)
    }

    /// Input deviations `u_t - baseline`, aligned with the series window.
    pub fn input_deviations(&self, baseline: &DVector<f64>) -> Vec<DVector<f64>> {
        self.samples
            .iter()
            .map(|s| DVector::from_column_slice(s.u.as_slice()) - baseline)
            .collect()
    }

    /// Serialises the window as CSV: `tick,e1..e4,u1..u12`, one row per tick.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "tick,e1,e2,e3,e4,u1,u2,u3,u4,u5,u6,u7,u8,u9,u10,u11,u12\n",
        );
        use std::fmt::Write;
        for s in &self.samples {
            write!(out, "{}", s.tick).unwrap();
            for v in s.e.iter() {
                write!(out, ",{v}").unwrap();
            }
            for v in s.u.iter() {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses a CSV produced by [`ErrorBuffer::to_csv`]. The capacity of the
    /// returned buffer is at least the number of rows.
    pub fn from_csv(text: &str, capacity: usize) -> Result<Self, ErrorModelError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| ErrorModelError::MalformedLog("empty log".into()))?;
        if !header.starts_with("tick,") {
            return Err(ErrorModelError::MalformedLog(format!(
                "unexpected header: {header}"
            )));
        }
        let rows: Vec<&str> = lines.collect();
        let mut buffer = Self::new(capacity.max(rows.len()).max(1));
        for (idx, line) in rows.iter().enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 1 + ERROR_DIM + INPUT_DIM {
                return Err(ErrorModelError::MalformedLog(format!(
                    "row {} has {} fields, expected {}",
                    idx + 1,
                    fields.len(),
                    1 + ERROR_DIM + INPUT_DIM
                )));
            }
            let parse = |s: &str| -> Result<f64, ErrorModelError> {
                s.trim().parse().map_err(|_| {
                    ErrorModelError::MalformedLog(format!("bad number {s:?} in row {}", idx + 1))
                })
            };
            let tick = fields[0].trim().parse().map_err(|_| {
                ErrorModelError::MalformedLog(format!("bad tick {:?} in row {}", fields[0], idx + 1))
            })?;
            let mut e = SVector::<f64, ERROR_DIM>::zeros();
            for (i, f) in fields[1..1 + ERROR_DIM].iter().enumerate() {
                e[i] = parse(f)?;
            }
            let mut u = SVector::<f64, INPUT_DIM>::zeros();
            for (i, f) in fields[1 + ERROR_DIM..].iter().enumerate() {
                u[i] = parse(f)?;
            }
            buffer.push(ErrorSample { e, u, tick })?;
        }
        Ok(buffer)
    }
}

/// Constant 13x4 matrix scattering the 4 error channels into the state
/// vector: unit entries at the Euler-angle rows (0, 1, 2) and the vertical
/// position row (5).
#[derive(Debug, Clone)]
pub struct SelectMatrix {
    s: SMatrix<f64, STATE_DIM, ERROR_DIM>,
}

impl Default for SelectMatrix {
    fn default() -> Self {
        Self::new()
    }
}

impl SelectMatrix {
    pub fn new() -> Self {
        let mut s = SMatrix::<f64, STATE_DIM, ERROR_DIM>::zeros();
        s[(0, 0)] = 1.0;
        s[(1, 1)] = 1.0;
        s[(2, 2)] = 1.0;
        s[(5, 3)] = 1.0;
        Self { s }
    }

    pub fn matrix(&self) -> &SMatrix<f64, STATE_DIM, ERROR_DIM> {
        &self.s
    }

    /// Scatters one 4-channel error into a 13-vector.
    pub fn apply(&self, e: &DVector<f64>) -> SVector<f64, STATE_DIM> {
        assert_eq!(e.len(), ERROR_DIM);
        let mut out = SVector::<f64, STATE_DIM>::zeros();
        out[0] = e[0];
        out[1] = e[1];
        out[2] = e[2];
        out[5] = e[3];
        out
    }
}

/// ARMAV core plus the estimated force-input map.
#[derive(Debug, Clone)]
pub struct InputAwareErrorModel {
    pub core: ArmavModel,
    /// 4x12 input map `C`.
    pub c_matrix: DMatrix<f64>,
    /// Subtracted from commanded forces before the input term.
    pub input_baseline: DVector<f64>,
}

impl InputAwareErrorModel {
    /// Input contribution `C (u - baseline)` for one force vector.
    fn input_term(&self, u: &SVector<f64, INPUT_DIM>) -> DVector<f64> {
        let dev = DVector::from_column_slice(u.as_slice()) - &self.input_baseline;
        &self.c_matrix * dev
    }

    /// Folds a measured sample into the core buffers and returns the
    /// one-step residual of the input-free series.
    pub fn observe(&mut self, sample: &ErrorSample) -> Result<DVector<f64>, ArmavError> {
        let eps = DVector::from_column_slice(sample.e.as_slice()) - self.input_term(&sample.u);
        self.core.observe(&eps)
    }

    /// Predicts the error over the next `planned_u.len()` ticks, adding the
    /// input term of each planned force vector to the core forecast.
    pub fn predict_errors(
        &self,
        planned_u: &[SVector<f64, INPUT_DIM>],
    ) -> Result<Vec<DVector<f64>>, ArmavError> {
        let base = self.core.predict_k_steps(planned_u.len())?;
        Ok(base
            .into_iter()
            .zip(planned_u.iter())
            .map(|(eps, u)| eps + self.input_term(u))
            .collect())
    }

    /// One-step error forecast, the value handed to a whole-body stage.
    pub fn predict_one_step(
        &self,
        planned_u: &SVector<f64, INPUT_DIM>,
    ) -> Result<DVector<f64>, ArmavError> {
        Ok(self.predict_errors(std::slice::from_ref(planned_u))?.remove(0))
    }

    pub fn is_warm(&self) -> bool {
        self.core.is_warm()
    }
}

/// Fits the input-aware model on the buffered window.
///
/// `C` comes from the long-AR stage with the input deviations appended as
/// exogenous regressors; the input contribution is then subtracted and the
/// standard ARMAV pipeline runs on the remainder. With `force_zero_c` the
/// input term is skipped entirely, which ablates the model to plain ARMAV.
pub fn fit_error_model(
    buffer: &ErrorBuffer,
    n: usize,
    m: usize,
    input_baseline: &DVector<f64>,
    force_zero_c: bool,
) -> Result<(InputAwareErrorModel, FitDiagnostics), ErrorModelError> {
    assert_eq!(input_baseline.len(), INPUT_DIM);
    let window = buffer.series_window()?;
    if force_zero_c {
        let (core, diag) = fit_armav(&window, n, m)?;
        return Ok((
            InputAwareErrorModel {
                core,
                c_matrix: DMatrix::zeros(ERROR_DIM, INPUT_DIM),
                input_baseline: input_baseline.clone(),
            },
            diag,
        ));
    }

    let deviations = buffer.input_deviations(input_baseline);
    let p = n.max(m) + m;
    let (_, c_matrix, _) = fit_ar_ls_with_inputs(&window, p, &deviations)?;

    let input_free: Vec<DVector<f64>> = window
        .samples()
        .iter()
        .zip(deviations.iter())
        .map(|(e, v)| e - &c_matrix * v)
        .collect();
    let (core, diag) = fit_armav(&SeriesWindow::new(input_free)?, n, m)?;
    Ok((
        InputAwareErrorModel {
            core,
            c_matrix,
            input_baseline: input_baseline.clone(),
        },
        diag,
    ))
}

/// Per-step compensation vectors `S e_hat` for the predicted errors.
pub fn compensation_term(
    pred_errors: &[DVector<f64>],
    s: &SelectMatrix,
) -> Vec<SVector<f64, STATE_DIM>> {
    pred_errors.iter().map(|e| s.apply(e)).collect()
}

/// Outcome of a residual-whiteness audit.
#[derive(Debug, Clone)]
pub struct AdequacyReport {
    pub passed: bool,
    /// Fraction of inspected lag autocorrelations outside the band.
    pub outside_fraction: f64,
    /// The two-sided band `2/sqrt(N)` used.
    pub band: f64,
    /// Populated when the check failed.
    pub reason: Option<String>,
}

/// Audits recent one-step residuals: autocorrelations at lags 1..=20 per
/// channel must stay inside the `2/sqrt(N)` band for at least 95% of the
/// inspected lags.
pub fn adequacy_check(recent_residuals: &[DVector<f64>]) -> AdequacyReport {
    let n = recent_residuals.len();
    let band = if n > 0 { 2.0 / (n as f64).sqrt() } else { f64::INFINITY };
    if n < ADEQUACY_MIN_RESIDUALS {
        return AdequacyReport {
            passed: false,
            outside_fraction: 1.0,
            band,
            reason: Some(format!(
                "only {n} residuals, need {ADEQUACY_MIN_RESIDUALS}"
            )),
        };
    }
    match residual_autocorrelation(recent_residuals, ADEQUACY_LAGS) {
        Err(err) => AdequacyReport {
            passed: false,
            outside_fraction: 1.0,
            band,
            reason: Some(err.to_string()),
        },
        Ok(per_channel) => {
            let total: usize = per_channel.iter().map(|rho| rho.len()).sum();
            let outside: f64 = per_channel
                .iter()
                .map(|rho| fraction_outside_band(rho, n) * rho.len() as f64)
                .sum();
            let outside_fraction = if total > 0 { outside / total as f64 } else { 0.0 };
            let passed = outside_fraction <= 0.05;
            AdequacyReport {
                passed,
                outside_fraction,
                band,
                reason: (!passed).then(|| {
                    format!(
                        "{:.1}% of lag autocorrelations outside +-{band:.4}",
                        100.0 * outside_fraction
                    )
                }),
            }
        }
    }
}

/// Knobs for [`ErrorModelManager`].
#[derive(Debug, Clone)]
pub struct ErrorModelConfig {
    pub capacity: usize,
    /// Ticks between refits once a model exists.
    pub refit_interval: u64,
    /// Samples required before the first fit is attempted.
    pub min_fit_samples: usize,
    /// Fixed (n, m) orders, or `None` for F-test order selection.
    pub orders: Option<(usize, usize)>,
    /// Significance level for order selection.
    pub alpha: f64,
    /// Ablation switch: skip the input term, forcing C = 0.
    pub force_zero_c: bool,
    /// Subtracted from commanded forces before regression.
    pub input_baseline: DVector<f64>,
    /// How many recent residuals the rolling adequacy check sees.
    pub residual_window: usize,
}

impl ErrorModelConfig {
    pub fn new(input_baseline: DVector<f64>) -> Self {
        assert_eq!(input_baseline.len(), INPUT_DIM);
        Self {
            capacity: DEFAULT_CAPACITY,
            refit_interval: DEFAULT_REFIT_INTERVAL,
            min_fit_samples: 400,
            orders: Some((2, 1)),
            alpha: 0.95,
            force_zero_c: false,
            input_baseline,
            residual_window: 500,
        }
    }
}

/// The static per-leg share of the robot's weight under a 50%-duty gait:
/// `[0, 0, m g / 4]` per leg. Used as the default input baseline so the
/// regression sees force deviations instead of the large supported-weight
/// DC component.
pub fn static_input_baseline(mass: f64) -> DVector<f64> {
    let mut b = DVector::zeros(INPUT_DIM);
    for leg in 0..4 {
        b[3 * leg + 2] = mass * crate::srb::GRAVITY / 4.0;
    }
    b
}

/// Owns the sample window and the active model: records samples, refits on
/// a cadence, audits residual whiteness, and serves predictions only while
/// the model looks adequate.
#[derive(Debug)]
pub struct ErrorModelManager {
    config: ErrorModelConfig,
    buffer: ErrorBuffer,
    model: Option<InputAwareErrorModel>,
    residuals: VecDeque<DVector<f64>>,
    last_fit_tick: Option<u64>,
    adequate: bool,
    refit_wanted: bool,
    /// Latest adequacy audit, fit-time or rolling.
    pub last_report: Option<AdequacyReport>,
    /// Fits that errored or were rejected while an adequate model served.
    pub failed_refits: usize,
}

impl ErrorModelManager {
    pub fn new(config: ErrorModelConfig) -> Self {
        let buffer = ErrorBuffer::new(config.capacity);
        Self {
            config,
            buffer,
            model: None,
            residuals: VecDeque::new(),
            last_fit_tick: None,
            adequate: false,
            refit_wanted: false,
            last_report: None,
            failed_refits: 0,
        }
    }

    /// Records one tick of error data, updates the active model's buffers,
    /// and runs the refit/adequacy schedule.
    pub fn record(&mut self, sample: ErrorSample) -> Result<(), ErrorModelError> {
        let tick = sample.tick;
        if let Some(model) = self.model.as_mut() {
            if let Ok(residual) = model.observe(&sample) {
                if self.residuals.len() == self.config.residual_window {
                    self.residuals.pop_front();
                }
                self.residuals.push_back(residual);
            }
        }
        self.buffer.push(sample)?;

        // Rolling whiteness audit on the live residual stream. Waits for a
        // full residual window: the sharp 5% band criterion is noisy on
        // short out-of-sample stretches, and a hasty verdict withdraws
        // compensation.
        let audit_fill = self.config.residual_window.max(ADEQUACY_MIN_RESIDUALS);
        if self.model.is_some() && self.residuals.len() >= audit_fill && tick % 50 == 0 {
            let recent: Vec<DVector<f64>> = self.residuals.iter().cloned().collect();
            let report = adequacy_check(&recent);
            if std::env::var_os("ERRMPC_TRACE").is_some() {
                eprintln!(
                    "[audit] tick={tick} passed={} outside={:.4} n={}",
                    report.passed, report.outside_fraction, recent.len()
                );
            }
            if !report.passed {
                self.adequate = false;
                self.refit_wanted = true;
            }
            self.last_report = Some(report);
        }

        let due = match (self.model.is_some(), self.last_fit_tick) {
            (false, _) => self.buffer.len() >= self.config.min_fit_samples,
            (true, Some(last)) => {
                tick.saturating_sub(last) >= self.config.refit_interval
                    || (self.refit_wanted && self.buffer.len() >= self.config.min_fit_samples)
            }
            (true, None) => true,
        };
        if due && self.buffer.len() >= self.config.min_fit_samples {
            self.refit(tick);
        }
        Ok(())
    }

    /// Feeds one sample to the serving model's lag buffers without touching
    /// the fit window, the residual stream or the refit schedule. Callers
    /// use it across known transients (stand-up, compensation engagement):
    /// the transient should not become fitting or audit data, but the
    /// model's forecasts must keep tracking the live state through it.
    pub fn observe_serving(&mut self, sample: &ErrorSample) {
        if let Some(model) = self.model.as_mut() {
            let _ = model.observe(sample);
        }
    }

    /// Fits a fresh model from the current window and swaps it in when the
    /// fit succeeds and its residual diagnostics look white.
    pub fn refit(&mut self, tick: u64) {
        self.last_fit_tick = Some(tick);
        self.refit_wanted = false;
        let orders = match self.config.orders {
            Some(orders) => Some(orders),
            None => self.auto_orders(),
        };
        let Some((n, m)) = orders else {
            self.failed_refits += 1;
            return;
        };
        match fit_error_model(
            &self.buffer,
            n,
            m,
            &self.config.input_baseline,
            self.config.force_zero_c,
        ) {
            Ok((model, diag)) => {
                // Fit-time adequacy from the whole-window residual ACF.
                let total: usize = diag.autocorr.iter().map(|rho| rho.len()).sum();
                let outside: f64 = diag
                    .autocorr
                    .iter()
                    .map(|rho| fraction_outside_band(rho, diag.sample_count) * rho.len() as f64)
                    .sum();
                let outside_fraction = if total > 0 { outside / total as f64 } else { 1.0 };
                let passed = total > 0 && outside_fraction <= 0.05;
                self.last_report = Some(AdequacyReport {
                    passed,
                    outside_fraction,
                    band: 2.0 / (diag.sample_count as f64).sqrt(),
                    reason: (!passed).then(|| {
                        format!(
                            "fit residuals: {:.1}% of lags outside the band",
                            100.0 * outside_fraction
                        )
                    }),
                });
                if std::env::var_os("ERRMPC_TRACE").is_some() {
                    eprintln!(
                        "[refit] tick={tick} passed={passed} outside={outside_fraction:.4} window={}",
                        self.buffer.len()
                    );
                }
                // A rejected candidate never dethrones a serving adequate
                // model: one awkward window (a regime change mid-buffer,
                // say) should not withdraw compensation while the incumbent
                // still explains the live data. The rolling audit above
                // judges the incumbent on its own out-of-sample residuals
                // and remains the only path that stops an adequate model.
                if passed || self.model.is_none() || !self.adequate {
                    self.model = Some(model);
                    self.residuals.clear();
                    self.adequate = passed;
                } else {
                    self.failed_refits += 1;
                }
            }
            Err(_) => {
                self.failed_refits += 1;
            }
        }
    }

    /// Drops the fit window and audit residuals while keeping the serving
    /// model and schedule intact.
    ///
    /// For discontinuous regime changes, such as compensation engaging:
    /// samples from before the change describe a different closed-loop
    /// error process, and a window straddling it looks non-white to every
    /// candidate fit.
    pub fn reset_window(&mut self) {
        self.buffer.clear();
        self.residuals.clear();
    }

    /// Order selection on the input-free series: stage C with a fixed-order
    /// exogenous regression, subtract, and run the F-test ladder.
    fn auto_orders(&self) -> Option<(usize, usize)> {
        let window = self.buffer.series_window().ok()?;
        let series = if self.config.force_zero_c {
            window
        } else {
            let deviations = self.buffer.input_deviations(&self.config.input_baseline);
            let (_, c, _) = fit_ar_ls_with_inputs(&window, 4, &deviations).ok()?;
            let input_free: Vec<DVector<f64>> = window
                .samples()
                .iter()
                .zip(deviations.iter())
                .map(|(e, v)| e - &c * v)
                .collect();
            SeriesWindow::new(input_free).ok()?
        };
        let selection = select_order(&series, self.config.alpha, DEFAULT_MAX_K).ok()?;
        Some((selection.n, selection.m))
    }

    /// True when predictions are served: a warm model whose latest adequacy
    /// audit passed.
    pub fn compensation_ready(&self) -> bool {
        self.adequate && self.model.as_ref().is_some_and(|m| m.is_warm())
    }

    /// Error forecast for the planned forces, or `None` while compensation
    /// is unavailable (cold, unfitted or inadequate model).
    pub fn predict(&self, planned_u: &[SVector<f64, INPUT_DIM>]) -> Option<Vec<DVector<f64>>> {
        if !self.compensation_ready() {
            return None;
        }
        self.model.as_ref()?.predict_errors(planned_u).ok()
    }

    /// Per-step, per-channel predictive R-squared of the served model over
    /// a `k`-step horizon, or `None` while compensation is unavailable.
    ///
    /// Forecast quality decays with lead time; acting on a forecast whose
    /// lead exhausts the model's memory injects noise rather than
    /// correction, so the controller scales each horizon step's
    /// compensation by these weights.
    pub fn forecast_confidence(&self, k: usize) -> Option<Vec<DVector<f64>>> {
        if !self.compensation_ready() {
            return None;
        }
        Some(self.model.as_ref()?.core.forecast_explained_variance(k))
    }

    pub fn model(&self) -> Option<&InputAwareErrorModel> {
        self.model.as_ref()
    }

    pub fn buffer(&self) -> &ErrorBuffer {
        &self.buffer
    }
}
