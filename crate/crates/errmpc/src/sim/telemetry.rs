//! Per-tick telemetry records and the summary statistics computed from them.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

/// How the controller produced this tick's forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveLabel {
    /// QP solved to tolerance.
    Solved,
    /// Iteration cap hit; the best iterate was applied.
    MaxIterations,
    /// QP infeasible; the previous tick's forces were held.
    InfeasibleHeld,
}

impl SolveLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveLabel::Solved => "solved",
            SolveLabel::MaxIterations => "max_iterations",
            SolveLabel::InfeasibleHeld => "infeasible_held",
        }
    }
}

/// One controller tick as written to the telemetry log.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub time: f64,
    /// Measured state fed to the controller (13 entries, gravity slot last).
    pub measured: [f64; 13],
    /// Reference state the tracking error is measured against.
    pub reference: [f64; 13],
    /// Error forecast applied this tick (roll, pitch, yaw, height).
    pub compensation: [f64; 4],
    /// Commanded ground reaction forces.
    pub grfs: [f64; 12],
    pub status: SolveLabel,
    pub iterations: usize,
}

pub const TELEMETRY_HEADER: &str = "time,m1,m2,m3,m4,m5,m6,m7,m8,m9,m10,m11,m12,m13,\
r1,r2,r3,r4,r5,r6,r7,r8,r9,r10,r11,r12,r13,c1,c2,c3,c4,\
u1,u2,u3,u4,u5,u6,u7,u8,u9,u10,u11,u12,status,iterations";

/// Renders records as CSV. Floats use the shortest round-trip form so a
/// repeated run serializes byte-identically.
pub fn telemetry_to_csv(records: &[TelemetryRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 256 + 256);
    out.push_str(TELEMETRY_HEADER);
    out.push('\n');
    for rec in records {
        write!(out, "{}", rec.time).unwrap();
        for v in &rec.measured {
            write!(out, ",{v}").unwrap();
        }
        for v in &rec.reference {
            write!(out, ",{v}").unwrap();
        }
        for v in &rec.compensation {
            write!(out, ",{v}").unwrap();
        }
        for v in &rec.grfs {
            write!(out, ",{v}").unwrap();
        }
        write!(out, ",{},{}", rec.status.as_str(), rec.iterations).unwrap();
        out.push('\n');
    }
    out
}

/// Summary statistics over the post-warmup window of a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RunMetrics {
    /// Mean measured body height (m).
    pub mean_height: f64,
    /// Peak-to-peak measured body height (m); the vibration measure.
    pub peak_to_peak_height: f64,
    /// Mean absolute tracking error per channel (roll, pitch, yaw, height).
    pub mae: [f64; 4],
    /// Mean squared tracking error per channel.
    pub mse: [f64; 4],
    pub fell_over: bool,
    /// Records that entered the statistics.
    pub samples: usize,
    /// Ticks where the QP had to be held or capped.
    pub degraded_ticks: usize,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no telemetry records after the {0} s warmup window")]
    EmptyWindow(f64),
}

/// Indices of the error channels inside the 13-entry state layout.
const CHANNEL_STATE_INDEX: [usize; 4] = [0, 1, 2, 5];

/// Computes run statistics, skipping the first `warmup` seconds so the
/// stand-up transient does not pollute steady-state numbers.
pub fn compute_metrics(
    records: &[TelemetryRecord],
    warmup: f64,
    fell_over: bool,
) -> Result<RunMetrics, MetricsError> {
    let window: Vec<&TelemetryRecord> =
        records.iter().filter(|r| r.time >= warmup).collect();
    if window.is_empty() {
        return Err(MetricsError::EmptyWindow(warmup));
    }
    let n = window.len() as f64;
    let mut mean_height = 0.0;
    let mut min_h = f64::INFINITY;
    let mut max_h = f64::NEG_INFINITY;
    let mut mae = [0.0; 4];
    let mut mse = [0.0; 4];
    let mut degraded = 0;
    for rec in &window {
        let h = rec.measured[5];
        mean_height += h;
        min_h = min_h.min(h);
        max_h = max_h.max(h);
        for (c, &idx) in CHANNEL_STATE_INDEX.iter().enumerate() {
            let e = rec.reference[idx] - rec.measured[idx];
            mae[c] += e.abs();
            mse[c] += e * e;
        }
        if rec.status != SolveLabel::Solved {
            degraded += 1;
        }
    }
    mean_height /= n;
    for c in 0..4 {
        mae[c] /= n;
        mse[c] /= n;
    }
    Ok(RunMetrics {
        mean_height,
        peak_to_peak_height: max_h - min_h,
        mae,
        mse,
        fell_over,
        samples: window.len(),
        degraded_ticks: degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record_at(time: f64, height: f64, height_ref: f64) -> TelemetryRecord {
        let mut measured = [0.0; 13];
        measured[5] = height;
        measured[12] = 1.0;
        let mut reference = [0.0; 13];
        reference[5] = height_ref;
        reference[12] = 1.0;
        TelemetryRecord {
            time,
            measured,
            reference,
            compensation: [0.0; 4],
            grfs: [0.0; 12],
            status: SolveLabel::Solved,
            iterations: 3,
        }
    }

    #[test]
    fn constant_offset_gives_matching_mae_and_mse() {
        let records: Vec<_> = (0..300)
            .map(|k| record_at(k as f64 * 0.03, 0.37, 0.38))
            .collect();
        let m = compute_metrics(&records, 2.0, false).unwrap();
        assert!((m.mae[3] - 0.01).abs() < 1e-12);
        assert!((m.mse[3] - 1e-4).abs() < 1e-12);
        assert!((m.mean_height - 0.37).abs() < 1e-12);
        assert!(m.peak_to_peak_height.abs() < 1e-12);
        assert_eq!(m.samples, 300 - 67); // ticks with time < 2.0 are dropped
    }

    #[test]
    fn sinusoid_peak_to_peak_is_twice_the_amplitude() {
        let amp = 0.004;
        let records: Vec<_> = (0..3000)
            .map(|k| {
                let t = k as f64 * 0.01;
                record_at(t, 0.38 + amp * (2.0 * std::f64::consts::PI * t).sin(), 0.38)
            })
            .collect();
        let m = compute_metrics(&records, 2.0, false).unwrap();
        assert!((m.peak_to_peak_height - 2.0 * amp).abs() < 1e-5);
        assert!((m.mean_height - 0.38).abs() < 1e-5);
    }

    #[test]
    fn metrics_match_an_independent_recompute() {
        // Deterministic pseudo-random-ish records from a hash-like recurrence.
        let mut x = 0.123_f64;
        let mut records = Vec::new();
        for k in 0..500 {
            x = (x * 997.0 + 0.618).fract();
            let mut rec = record_at(k as f64 * 0.03, 0.37 + 0.02 * x, 0.38);
            rec.measured[0] = 0.01 * (x - 0.5);
            rec.reference[2] = 0.3;
            rec.measured[2] = 0.3 + 0.05 * (0.5 - x);
            if k % 97 == 0 {
                rec.status = SolveLabel::MaxIterations;
            }
            records.push(rec);
        }
        let m = compute_metrics(&records, 1.5, false).unwrap();

        let window: Vec<_> = records.iter().filter(|r| r.time >= 1.5).collect();
        let n = window.len() as f64;
        let mean: f64 = window.iter().map(|r| r.measured[5]).sum::<f64>() / n;
        let mae_roll: f64 = window
            .iter()
            .map(|r| (r.reference[0] - r.measured[0]).abs())
            .sum::<f64>()
            / n;
        let mse_yaw: f64 = window
            .iter()
            .map(|r| (r.reference[2] - r.measured[2]).powi(2))
            .sum::<f64>()
            / n;
        let degraded = window
            .iter()
            .filter(|r| r.status != SolveLabel::Solved)
            .count();
        assert!((m.mean_height - mean).abs() < 1e-12);
        assert!((m.mae[0] - mae_roll).abs() < 1e-12);
        assert!((m.mse[2] - mse_yaw).abs() < 1e-12);
        assert_eq!(m.degraded_ticks, degraded);
    }

    #[test]
    fn empty_window_is_reported() {
        let records: Vec<_> = (0..10)
            .map(|k| record_at(k as f64 * 0.03, 0.38, 0.38))
            .collect();
        assert!(matches!(
            compute_metrics(&records, 5.0, false),
            Err(MetricsError::EmptyWindow(_))
        ));
    }

    #[test]
    fn csv_rows_carry_all_columns_in_order() {
        let mut rec = record_at(0.03, 0.379, 0.38);
        rec.grfs[2] = 58.1;
        rec.compensation[3] = -0.002;
        rec.status = SolveLabel::InfeasibleHeld;
        let csv = telemetry_to_csv(&[rec]);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 1 + 13 + 13 + 4 + 12 + 2);
        assert!(header.starts_with("time,m1,"));
        assert!(header.ends_with("status,iterations"));
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 45);
        assert_eq!(fields[0], "0.03");
        assert_eq!(fields[6], "0.379");
        assert_eq!(fields[19], "0.38"); // r6 = reference height
        assert_eq!(fields[30], "-0.002"); // c4
        assert_eq!(fields[33], "58.1"); // u3
        assert_eq!(fields[43], "infeasible_held");
        assert_eq!(fields[44], "3");
    }
}
