//! Periodic stance/swing scheduling.

use serde::{Deserialize, Serialize};

/// Cyclic gait description: each leg is in stance while its phase, offset
/// from the global gait phase, lies inside the duty window.
///
/// Legs are ordered front-left, front-right, rear-left, rear-right. The
/// default is a trot: diagonal pairs in anti-phase with a 50% duty factor,
/// so exactly two legs support the body at every instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSchedule {
    /// Full gait cycle duration (s).
    pub period: f64,
    /// Fraction of the cycle each leg spends in stance.
    pub duty: f64,
    /// Per-leg phase offsets in cycles.
    pub offsets: [f64; 4],
}

impl Default for GaitSchedule {
    fn default() -> Self {
        Self::trot(0.5)
    }
}

impl GaitSchedule {
    /// Trot with the given period: front-left/rear-right lead,
    /// front-right/rear-left in anti-phase, duty factor one half.
    pub fn trot(period: f64) -> Self {
        Self {
            period,
            duty: 0.5,
            offsets: [0.0, 0.5, 0.5, 0.0],
        }
    }

    /// All four legs permanently in stance.
    pub fn stand() -> Self {
        Self {
            period: 1.0,
            duty: 1.0,
            offsets: [0.0; 4],
        }
    }

    /// Phase of one leg in [0, 1).
    fn phase(&self, time: f64, leg: usize) -> f64 {
        let raw = time / self.period + self.offsets[leg];
        raw - raw.floor()
    }

    pub fn in_stance(&self, time: f64, leg: usize) -> bool {
        // duty = 1 must never drop a leg to rounding.
        self.duty >= 1.0 || self.phase(time, leg) < self.duty
    }

    pub fn stance_mask(&self, time: f64) -> [bool; 4] {
        [
            self.in_stance(time, 0),
            self.in_stance(time, 1),
            self.in_stance(time, 2),
            self.in_stance(time, 3),
        ]
    }

    /// Stance masks at the start of each of `n` controller intervals.
    pub fn horizon_masks(&self, time: f64, dt: f64, n: usize) -> Vec<[bool; 4]> {
        (0..n).map(|k| self.stance_mask(time + k as f64 * dt)).collect()
    }

    /// Seconds until the next stance/swing transition of any leg after
    /// `time`, used by tests to probe boundary behaviour.
    pub fn time_to_next_transition(&self, time: f64) -> f64 {
        let mut best = f64::INFINITY;
        for leg in 0..4 {
            let phase = self.phase(time, leg);
            for edge in [0.0, self.duty, 1.0] {
                let ahead = edge - phase;
                if ahead > 1e-12 {
                    best = best.min(ahead * self.period);
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trot_always_has_exactly_two_stance_legs() {
        let gait = GaitSchedule::trot(0.5);
        for i in 0..5000 {
            let t = i as f64 * 1e-3;
            let mask = gait.stance_mask(t);
            assert_eq!(
                mask.iter().filter(|s| **s).count(),
                2,
                "bad stance count at t = {t}"
            );
            // Diagonal pairing: front-left moves with rear-right.
            assert_eq!(mask[0], mask[3]);
            assert_eq!(mask[1], mask[2]);
            assert_ne!(mask[0], mask[1]);
        }
    }

    #[test]
    fn stance_duration_equals_duty_times_period() {
        let gait = GaitSchedule::trot(0.5);
        let dt = 1e-3;
        let steps = (gait.period / dt).round() as usize;
        for leg in 0..4 {
            let in_stance = (0..steps)
                .filter(|i| gait.in_stance(*i as f64 * dt, leg))
                .count();
            let duration = in_stance as f64 * dt;
            assert!(
                (duration - gait.duty * gait.period).abs() < 1e-12,
                "leg {leg} stance duration {duration}"
            );
        }
    }

    #[test]
    fn standing_gait_never_lifts_a_leg() {
        let gait = GaitSchedule::stand();
        for i in 0..100 {
            assert_eq!(gait.stance_mask(i as f64 * 0.037), [true; 4]);
        }
    }

    #[test]
    fn horizon_masks_sample_future_transitions() {
        let gait = GaitSchedule::trot(0.5);
        // From t = 0.2 with dt = 0.03, the diagonal swap at t = 0.25 lands
        // inside the horizon.
        let masks = gait.horizon_masks(0.2, 0.03, 4);
        assert_eq!(masks[0], [true, false, false, true]);
        assert_eq!(masks[1], [true, false, false, true]); // t = 0.23
        assert_eq!(masks[2], [false, true, true, false]); // t = 0.26
        assert_eq!(masks[3], [false, true, true, false]);
    }

    #[test]
    fn transition_probe_finds_phase_edges() {
        let gait = GaitSchedule::trot(0.5);
        let dt = gait.time_to_next_transition(0.0);
        assert!((dt - 0.25).abs() < 1e-9);
        let dt = gait.time_to_next_transition(0.24);
        assert!((dt - 0.01).abs() < 1e-9);
    }
}
