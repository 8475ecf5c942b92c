//! Contact-force constraints for one horizon step.
//!
//! Forces are stacked `[f1x, f1y, f1z, ..., f4x, f4y, f4z]`. Stance feet get
//! a linearised friction pyramid and vertical-force bounds; swing feet are
//! pinned to zero force through equality rows.

use nalgebra::{DMatrix, DVector};

/// Constraint block for a single 12-dimensional force step.
#[derive(Debug, Clone)]
pub struct StepConstraints {
    pub a_ineq: DMatrix<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

/// Builds the constraint block for one step of the force schedule.
///
/// Per stance foot (mask true): four pyramid rows `|fx| <= mu fz`,
/// `|fy| <= mu fz` and one two-sided row `fz_min <= fz <= fz_max`. Per swing
/// foot: three equality rows forcing the whole contact force to zero.
pub fn build_friction_constraints(
    mu: f64,
    stance_mask: [bool; 4],
    fz_bounds: (f64, f64),
) -> StepConstraints {
    assert!(mu > 0.0, "friction coefficient must be positive");
    let (fz_min, fz_max) = fz_bounds;
    assert!(
        fz_max > fz_min && fz_min >= 0.0,
        "vertical force bounds must satisfy fz_max > fz_min >= 0"
    );

    let n_stance = stance_mask.iter().filter(|&&s| s).count();
    let n_swing = 4 - n_stance;
    let mut a_ineq = DMatrix::zeros(n_stance * 5, 12);
    let mut lo = DVector::zeros(n_stance * 5);
    let mut hi = DVector::zeros(n_stance * 5);
    let mut a_eq = DMatrix::zeros(n_swing * 3, 12);
    let b_eq = DVector::zeros(n_swing * 3);

    let mut ineq_row = 0;
    let mut eq_row = 0;
    for (leg, &stance) in stance_mask.iter().enumerate() {
        let col = leg * 3;
        if stance {
            // fx - mu fz <= 0; -fx - mu fz <= 0; same for fy.
            for (axis, sign) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
                a_ineq[(ineq_row, col + axis)] = sign;
                a_ineq[(ineq_row, col + 2)] = -mu;
                lo[ineq_row] = f64::NEG_INFINITY;
                hi[ineq_row] = 0.0;
                ineq_row += 1;
            }
            a_ineq[(ineq_row, col + 2)] = 1.0;
            lo[ineq_row] = fz_min;
            hi[ineq_row] = fz_max;
            ineq_row += 1;
        } else {
            for axis in 0..3 {
                a_eq[(eq_row, col + axis)] = 1.0;
                eq_row += 1;
            }
        }
    }

    StepConstraints { a_ineq, lo, hi, a_eq, b_eq }
}
