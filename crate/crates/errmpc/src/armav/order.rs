//! Automatic order selection by an F-test ladder.
//!
//! Models of increasing order ARMAV(2k, 2k-1) are considered until adding
//! the next pair of matrices no longer drops the residual sum of squares
//! significantly; the moving-average order is then walked back down with the
//! same test. The restricted model is kept whenever the F statistic stays at
//! or below the `alpha` quantile.
//!
//! Each candidate ARMAV(n, m) is estimated from a pure AR(max(n, m) + m)
//! regression, so the RSS values entering the F comparisons are taken from
//! those nested least-squares fits. Comparing the filtered ARMAV residuals
//! directly would fold the expansion-truncation bias of the smaller model
//! into the statistic and systematically over-select.

use super::fit::{fit_ar_ls, fit_ar_ls_from, fit_armav};
use super::stats::{f_quantile, f_statistic};
use super::{ArmavError, ArmavModel, FitDiagnostics, SeriesWindow};

/// Ladder comparisons attempted when the caller has no opinion (AR orders up
/// to 2 * DEFAULT_MAX_K + 2).
pub const DEFAULT_MAX_K: usize = 4;

/// One F comparison performed during selection.
#[derive(Debug, Clone)]
pub struct OrderTest {
    /// Orders (n, m) of the smaller model.
    pub restricted: (usize, usize),
    /// Orders (n, m) of the larger model.
    pub full: (usize, usize),
    pub f: f64,
    pub quantile: f64,
    /// Whether the larger model's RSS drop was significant.
    pub significant: bool,
}

/// Outcome of [`select_order`].
#[derive(Debug)]
pub struct OrderSelection {
    pub n: usize,
    pub m: usize,
    pub model: ArmavModel,
    pub diagnostics: FitDiagnostics,
    /// Every F comparison in the order it was made.
    pub tests: Vec<OrderTest>,
    /// True when the ladder stopped for a reason other than an insignificant
    /// F: the comparison budget `max_k` ran out while drops were still
    /// significant, the window was too short to fit the next candidate, or a
    /// candidate had no residual degrees of freedom left. The returned model
    /// is the largest one fitted and its adequacy is unconfirmed.
    pub hit_max_order: bool,
}

/// Selects ARMAV orders for the window at confidence level `alpha`
/// (e.g. 0.95), running at most `max_k` escalation comparisons.
pub fn select_order(
    window: &SeriesWindow,
    alpha: f64,
    max_k: usize,
) -> Result<OrderSelection, ArmavError> {
    assert!(max_k >= 1, "at least one ladder comparison is required");
    let r = window.dim();
    let mut tests = Vec::new();
    let mut hit_max_order = false;

    // Escalate (2k, 2k-1) -> (2k+2, 2k+1); the candidate ARMAV(n, m) rests
    // on an AR(n + m) regression (n > m throughout this family). Both fits
    // of a comparison use the larger model's target range so their RSS
    // values are exactly nested.
    let (mut n, mut m) = (2_usize, 1_usize);
    let mut k = 1;
    loop {
        let (n_next, m_next) = (n + 2, m + 2);
        let p_large = n_next + m_next;
        let (_, large_diag) = match fit_ar_ls(window, p_large) {
            Ok(fit) => fit,
            Err(ArmavError::InsufficientData { .. }) => {
                hit_max_order = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let (_, small_diag) = fit_ar_ls_from(window, n + m, p_large)?;
        let scalar_samples = large_diag.sample_count * r;
        if scalar_samples <= large_diag.n_params {
            hit_max_order = true;
            break;
        }
        let s = large_diag.n_params - small_diag.n_params;
        let f = f_statistic(
            small_diag.rss_total,
            large_diag.rss_total,
            s,
            scalar_samples,
            large_diag.n_params,
        );
        let quantile = f_quantile(s, scalar_samples - large_diag.n_params, alpha);
        let significant = f > quantile;
        tests.push(OrderTest {
            restricted: (n, m),
            full: (n_next, m_next),
            f,
            quantile,
            significant,
        });
        if !significant {
            break;
        }
        (n, m) = (n_next, m_next);
        if k == max_k {
            hit_max_order = true;
            break;
        }
        k += 1;
    }

    // Walk the MA order back down while dropping the deepest lag costs
    // nothing. Removing one Theta matrix shortens the underlying AR
    // regression by exactly one lag; again both fits share a target range.
    while m > 0 {
        let p_full = n + m;
        let (_, full_diag) = fit_ar_ls(window, p_full)?;
        let (_, reduced_diag) = fit_ar_ls_from(window, p_full - 1, p_full)?;
        let scalar_samples = full_diag.sample_count * r;
        if scalar_samples <= full_diag.n_params {
            break;
        }
        let s = full_diag.n_params - reduced_diag.n_params;
        let f = f_statistic(
            reduced_diag.rss_total,
            full_diag.rss_total,
            s,
            scalar_samples,
            full_diag.n_params,
        );
        let quantile = f_quantile(s, scalar_samples - full_diag.n_params, alpha);
        let significant = f > quantile;
        tests.push(OrderTest {
            restricted: (n, m - 1),
            full: (n, m),
            f,
            quantile,
            significant,
        });
        if significant {
            break;
        }
        m -= 1;
    }

    // Build the selected model. Theta recovery reads noise-level tail
    // coefficients when the MA order is over-specified for the data and can
    // come out non-stationary; dropping MA lags until construction succeeds
    // keeps the selection usable (a pure AR fit cannot fail this way unless
    // the data themselves are explosive).
    loop {
        match fit_armav(window, n, m) {
            Ok((model, diagnostics)) => {
                return Ok(OrderSelection {
                    n,
                    m,
                    model,
                    diagnostics,
                    tests,
                    hit_max_order,
                });
            }
            Err(ArmavError::NonStationary { .. }) if m > 0 => m -= 1,
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armav::fit::simulate_armav;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn scalar_model(phi: &[f64], theta: &[f64]) -> ArmavModel {
        ArmavModel::from_parameters(
            phi.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            theta.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            DVector::zeros(1),
        )
        .unwrap()
    }

    #[test]
    fn ar2_data_selects_order_two() {
        let truth = scalar_model(&[1.2, -0.5], &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let data = simulate_armav(&truth, 4000, 1.0, 400, &mut rng);
        let window = SeriesWindow::new(data).unwrap();
        let sel = select_order(&window, 0.95, DEFAULT_MAX_K).unwrap();
        assert_eq!(sel.n, 2, "tests ran: {:?}", sel.tests);
        assert!(sel.m <= 1);
        assert!(!sel.hit_max_order);
    }

    #[test]
    fn ar4_data_escalates_past_order_two() {
        // (1 - 1.2B + 0.5B^2)(1 + 0.8B + 0.4B^2) expanded.
        let truth = scalar_model(&[0.4, 0.06, 0.08, -0.2], &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = simulate_armav(&truth, 6000, 1.0, 500, &mut rng);
        let window = SeriesWindow::new(data).unwrap();
        let sel = select_order(&window, 0.95, DEFAULT_MAX_K).unwrap();
        assert_eq!(sel.n, 4, "tests ran: {:?}", sel.tests);
        assert!(sel.tests[0].significant);
    }

    #[test]
    fn white_noise_stays_at_the_ladder_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let data: Vec<DVector<f64>> = (0..3000)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                DVector::from_element(1, g)
            })
            .collect();
        let window = SeriesWindow::new(data).unwrap();
        let sel = select_order(&window, 0.95, DEFAULT_MAX_K).unwrap();
        assert_eq!(sel.n, 2);
        for phi in sel.model.phi() {
            assert!(phi.norm() < 0.15, "white noise should fit near-zero AR matrices");
        }
        assert!(!sel.hit_max_order);
    }

    #[test]
    fn comparison_budget_exhaustion_is_reported() {
        // AR(4) data with a budget of one comparison: the single test is
        // significant, so the ladder escalates once and reports the cap.
        let truth = scalar_model(&[0.4, 0.06, 0.08, -0.2], &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = simulate_armav(&truth, 3000, 1.0, 300, &mut rng);
        let window = SeriesWindow::new(data).unwrap();
        let sel = select_order(&window, 0.95, 1).unwrap();
        assert!(sel.hit_max_order);
        assert_eq!(sel.n, 4, "largest fitted model is returned");
    }

    #[test]
    fn adequate_selection_does_not_raise_the_flag() {
        let truth = scalar_model(&[1.2, -0.5], &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let data = simulate_armav(&truth, 3000, 1.0, 300, &mut rng);
        let window = SeriesWindow::new(data).unwrap();
        let sel = select_order(&window, 0.95, 1).unwrap();
        assert!(!sel.hit_max_order);
        assert_eq!(sel.n, 2);
    }

    #[test]
    fn reduction_removes_unneeded_ma_matrices() {
        // Pure AR(2) data: after the ladder stops at (2,1) the reduction step
        // should usually strip the MA matrix entirely.
        let truth = scalar_model(&[0.9, -0.3], &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let data = simulate_armav(&truth, 5000, 0.7, 400, &mut rng);
        let window = SeriesWindow::new(data).unwrap();
        let sel = select_order(&window, 0.95, DEFAULT_MAX_K).unwrap();
        assert_eq!(sel.n, 2);
        assert_eq!(sel.m, 0, "tests ran: {:?}", sel.tests);
    }
}
