//! Fit-comparison and residual-whiteness statistics.

use super::ArmavError;
use nalgebra::DVector;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

/// F statistic comparing a restricted fit (RSS `rss_restricted`, `s` fewer
/// scalar parameters) against an unrestricted one:
///
/// ```text
/// F = ((A1 - A0) / s) / (A0 / (N - r))
/// ```
///
/// where `A1`/`A0` are the restricted/unrestricted RSS, `N` the number of
/// scalar observations and `r` the unrestricted parameter count.
///
/// Degenerate inputs get conservative sentinels: a perfect unrestricted fit
/// (`A0 = 0`) returns `+inf` when the restriction costs anything and `0`
/// when it costs nothing; an RSS "improvement" from removing parameters
/// (possible when fits are not exactly nested) clamps to `0`; a
/// non-positive denominator degree of freedom returns `0` because the test
/// carries no information there.
pub fn f_statistic(
    rss_restricted: f64,
    rss_unrestricted: f64,
    s: usize,
    n_scalar_samples: usize,
    r_params: usize,
) -> f64 {
    let gain = rss_restricted - rss_unrestricted;
    if rss_unrestricted <= 0.0 {
        return if gain <= 0.0 { 0.0 } else { f64::INFINITY };
    }
    if n_scalar_samples <= r_params || s == 0 {
        return 0.0;
    }
    let dof2 = (n_scalar_samples - r_params) as f64;
    (gain.max(0.0) / s as f64) / (rss_unrestricted / dof2)
}

/// Upper `alpha` quantile of the F(d1, d2) distribution, the threshold an
/// observed [`f_statistic`] must exceed to call the RSS drop significant.
pub fn f_quantile(d1: usize, d2: usize, alpha: f64) -> f64 {
    assert!(d1 > 0 && d2 > 0, "F distribution needs positive dof");
    assert!((0.0..1.0).contains(&alpha), "alpha must be in [0, 1)");
    FisherSnedecor::new(d1 as f64, d2 as f64)
        .expect("valid F distribution")
        .inverse_cdf(alpha)
}

/// Per-channel residual autocorrelations for lags `1..=max_lag`:
///
/// ```text
/// rho_l = ( sum_{t=1}^{N-l} a_t a_{t+l} / (N - l) ) / ( sum_{t=1}^{N} a_t^2 / N )
/// ```
///
/// Returns `autocorr[channel][lag - 1]`. A channel whose residuals are all
/// zero has no defined correlation and is reported as
/// [`ArmavError::ZeroVariance`].
pub fn residual_autocorrelation(
    residuals: &[DVector<f64>],
    max_lag: usize,
) -> Result<Vec<Vec<f64>>, ArmavError> {
    let n = residuals.len();
    if n == 0 {
        return Err(ArmavError::InsufficientData {
            required: 1,
            available: 0,
        });
    }
    let r = residuals[0].len();
    let max_lag = max_lag.min(n.saturating_sub(1));
    let mut out = Vec::with_capacity(r);
    for c in 0..r {
        let denom: f64 = residuals.iter().map(|a| a[c] * a[c]).sum::<f64>() / n as f64;
        if denom == 0.0 {
            return Err(ArmavError::ZeroVariance { channel: c });
        }
        let mut rho = Vec::with_capacity(max_lag);
        for l in 1..=max_lag {
            let num: f64 = (0..n - l).map(|t| residuals[t][c] * residuals[t + l][c]).sum();
            rho.push(num / (n - l) as f64 / denom);
        }
        out.push(rho);
    }
    Ok(out)
}

/// Fraction of the given autocorrelations falling outside the two-standard-
/// error whiteness band `±2/sqrt(N)`.
pub fn fraction_outside_band(rho: &[f64], n_samples: usize) -> f64 {
    if rho.is_empty() {
        return 0.0;
    }
    let band = 2.0 / (n_samples as f64).sqrt();
    let outside = rho.iter().filter(|v| v.abs() > band).count();
    outside as f64 / rho.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn f_statistic_hand_value() {
        // ((120 - 100) / 2) / (100 / (54 - 4)) = 10 / 2 = 5.
        assert_abs_diff_eq!(f_statistic(120.0, 100.0, 2, 54, 4), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn f_statistic_perfect_fit_sentinels() {
        assert_eq!(f_statistic(1.0, 0.0, 2, 100, 4), f64::INFINITY);
        assert_eq!(f_statistic(0.0, 0.0, 2, 100, 4), 0.0);
    }

    #[test]
    fn f_statistic_clamps_negative_gain() {
        assert_eq!(f_statistic(90.0, 100.0, 2, 100, 4), 0.0);
    }

    #[test]
    fn f_quantile_matches_tabulated_values() {
        // Classical tables: F_{0.95}(1, 10) = 4.965, F_{0.95}(4, 20) = 2.866.
        assert_abs_diff_eq!(f_quantile(1, 10, 0.95), 4.965, epsilon = 0.005);
        assert_abs_diff_eq!(f_quantile(4, 20, 0.95), 2.866, epsilon = 0.005);
    }

    #[test]
    fn f_quantile_monotone_in_alpha() {
        assert!(f_quantile(4, 50, 0.99) > f_quantile(4, 50, 0.95));
    }

    #[test]
    fn autocorrelation_of_alternating_series() {
        // a = (+1, -1, +1, ...): every adjacent product is -1, every lag-2
        // product +1; the sample variance is exactly 1, so rho_1 = -1 and
        // rho_2 = +1 with this estimator's 1/(N-l) normalisation.
        let residuals: Vec<DVector<f64>> = (0..50)
            .map(|t| DVector::from_element(1, if t % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        let rho = residual_autocorrelation(&residuals, 2).unwrap();
        assert_abs_diff_eq!(rho[0][0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho[0][1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn autocorrelation_channels_are_independent() {
        let residuals: Vec<DVector<f64>> = (0..40)
            .map(|t| {
                DVector::from_row_slice(&[
                    if t % 2 == 0 { 1.0 } else { -1.0 },
                    if (t / 2) % 2 == 0 { 1.0 } else { -1.0 },
                ])
            })
            .collect();
        let rho = residual_autocorrelation(&residuals, 1).unwrap();
        assert_abs_diff_eq!(rho[0][0], -1.0, epsilon = 1e-12);
        // Channel 2 alternates in pairs: half the adjacent products are -1.
        assert!(rho[1][0].abs() < 0.2);
    }

    #[test]
    fn zero_variance_channel_reported() {
        let residuals = vec![DVector::from_row_slice(&[1.0, 0.0]); 30];
        match residual_autocorrelation(&residuals, 3) {
            Err(ArmavError::ZeroVariance { channel }) => assert_eq!(channel, 1),
            other => panic!("expected ZeroVariance, got {other:?}"),
        }
    }

    #[test]
    fn lag_capped_by_series_length() {
        let residuals: Vec<DVector<f64>> =
            (0..5).map(|t| DVector::from_element(1, (t as f64).sin() + 1.0)).collect();
        let rho = residual_autocorrelation(&residuals, 100).unwrap();
        assert_eq!(rho[0].len(), 4);
    }

    #[test]
    fn band_fraction_counts_excursions() {
        // N = 400 -> band = 0.1.
        let rho = [0.05, -0.3, 0.09, 0.2, -0.08];
        assert_abs_diff_eq!(fraction_outside_band(&rho, 400), 0.4, epsilon = 1e-12);
    }
}
