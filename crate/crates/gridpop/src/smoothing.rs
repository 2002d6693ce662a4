//! Brown's simple exponential smoothing for short-term access forecasts.
//!
//! The model keeps a single level `l` and updates it once per observed week:
//!
//! ```text
//! l_{t+1} = l_t + alpha * (y_t - l_t)
//! ```
//!
//! with `l_0` the mean of the whole series. At the endpoints the recurrence
//! degenerates into the two baseline models, and those branches are taken
//! exactly: `alpha = 1` reproduces the last observation (static model) and
//! `alpha = 0` keeps the initial level (average model), bitwise. The
//! one-step-ahead forecast is the level after consuming the series, and the
//! multi-step forecast is flat.
//!
//! `alpha` is fitted by minimizing the in-sample sum of squared one-step
//! errors over a fixed grid, ties broken toward the smaller `alpha`.

use thiserror::Error;

/// Default spacing of the alpha grid used by [`fit_alpha`].
pub const DEFAULT_ALPHA_STEP: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum SmoothingError {
    #[error("series is empty")]
    EmptySeries,
    #[error("series has {0} observations, need at least 2 to fit alpha")]
    SeriesTooShort(usize),
    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("grid step {0} outside (0, 1]")]
    BadGridStep(f64),
}

/// A fitted (or directly evaluated) smoothing model for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingFit {
    /// Smoothing coefficient in [0, 1].
    pub alpha: f64,
    /// Initial level: the mean of the full series.
    pub initial_level: f64,
    /// One-step-ahead forecast past the end of the series.
    pub next_forecast: f64,
    /// In-sample sum of squared one-step errors.
    pub sse: f64,
}

/// Runs the smoothing recurrence over `series` with a fixed `alpha`.
///
/// The level starts at the mean of the full series and is updated through
/// every observation; the returned forecast is the level one step past the
/// end. For non-negative input the forecast is a convex combination of
/// non-negative values and needs no clamping.
pub fn brown_forecast(series: &[f64], alpha: f64) -> Result<SmoothingFit, SmoothingError> {
    if series.is_empty() {
        return Err(SmoothingError::EmptySeries);
    }
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(SmoothingError::AlphaOutOfRange(alpha));
    }
    let initial_level = mean(series);
    let mut level = initial_level;
    let mut sse = 0.0;
    for &y in series {
        let err = level - y;
        sse += err * err;
        // Endpoint branches keep the static/average identities exact; the
        // interior form also makes a constant series an exact fixed point.
        if alpha == 1.0 {
            level = y;
        } else if alpha > 0.0 {
            level += alpha * (y - level);
        }
    }
    Ok(SmoothingFit {
        alpha,
        initial_level,
        next_forecast: level,
        sse,
    })
}

/// Fits `alpha` on the default grid {0.00, 0.01, ..., 1.00}.
///
/// Requires at least two observations; ties in SSE go to the smaller alpha.
pub fn fit_alpha(series: &[f64]) -> Result<SmoothingFit, SmoothingError> {
    fit_alpha_grid(series, DEFAULT_ALPHA_STEP)
}

/// Fits `alpha` on the grid {0, step, 2*step, ...} extended to include 1.0.
///
/// Grid points are computed as `i * step` so a caller (or an independent
/// checker) can reproduce them exactly.
pub fn fit_alpha_grid(series: &[f64], step: f64) -> Result<SmoothingFit, SmoothingError> {
    if series.len() < 2 {
        return Err(SmoothingError::SeriesTooShort(series.len()));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(SmoothingError::BadGridStep(step));
    }
    let mut best: Option<SmoothingFit> = None;
    for alpha in alpha_grid(step) {
        let fit = brown_forecast(series, alpha)?;
        match &best {
            Some(b) if fit.sse >= b.sse => {}
            _ => best = Some(fit),
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// The alpha grid for a given step: `i * step` for i = 0, 1, ... while the
/// value stays below 1, plus the endpoint 1.0.
pub fn alpha_grid(step: f64) -> impl Iterator<Item = f64> {
    let interior = (0..).map(move |i| i as f64 * step).take_while(|a| *a < 1.0);
    interior.chain(std::iter::once(1.0))
}

/// Flat multi-step extrapolation: `weeks` times the one-step forecast.
pub fn forecast_horizon(fit: &SmoothingFit, weeks: u32) -> f64 {
    weeks as f64 * fit.next_forecast
}

/// The static model: the last observed value.
pub fn static_forecast(series: &[f64]) -> Result<f64, SmoothingError> {
    series.last().copied().ok_or(SmoothingError::EmptySeries)
}

/// The average model: the arithmetic mean of the series.
pub fn average_forecast(series: &[f64]) -> Result<f64, SmoothingError> {
    if series.is_empty() {
        return Err(SmoothingError::EmptySeries);
    }
    Ok(mean(series))
}

fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_series_is_a_fixed_point() {
        for alpha in [0.0, 0.3, 1.0] {
            let fit = brown_forecast(&[5.0, 5.0, 5.0], alpha).unwrap();
            assert_eq!(fit.next_forecast, 5.0);
            assert_eq!(fit.sse, 0.0);
        }
    }

    #[test]
    fn alpha_one_is_the_static_model() {
        let fit = brown_forecast(&[1.0, 2.0, 3.0], 1.0).unwrap();
        assert_eq!(fit.next_forecast, 3.0);
    }

    #[test]
    fn alpha_zero_is_the_average_model() {
        let fit = brown_forecast(&[2.0, 4.0, 6.0], 0.0).unwrap();
        assert_eq!(fit.next_forecast, 4.0);
    }

    #[test]
    fn hand_computed_recurrence() {
        // l0 = mean([0, 4]) = 2; l1 = 0.5*0 + 0.5*2 = 1; l2 = 0.5*4 + 0.5*1 = 2.5
        let fit = brown_forecast(&[0.0, 4.0], 0.5).unwrap();
        assert_eq!(fit.initial_level, 2.0);
        assert_eq!(fit.next_forecast, 2.5);
        // sse = (2-0)^2 + (1-4)^2 = 13
        assert_eq!(fit.sse, 13.0);
    }

    #[test]
    fn single_observation() {
        let fit = brown_forecast(&[42.0], 0.7).unwrap();
        assert_eq!(fit.next_forecast, 42.0);
        assert_eq!(fit.sse, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(brown_forecast(&[], 0.5), Err(SmoothingError::EmptySeries));
        assert!(matches!(
            brown_forecast(&[1.0], 1.5),
            Err(SmoothingError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            brown_forecast(&[1.0], f64::NAN),
            Err(SmoothingError::AlphaOutOfRange(_))
        ));
        assert_eq!(fit_alpha(&[3.0]), Err(SmoothingError::SeriesTooShort(1)));
    }

    #[test]
    fn constant_series_tie_breaks_to_alpha_zero() {
        let fit = fit_alpha(&[7.0, 7.0, 7.0, 7.0]).unwrap();
        assert_eq!(fit.alpha, 0.0);
        assert_eq!(fit.sse, 0.0);
    }

    #[test]
    fn trending_series_fits_high_alpha() {
        // On a steady ramp the mean lags badly, so tracking the last value
        // (alpha near 1) minimizes the squared error.
        let series: Vec<f64> = (1..=20).map(f64::from).collect();
        let fit = fit_alpha(&series).unwrap();
        assert!(fit.alpha >= 0.9, "expected alpha near 1, got {}", fit.alpha);
        let static_sse = brown_forecast(&series, 1.0).unwrap().sse;
        assert!(fit.sse <= static_sse);
    }

    #[test]
    fn noisy_level_series_fits_low_alpha() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let series: Vec<f64> = (0..40).map(|_| 10.0 + rng.random_range(-1.0..1.0)).collect();
        let fit = fit_alpha(&series).unwrap();
        assert!(fit.alpha <= 0.5, "expected alpha in lower half, got {}", fit.alpha);
        assert!(fit.sse <= brown_forecast(&series, 1.0).unwrap().sse);
    }

    #[test]
    fn grid_matches_brute_force() {
        // Independent re-derivation: own recurrence, own argmin.
        let series = [3.0, 0.0, 5.0, 2.0, 2.0, 8.0, 1.0];
        let mut best_alpha = f64::NAN;
        let mut best_sse = f64::INFINITY;
        for i in 0..=100u32 {
            let alpha = i as f64 * 0.01;
            let mut level = series.iter().sum::<f64>() / series.len() as f64;
            let mut sse = 0.0;
            for &y in &series {
                sse += (level - y) * (level - y);
                if alpha == 1.0 {
                    level = y;
                } else if alpha > 0.0 {
                    level += alpha * (y - level);
                }
            }
            if sse < best_sse {
                best_sse = sse;
                best_alpha = alpha;
            }
        }
        let fit = fit_alpha(&series).unwrap();
        assert_eq!(fit.alpha, best_alpha);
        assert_eq!(fit.sse, best_sse);
    }

    #[test]
    fn horizon_is_flat() {
        let fit = SmoothingFit {
            alpha: 0.5,
            initial_level: 2.0,
            next_forecast: 2.5,
            sse: 0.0,
        };
        assert_eq!(forecast_horizon(&fit, 4), 10.0);
        let zero = SmoothingFit { next_forecast: 0.0, ..fit };
        assert_eq!(forecast_horizon(&zero, 9), 0.0);
    }

    #[test]
    fn four_week_forecast_of_constant_series() {
        let fit = brown_forecast(&[3.0, 3.0, 3.0], 0.2).unwrap();
        assert_eq!(forecast_horizon(&fit, 4), 12.0);
    }

    #[test]
    fn baseline_definitions() {
        assert_eq!(static_forecast(&[1.0, 2.0, 9.0]).unwrap(), 9.0);
        assert_eq!(average_forecast(&[1.0, 2.0, 9.0]).unwrap(), 4.0);
        assert!(static_forecast(&[]).is_err());
        assert!(average_forecast(&[]).is_err());
    }

    #[test]
    fn custom_grid_step_includes_both_endpoints() {
        let grid: Vec<f64> = alpha_grid(0.3).collect();
        assert_eq!(grid, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        let fit = fit_alpha_grid(&[1.0, 2.0], 0.3).unwrap();
        assert!((0.0..=1.0).contains(&fit.alpha));
    }

    proptest! {
        #[test]
        fn extremes_match_baselines(series in proptest::collection::vec(0.0f64..1000.0, 1..50)) {
            let s = brown_forecast(&series, 1.0).unwrap();
            prop_assert_eq!(s.next_forecast, static_forecast(&series).unwrap());
            let a = brown_forecast(&series, 0.0).unwrap();
            prop_assert_eq!(a.next_forecast, average_forecast(&series).unwrap());
        }

        #[test]
        fn fitted_sse_never_beats_neither_extreme(
            series in proptest::collection::vec(0.0f64..100.0, 2..40),
        ) {
            let fit = fit_alpha(&series).unwrap();
            prop_assert!(fit.sse <= brown_forecast(&series, 0.0).unwrap().sse);
            prop_assert!(fit.sse <= brown_forecast(&series, 1.0).unwrap().sse);
        }

        #[test]
        fn nonnegative_series_gives_nonnegative_forecast(
            series in proptest::collection::vec(0.0f64..100.0, 1..40),
            alpha_pct in 0u32..=100,
        ) {
            let fit = brown_forecast(&series, alpha_pct as f64 / 100.0).unwrap();
            prop_assert!(fit.next_forecast >= 0.0);
        }
    }
}
