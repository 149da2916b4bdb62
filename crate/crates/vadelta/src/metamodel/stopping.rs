//! Early-stopping machinery over the recorded validation-MSE series.
//!
//! The raw series is volatile, so the detector never looks at it directly:
//! it smooths with a centered moving average (window truncated at the
//! edges, so there is no phase lag to delay detection), fits a least-squares
//! polynomial to the smoothed points, and reads the trend off the fitted
//! values at the record stamps.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::metamodel::model::Metamodel;
use crate::metamodel::train::TrainConfig;
use crate::portfolio::VaContract;
use crate::Result;

/// Centered moving average; near the edges the window shrinks
/// symmetrically — a one-sided truncation would turn the newest points into
/// a trailing average and lag the very trend change the detector is
/// waiting for.
pub fn centered_moving_average(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1);
    let half = (window - 1) / 2;
    (0..values.len())
        .map(|i| {
            let r = half.min(i).min(values.len() - 1 - i);
            values[i - r..=i + r].iter().sum::<f64>() / (2 * r + 1) as f64
        })
        .collect()
}

/// Least-squares polynomial through `(index, value)` points, evaluated back
/// at those indices. Indices are mapped to [−1, 1] before building the
/// Vandermonde system so the fit stays well-conditioned at degree 6.
fn polynomial_trend(values: &[f64], degree: usize) -> Vec<f64> {
    let m = values.len();
    if m == 1 {
        return values.to_vec();
    }
    let degree = degree.min(m - 1);
    let xs: Vec<f64> = (0..m)
        .map(|i| 2.0 * i as f64 / (m - 1) as f64 - 1.0)
        .collect();
    let vander = DMatrix::from_fn(m, degree + 1, |i, j| xs[i].powi(j as i32));
    let rhs = DVector::from_column_slice(values);
    let coeffs = vander
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .expect("SVD least squares cannot fail on a finite system");
    (vander * coeffs).iter().copied().collect()
}

/// Examines the validation-MSE series for a completed dip: smoothed, fitted,
/// and with the minimum of the fitted trend attained before the last
/// `W − 1` records, those records nondecreasing, and the latest value
/// strictly above the minimum. Returns the event flag and the fitted trend
/// (empty when the series is still shorter than `W̄ + W`).
pub fn detect_stopping(val_mse: &[f64], cfg: &TrainConfig) -> (bool, Vec<f64>) {
    let w = cfg.trend_window;
    let m = val_mse.len();
    if m < cfg.smoothing_window + w {
        return (false, Vec::new());
    }
    let smoothed = centered_moving_average(val_mse, cfg.smoothing_window);
    let fitted = polynomial_trend(&smoothed, cfg.poly_degree);

    let argmin = fitted
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let tail_start = m - (w - 1);
    let event = argmin < tail_start
        && fitted[tail_start..].windows(2).all(|p| p[1] >= p[0])
        && fitted[m - 1] > fitted[argmin];
    (event, fitted)
}

/// Aggregate relative-error criterion: true iff
/// `|mean(estimates) − mean(mc)| / |mean(mc)| < threshold` over the
/// validation portfolio.
pub fn rel_err_stop(
    model: &Metamodel,
    validation: &[VaContract],
    mc_deltas: &[f64],
    threshold: f64,
) -> Result<bool> {
    assert_eq!(validation.len(), mc_deltas.len());
    let mc_mean = mc_deltas.iter().sum::<f64>() / mc_deltas.len() as f64;
    if mc_mean == 0.0 {
        return Err(Error::ZeroMeanValidationDelta);
    }
    let nn_mean = validation.iter().map(|c| model.predict(c)).sum::<f64>() / validation.len() as f64;
    Ok(((nn_mean - mc_mean) / mc_mean).abs() < threshold)
}
