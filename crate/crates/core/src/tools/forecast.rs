//! Sliding-window autoregressive forecaster.
//!
//! Each sample uses the `window` previous values (most recent first) plus an
//! intercept to predict the next value. Coefficients come from ridge-damped
//! normal equations fitted on the chronologically first part of the series;
//! R² is reported on the held-out tail, and predictions are rolled forward
//! autoregressively from the end of the series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RIDGE_LAMBDA: f64 = 1e-8;
const ZERO_VARIANCE: f64 = 1e-12;
const EXACT_RESIDUAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastParams {
    pub history_n: usize,
    pub window_w: usize,
    pub horizon_h: usize,
    pub holdout_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub predictions: Vec<f64>,
    pub r_squared: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Intercept followed by one weight per lag, lag 1 first.
    pub coefficients: Vec<f64>,
    pub holdout_actual: Vec<f64>,
    pub holdout_predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error("window_w must be at least 1")]
    ZeroWindow,
    #[error("history_n {history_n} must be at least 5 x window_w ({window_w})")]
    HistoryTooShort { history_n: usize, window_w: usize },
    #[error("holdout_frac {0} must lie strictly between 0 and 0.5")]
    BadHoldout(f64),
    #[error("insufficient data: need {needed} values, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("normal equations are not positive definite")]
    Singular,
}

impl ForecastParams {
    pub fn validate(&self) -> Result<(), ForecastError> {
        if self.window_w == 0 {
            return Err(ForecastError::ZeroWindow);
        }
        if self.history_n < 5 * self.window_w {
            return Err(ForecastError::HistoryTooShort {
                history_n: self.history_n,
                window_w: self.window_w,
            });
        }
        if !(self.holdout_frac > 0.0 && self.holdout_frac < 0.5) {
            return Err(ForecastError::BadHoldout(self.holdout_frac));
        }
        Ok(())
    }
}

fn features(series: &[f64], target: usize, window: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(window + 1);
    row.push(1.0);
    row.extend((1..=window).map(|lag| series[target - lag]));
    row
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(XᵀX + λI) β = Xᵀy` by Cholesky factorisation.
fn ridge_solve(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<Vec<f64>, ForecastError> {
    let p = rows[0].len();
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (row, y) in rows.iter().zip(targets) {
        for i in 0..p {
            rhs[i] += row[i] * y;
            for j in 0..=i {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += lambda;
    }

    let mut lower = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s = gram[i][j] - dot(&lower[i][..j], &lower[j][..j]);
            if i == j {
                if s <= 0.0 {
                    return Err(ForecastError::Singular);
                }
                lower[i][i] = s.sqrt();
            } else {
                lower[i][j] = s / lower[j][j];
            }
        }
    }
    let mut z = vec![0.0; p];
    for i in 0..p {
        z[i] = (rhs[i] - dot(&lower[i][..i], &z[..i])) / lower[i][i];
    }
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| lower[k][i] * beta[k]).sum();
        beta[i] = (z[i] - s) / lower[i][i];
    }
    Ok(beta)
}

/// Coefficient of determination with the zero-variance convention.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> f64 {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = actual.iter().zip(predicted).map(|(y, p)| (y - p).powi(2)).sum();
    if ss_tot / n < ZERO_VARIANCE {
        let max_residual = actual
            .iter()
            .zip(predicted)
            .map(|(y, p)| (y - p).abs())
            .fold(0.0, f64::max);
        return if max_residual < EXACT_RESIDUAL { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Runs the forecaster on the last `history_n` values of `series`.
pub fn forecast(series: &[f64], params: &ForecastParams) -> Result<ForecastReport, ForecastError> {
    params.validate()?;
    if series.len() < params.history_n {
        return Err(ForecastError::InsufficientData {
            needed: params.history_n,
            available: series.len(),
        });
    }
    let history = &series[series.len() - params.history_n..];
    if history.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::NonFinite);
    }
    let w = params.window_w;
    let samples = history.len() - w;
    let train_size = ((samples as f64) * (1.0 - params.holdout_frac)).floor() as usize;
    let test_size = samples - train_size;

    let rows: Vec<Vec<f64>> = (w..history.len()).map(|t| features(history, t, w)).collect();
    let targets = &history[w..];
    let beta = ridge_solve(&rows[..train_size], &targets[..train_size], RIDGE_LAMBDA)?;

    let holdout_predicted: Vec<f64> = rows[train_size..].iter().map(|r| dot(r, &beta)).collect();
    let holdout_actual = targets[train_size..].to_vec();
    let r2 = r_squared(&holdout_actual, &holdout_predicted);

    let mut extended = history.to_vec();
    let mut predictions = Vec::with_capacity(params.horizon_h);
    for _ in 0..params.horizon_h {
        let next = dot(&features(&extended, extended.len(), w), &beta);
        extended.push(next);
        predictions.push(next);
    }

    Ok(ForecastReport {
        predictions,
        r_squared: r2,
        train_size,
        test_size,
        coefficients: beta,
        holdout_actual,
        holdout_predicted,
    })
}
