//! Descriptive statistics over a KPI series.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiStats {
    pub count: usize,
    pub mean: f64,
    pub sample_std: f64,
    pub min: f64,
    pub max: f64,
    /// Nearest-rank 95th percentile.
    pub p95: f64,
    /// Least-squares slope of value against sample index.
    pub trend_slope: f64,
}

/// Needs at least two values.
pub fn kpi_stats(values: &[f64]) -> Option<KpiStats> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sample_std = (ss / (nf - 1.0)).sqrt();

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (0.95 * nf).ceil() as usize;
    let p95 = sorted[rank.clamp(1, n) - 1];

    let x_mean = (nf - 1.0) / 2.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (v - mean);
        sxx += dx * dx;
    }

    Some(KpiStats {
        count: n,
        mean,
        sample_std,
        min: sorted[0],
        max: sorted[n - 1],
        p95,
        trend_slope: sxy / sxx,
    })
}
