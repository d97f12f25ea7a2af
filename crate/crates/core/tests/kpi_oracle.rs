mod common;

use netintent_core::tools::kpi::kpi_stats;
use proptest::prelude::*;

struct Oracle {
    mean: f64,
    sample_std: f64,
    min: f64,
    max: f64,
    p95: f64,
    slope: f64,
}

/// Straight from the definitions, with no shared code.
fn oracle(values: &[f64]) -> Oracle {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Nearest rank: smallest value with at least 95% of the sample at or below it.
    let mut p95 = sorted[n - 1];
    for (i, v) in sorted.iter().enumerate() {
        if (i + 1) as f64 >= 0.95 * n as f64 {
            p95 = *v;
            break;
        }
    }
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let x_mean = xs.iter().sum::<f64>() / n as f64;
    let num: f64 = xs.iter().zip(values).map(|(x, y)| (x - x_mean) * y).sum();
    let den: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    Oracle {
        mean,
        sample_std: var.sqrt(),
        min: sorted[0],
        max: sorted[n - 1],
        p95,
        slope: num / den,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

fn unit_series() -> Result<(), String> {
    let s = kpi_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).ok_or("no stats for [1..5]")?;
    if !(close(s.mean, 3.0) && close(s.trend_slope, 1.0) && (s.sample_std - 1.5811).abs() < 1e-3 && s.p95 == 5.0) {
        return Err(format!("[1..5] gave {s:?}"));
    }
    Ok(())
}

fn matches_oracle(values: Vec<f64>) -> Result<(), TestCaseError> {
    let s = kpi_stats(&values).unwrap();
    let o = oracle(&values);
    prop_assert_eq!(s.count, values.len());
    prop_assert!(close(s.mean, o.mean), "mean {} vs {}", s.mean, o.mean);
    prop_assert!(close(s.sample_std, o.sample_std), "std {} vs {}", s.sample_std, o.sample_std);
    prop_assert_eq!(s.min, o.min);
    prop_assert_eq!(s.max, o.max);
    prop_assert_eq!(s.p95, o.p95);
    prop_assert!(close(s.trend_slope, o.slope), "slope {} vs {}", s.trend_slope, o.slope);
    Ok(())
}

pub fn acceptance() -> Result<String, String> {
    unit_series()?;
    let series = proptest::collection::vec(-1.0e4f64..1.0e4, 2..600);
    common::check_property(500, &series, matches_oracle)?;
    Ok("500 random series within 1e-9; [1..5] gives mean 3, slope 1, std 1.5811".into())
}

#[test]
fn statistics_match_oracle() {
    acceptance().unwrap();
}

#[test]
fn too_short_series_has_no_stats() {
    assert!(kpi_stats(&[]).is_none());
    assert!(kpi_stats(&[1.0]).is_none());
}
