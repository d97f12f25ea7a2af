use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use netintent_core::stack::{Stack, StackConfig};
use netintent_core::store::{DimsFilter, Order, Query};
use netintent_core::tools::forecast::forecast;
use netintent_core::tools::kpi::kpi_stats;
use netintent_core::tools::ForecastParams;

fn demo_stack() -> Stack {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.json");
    Stack::build(&StackConfig::load(&path).unwrap()).unwrap()
}

fn series(n: usize) -> Vec<f64> {
    (0..n).map(|i| 55.0 + 3.0 * ((i as f64) * 0.37).sin() + (i % 7) as f64 * 0.1).collect()
}

fn kpi(c: &mut Criterion) {
    let mut group = c.benchmark_group("kpi_stats");
    for n in [100, 10_000, 100_000] {
        let values = series(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &values, |b, v| b.iter(|| kpi_stats(black_box(v))));
    }
    group.finish();
}

/// Simulated memory utilisation on the streaming slice, oldest first.
fn memory_series(n: usize) -> Vec<f64> {
    let stack = demo_stack();
    stack.engine.write(|e| e.advance_by_ms(n as u64 * 1_000));
    let query = Query {
        collection: "upf.memory_utilization_pct".into(),
        dims_filter: DimsFilter { slice: Some("streaming".into()), ..DimsFilter::default() },
        limit: n,
        order: Order::OldestFirst,
    };
    let values: Vec<f64> = stack.engine.read().store.query(&query).unwrap().iter().map(|r| r.value).collect();
    assert_eq!(values.len(), n);
    values
}

fn forecasting(c: &mut Criterion) {
    let mut group = c.benchmark_group("forecast");
    for (n, w) in [(500, 8), (2_000, 16)] {
        let values = memory_series(n);
        let params = ForecastParams { history_n: n, window_w: w, horizon_h: 10, holdout_frac: 0.2 };
        group.bench_with_input(BenchmarkId::new("history", format!("{n}x{w}")), &values, |b, v| {
            b.iter(|| forecast(black_box(v), &params).unwrap())
        });
    }
    group.finish();
}

fn store_and_tick(c: &mut Criterion) {
    let stack = demo_stack();
    stack.engine.write(|e| e.advance_by_ms(30 * 60_000));
    let query = Query {
        collection: "upf.memory_utilization_pct".into(),
        dims_filter: DimsFilter { slice: Some("streaming".into()), ..DimsFilter::default() },
        limit: 100,
        order: Order::RecentFirst,
    };
    c.bench_function("store_query_recent_100", |b| {
        b.iter(|| stack.engine.read().store.query(black_box(&query)).unwrap())
    });
    c.bench_function("engine_tick", |b| b.iter(|| stack.engine.write(|e| e.advance_by_ms(1_000))));
}

criterion_group!(benches, kpi, forecasting, store_and_tick);
criterion_main!(benches);
