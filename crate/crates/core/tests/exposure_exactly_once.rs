use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use netintent_core::exposure::{EventExposure, EventFilter, Notification, Sink, WebhookTransport};
use netintent_core::sim::{Dims, NfKind, TelemetryRecord};
use netintent_core::store::AnalyticsStore;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Default)]
struct Recorder(Arc<Mutex<Vec<Notification>>>);

impl WebhookTransport for Recorder {
    fn post(&self, _url: &str, n: &Notification) -> Result<(), String> {
        self.0.lock().unwrap().push(n.clone());
        Ok(())
    }
}

const METRICS: [(NfKind, &str); 4] = [
    (NfKind::Upf, "throughput_dl_kbps"),
    (NfKind::Upf, "memory_utilization_pct"),
    (NfKind::Smf, "active_sessions"),
    (NfKind::Pcf, "policy_decisions"),
];
const SLICES: [&str; 3] = ["internet", "streaming", "iot"];

fn key(r: &TelemetryRecord) -> String {
    serde_json::to_string(r).unwrap()
}

fn random_filter(rng: &mut ChaCha8Rng) -> EventFilter {
    let mut f = EventFilter::all();
    if rng.random_bool(0.5) {
        f.source_nfs = NfKind::ALL.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    }
    if rng.random_bool(0.3) {
        f.metrics = METRICS.iter().filter(|_| rng.random_bool(0.5)).map(|(_, m)| m.to_string()).collect();
    }
    if rng.random_bool(0.4) {
        f.slice = Some(SLICES[rng.random_range(0..SLICES.len())].to_owned());
    }
    f
}

struct Outcome {
    delivered: BTreeMap<String, Vec<Notification>>,
    expected: BTreeMap<String, Vec<String>>,
    records: usize,
    subs: usize,
}

/// Drives a random interleaving and tracks the oracle alongside.
fn run(seed: u64, steps: usize, max_live: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recorder = Recorder::default();
    let mut ex = EventExposure::new(Box::new(recorder.clone()));
    let mut store = AnalyticsStore::new();
    let mut live: BTreeMap<String, (EventFilter, bool)> = BTreeMap::new();
    let mut delivered: BTreeMap<String, Vec<Notification>> = BTreeMap::new();
    let mut expected: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut now = 0u64;
    let mut records = 0;
    let mut subs = 0;

    for _ in 0..steps {
        let roll = rng.random_range(0..100);
        if roll < 8 && live.len() < max_live {
            let filter = random_filter(&mut rng);
            let queue = rng.random_bool(0.5);
            let sink = if queue {
                Sink::Queue
            } else {
                Sink::Webhook { url: "http://collector.test/notify".into() }
            };
            let period = rng.random_range(1..5_000);
            let id = ex.subscribe(filter.clone(), sink, period).unwrap();
            expected.insert(id.clone(), Vec::new());
            live.insert(id, (filter, queue));
            subs += 1;
        } else if roll < 11 && !live.is_empty() {
            let idx = rng.random_range(0..live.len());
            let id = live.keys().nth(idx).unwrap().clone();
            let (_, queue) = live.remove(&id).unwrap();
            let flushed = ex.unsubscribe(&id).unwrap();
            if queue {
                delivered.entry(id).or_default().extend(flushed);
            }
        } else if roll < 20 {
            now += rng.random_range(0..3_000);
            ex.flush_due(now);
            for (id, (_, queue)) in &live {
                if *queue {
                    delivered.entry(id.clone()).or_default().extend(ex.drain_queue(id).unwrap());
                }
            }
        } else {
            now += rng.random_range(0..50);
            let (nf, metric) = METRICS[rng.random_range(0..METRICS.len())];
            let record = TelemetryRecord {
                source_nf: nf,
                metric: metric.into(),
                value: rng.random_range(0.0..100.0),
                unit: "x".into(),
                timestamp_ms: now,
                dims: Dims::slice(SLICES[rng.random_range(0..SLICES.len())]),
            };
            let matched = ex.publish(&record, &mut store).unwrap();
            let mut oracle_matches = 0;
            for (id, (filter, _)) in &live {
                if filter.matches(&record) {
                    expected.get_mut(id).unwrap().push(key(&record));
                    oracle_matches += 1;
                }
            }
            assert_eq!(matched, oracle_matches);
            records += 1;
        }
    }
    ex.flush_all(now);
    for (id, (_, queue)) in &live {
        if *queue {
            delivered.entry(id.clone()).or_default().extend(ex.drain_queue(id).unwrap());
        }
    }
    for n in recorder.0.lock().unwrap().iter() {
        delivered.entry(n.sub_id.clone()).or_default().push(n.clone());
    }
    Outcome { delivered, expected, records, subs }
}

fn check(outcome: &Outcome) -> Result<(), String> {
    for (id, want) in &outcome.expected {
        let notes = outcome.delivered.get(id).cloned().unwrap_or_default();
        let seqs: Vec<u64> = notes.iter().map(|n| n.seq).collect();
        let gap_free: Vec<u64> = (1..=notes.len() as u64).collect();
        let mut sorted = seqs.clone();
        sorted.sort_unstable();
        if sorted != gap_free {
            return Err(format!("{id}: seq {seqs:?} not gap-free"));
        }
        let mut got: Vec<String> = notes.iter().flat_map(|n| n.records.iter().map(key)).collect();
        let mut want = want.clone();
        got.sort();
        want.sort();
        if got != want {
            return Err(format!("{id}: delivered {} records, oracle {}", got.len(), want.len()));
        }
    }
    let unknown: BTreeSet<_> = outcome
        .delivered
        .keys()
        .filter(|k| !outcome.expected.contains_key(*k))
        .collect();
    if !unknown.is_empty() {
        return Err(format!("deliveries for unknown subscriptions {unknown:?}"));
    }
    Ok(())
}

pub fn acceptance() -> Result<String, String> {
    let outcome = run(2025, 14_000, 30);
    if outcome.records < 10_000 || outcome.subs < 20 {
        return Err(format!("only {} records over {} subscriptions", outcome.records, outcome.subs));
    }
    check(&outcome)?;
    Ok(format!(
        "{} records over {} subscriptions delivered exactly once, seq gap-free",
        outcome.records, outcome.subs
    ))
}

#[test]
fn large_interleaving_is_exactly_once() {
    acceptance().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_interleavings_match_oracle(seed in any::<u64>(), steps in 50usize..600) {
        let outcome = run(seed, steps, 8);
        prop_assert_eq!(check(&outcome), Ok(()));
    }
}
