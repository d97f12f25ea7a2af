//! Collection-oriented time-series store backing the data-retrieval tools.
//!
//! Records are grouped into collections named `<nf>.<metric>` (lower case).
//! Each collection is kept ordered by `timestamp_ms`, ties in insertion order.
//! An optional JSON-lines file mirrors every insert and is replayed on open.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{Dims, TelemetryRecord};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("unknown collection '{0}'")]
    UnknownCollection(String),
    #[error("query limit must be at least 1")]
    ZeroLimit,
    #[error("persistence file line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("persistence i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    #[default]
    RecentFirst,
    OldestFirst,
}

/// Dimension constraints; unset fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimsFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<u64>,
}

impl DimsFilter {
    pub fn slice(name: &str) -> Self {
        Self {
            slice: Some(name.to_owned()),
            ..Self::default()
        }
    }

    pub fn matches(&self, dims: &Dims) -> bool {
        (self.slice.is_none() || self.slice == dims.slice)
            && (self.supi.is_none() || self.supi == dims.supi)
            && (self.session_id.is_none() || self.session_id == dims.session_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub collection: String,
    #[serde(default)]
    pub dims_filter: DimsFilter,
    pub limit: usize,
    #[serde(default)]
    pub order: Order,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionInfo {
    pub name: String,
    pub count: usize,
    pub min_ts: u64,
    pub max_ts: u64,
}

#[derive(Default)]
pub struct AnalyticsStore {
    collections: BTreeMap<String, Vec<TelemetryRecord>>,
    journal: Option<BufWriter<File>>,
}

impl AnalyticsStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (or creates) a JSON-lines journal, loading any records it holds.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let mut store = Self::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: TelemetryRecord =
                    serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                store.insert(record).map_err(|e| StoreError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.journal = Some(BufWriter::new(file));
        Ok(store)
    }

    pub fn insert(&mut self, record: TelemetryRecord) -> Result<String, StoreError> {
        record.validate().map_err(StoreError::Malformed)?;
        if let Some(journal) = self.journal.as_mut() {
            serde_json::to_writer(&mut *journal, &record)
                .map_err(|e| StoreError::Io(e.into()))?;
            journal.write_all(b"\n")?;
        }
        let name = record.collection_name();
        let records = self.collections.entry(name.clone()).or_default();
        let ts = record.timestamp_ms;
        if records.last().is_none_or(|last| last.timestamp_ms <= ts) {
            records.push(record);
        } else {
            let at = records.partition_point(|r| r.timestamp_ms <= ts);
            records.insert(at, record);
        }
        Ok(name)
    }

    pub fn flush(&mut self) -> Result<(), StoreError> {
        if let Some(journal) = self.journal.as_mut() {
            journal.flush()?;
        }
        Ok(())
    }

    pub fn list_collections(&self) -> Vec<CollectionInfo> {
        self.collections
            .iter()
            .filter(|(_, records)| !records.is_empty())
            .map(|(name, records)| CollectionInfo {
                name: name.clone(),
                count: records.len(),
                min_ts: records.first().map_or(0, |r| r.timestamp_ms),
                max_ts: records.last().map_or(0, |r| r.timestamp_ms),
            })
            .collect()
    }

    pub fn contains(&self, collection: &str) -> bool {
        self.collections.contains_key(collection)
    }

    pub fn query(&self, q: &Query) -> Result<Vec<TelemetryRecord>, StoreError> {
        if q.limit == 0 {
            return Err(StoreError::ZeroLimit);
        }
        let records = self
            .collections
            .get(&q.collection)
            .ok_or_else(|| StoreError::UnknownCollection(q.collection.clone()))?;
        let matching = |r: &&TelemetryRecord| q.dims_filter.matches(&r.dims);
        let out = match q.order {
            Order::RecentFirst => records
                .iter()
                .rev()
                .filter(matching)
                .take(q.limit)
                .cloned()
                .collect(),
            Order::OldestFirst => records
                .iter()
                .filter(matching)
                .take(q.limit)
                .cloned()
                .collect(),
        };
        Ok(out)
    }

    /// The last `n` matching values in chronological order.
    pub fn recent_values(
        &self,
        collection: &str,
        filter: &DimsFilter,
        n: usize,
    ) -> Result<Vec<f64>, StoreError> {
        let mut values: Vec<f64> = self
            .query(&Query {
                collection: collection.to_owned(),
                dims_filter: filter.clone(),
                limit: n.max(1),
                order: Order::RecentFirst,
            })?
            .into_iter()
            .map(|r| r.value)
            .collect();
        values.reverse();
        Ok(values)
    }

    pub fn total_records(&self) -> usize {
        self.collections.values().map(Vec::len).sum()
    }

    /// Every stored record, collection by collection.
    pub fn iter(&self) -> impl Iterator<Item = &TelemetryRecord> {
        self.collections.values().flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::NfKind;
    use proptest::prelude::*;

    fn rec(nf: NfKind, metric: &str, slice: &str, ts: u64, value: f64) -> TelemetryRecord {
        TelemetryRecord {
            source_nf: nf,
            metric: metric.into(),
            value,
            unit: "x".into(),
            timestamp_ms: ts,
            dims: Dims::slice(slice),
        }
    }

    #[test]
    fn insert_derives_collection_name() {
        let mut store = AnalyticsStore::new();
        assert!(store.list_collections().is_empty());
        let name = store
            .insert(rec(NfKind::Upf, "memory_utilization_pct", "internet", 0, 50.0))
            .unwrap();
        assert_eq!(name, "upf.memory_utilization_pct");
        assert!(store.contains("upf.memory_utilization_pct"));
    }

    #[test]
    fn nan_rejected() {
        let mut store = AnalyticsStore::new();
        let err = store
            .insert(rec(NfKind::Upf, "throughput_dl_kbps", "internet", 0, f64::NAN))
            .unwrap_err();
        assert!(matches!(err, StoreError::Malformed(_)));
        assert!(store.list_collections().is_empty());
    }

    #[test]
    fn list_counts() {
        let mut store = AnalyticsStore::new();
        for ts in 0..3 {
            store.insert(rec(NfKind::Smf, "active_sessions", "a", ts * 10, 1.0)).unwrap();
        }
        assert_eq!(
            store.list_collections(),
            vec![CollectionInfo {
                name: "smf.active_sessions".into(),
                count: 3,
                min_ts: 0,
                max_ts: 20
            }]
        );
        store.insert(rec(NfKind::Pcf, "policy_decisions", "a", 0, 1.0)).unwrap();
        assert_eq!(store.list_collections().len(), 2);
    }

    #[test]
    fn recent_first_returns_latest() {
        let mut store = AnalyticsStore::new();
        for ts in 0..600u64 {
            store
                .insert(rec(NfKind::Upf, "memory_utilization_pct", "internet", ts, ts as f64 / 10.0))
                .unwrap();
        }
        let q = Query {
            collection: "upf.memory_utilization_pct".into(),
            dims_filter: DimsFilter::default(),
            limit: 500,
            order: Order::RecentFirst,
        };
        let out = store.query(&q).unwrap();
        assert_eq!(out.len(), 500);
        assert_eq!(out[0].timestamp_ms, 599);
        assert_eq!(out[499].timestamp_ms, 100);
    }

    #[test]
    fn slice_filter_is_exact() {
        let mut store = AnalyticsStore::new();
        for ts in 0..10u64 {
            let slice = if ts % 2 == 0 { "internet" } else { "streaming" };
            store.insert(rec(NfKind::Upf, "memory_utilization_pct", slice, ts, 1.0)).unwrap();
        }
        let out = store
            .query(&Query {
                collection: "upf.memory_utilization_pct".into(),
                dims_filter: DimsFilter::slice("internet"),
                limit: 100,
                order: Order::OldestFirst,
            })
            .unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|r| r.dims.slice.as_deref() == Some("internet")));
    }

    #[test]
    fn unknown_collection_is_named() {
        let store = AnalyticsStore::new();
        let err = store
            .query(&Query {
                collection: "upf.nope".into(),
                dims_filter: DimsFilter::default(),
                limit: 1,
                order: Order::RecentFirst,
            })
            .unwrap_err();
        assert!(err.to_string().contains("upf.nope"));
    }

    #[test]
    fn journal_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        {
            let mut store = AnalyticsStore::open(&path).unwrap();
            for ts in 0..5 {
                store.insert(rec(NfKind::Upf, "memory_utilization_pct", "internet", ts, 42.0)).unwrap();
            }
            store.flush().unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        let store = AnalyticsStore::open(&path).unwrap();
        assert_eq!(store.total_records(), 5);
    }

    #[test]
    fn corrupt_journal_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        std::fs::write(&path, "{\"bad\":1}\n").unwrap();
        match AnalyticsStore::open(&path) {
            Err(StoreError::Corrupt { line: 1, .. }) => {}
            other => panic!("unexpected: {:?}", other.map(|_| ())),
        }
    }

    proptest! {
        #[test]
        fn query_matches_filter_then_sort_oracle(
            items in prop::collection::vec((0u64..50, 0usize..3, -100.0f64..100.0), 1..200),
            limit in 1usize..80,
            recent in any::<bool>(),
            filter_slice in prop::option::of(0usize..3),
        ) {
            let slices = ["a", "b", "c"];
            let mut store = AnalyticsStore::new();
            let mut inserted = Vec::new();
            for (ts, s, v) in &items {
                let r = rec(NfKind::Upf, "throughput_dl_kbps", slices[*s], *ts, *v);
                store.insert(r.clone()).unwrap();
                inserted.push(r);
            }
            // Oracle: stable sort by timestamp keeps insertion order on ties.
            let mut sorted = inserted.clone();
            sorted.sort_by_key(|r| r.timestamp_ms);
            let filter = DimsFilter { slice: filter_slice.map(|i| slices[i].to_string()), ..Default::default() };
            let filtered: Vec<_> = sorted.into_iter().filter(|r| filter.matches(&r.dims)).collect();
            let expected: Vec<_> = if recent {
                filtered.iter().rev().take(limit).cloned().collect()
            } else {
                filtered.iter().take(limit).cloned().collect()
            };
            let got = store.query(&Query {
                collection: "upf.throughput_dl_kbps".into(),
                dims_filter: filter,
                limit,
                order: if recent { Order::RecentFirst } else { Order::OldestFirst },
            }).unwrap();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn insert_increments_count_by_one(n in 0usize..30) {
            let mut store = AnalyticsStore::new();
            for ts in 0..n as u64 {
                store.insert(rec(NfKind::Pcf, "policy_decisions", "a", ts, 0.0)).unwrap();
            }
            let before = store.list_collections().first().map_or(0, |c| c.count);
            store.insert(rec(NfKind::Pcf, "policy_decisions", "a", 1000, 0.0)).unwrap();
            prop_assert_eq!(store.list_collections()[0].count, before + 1);
        }
    }
}
