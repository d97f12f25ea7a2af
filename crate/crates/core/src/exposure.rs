//! Event exposure: filtered subscriptions over the telemetry stream.
//!
//! Every matching record is delivered to every live subscription exactly once.
//! Store sinks are written synchronously; queue and webhook sinks receive
//! batched [`Notification`]s once `batch_period_ms` of virtual time has passed
//! since the first record of the pending batch. Only records published after
//! a subscription exists are delivered to it.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{NfKind, TelemetryRecord};
use crate::store::AnalyticsStore;

/// Webhook retries after the first failed attempt.
pub const WEBHOOK_MAX_RETRIES: u32 = 3;
/// Virtual delay before the first retry; doubles on each further retry.
pub const WEBHOOK_BACKOFF_MS: u64 = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum ExposureError {
    #[error("invalid sink: {0}")]
    InvalidSink(String),
    #[error("batch_period_ms must be positive")]
    InvalidBatchPeriod,
    #[error("unknown subscription '{0}'")]
    UnknownSubscription(String),
    #[error("malformed record: {0}")]
    Malformed(String),
}

/// A record matches iff every constrained field matches; empty sets match all.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFilter {
    #[serde(default)]
    pub source_nfs: BTreeSet<NfKind>,
    #[serde(default)]
    pub metrics: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supi: Option<String>,
}

impl EventFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn matches(&self, record: &TelemetryRecord) -> bool {
        (self.source_nfs.is_empty() || self.source_nfs.contains(&record.source_nf))
            && (self.metrics.is_empty() || self.metrics.contains(&record.metric))
            && (self.slice.is_none() || self.slice == record.dims.slice)
            && (self.supi.is_none() || self.supi == record.dims.supi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Sink {
    Store,
    Webhook { url: String },
    Queue,
}

impl Sink {
    fn validate(&self) -> Result<(), ExposureError> {
        if let Sink::Webhook { url } = self {
            let parsed = url::Url::parse(url)
                .map_err(|e| ExposureError::InvalidSink(format!("webhook url '{url}': {e}")))?;
            if !matches!(parsed.scheme(), "http" | "https") || parsed.host().is_none() {
                return Err(ExposureError::InvalidSink(format!(
                    "webhook url '{url}' must be http(s) with a host"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSubscription {
    pub sub_id: String,
    pub filter: EventFilter,
    pub sink: Sink,
    pub batch_period_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub sub_id: String,
    pub seq: u64,
    pub records: Vec<TelemetryRecord>,
}

/// Delivers a notification to a webhook url.
pub trait WebhookTransport: Send + Sync {
    fn post(&self, url: &str, notification: &Notification) -> Result<(), String>;
}

/// Blocking HTTP POST of the notification as JSON.
pub struct HttpWebhook {
    agent: ureq::Agent,
}

impl HttpWebhook {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent }
    }
}

impl Default for HttpWebhook {
    fn default() -> Self {
        Self::new(Duration::from_secs(2))
    }
}

impl WebhookTransport for HttpWebhook {
    fn post(&self, url: &str, notification: &Notification) -> Result<(), String> {
        self.agent
            .post(url)
            .send_json(notification)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscriptionStats {
    pub delivered_records: u64,
    pub notifications: u64,
    pub errors: u64,
    pub pending_records: usize,
}

struct Retry {
    due_ms: u64,
    attempt: u32,
    notification: Notification,
}

struct SubState {
    sub: EventSubscription,
    pending: Vec<TelemetryRecord>,
    batch_started_ms: u64,
    next_seq: u64,
    queue: VecDeque<Notification>,
    retries: Vec<Retry>,
    stats: SubscriptionStats,
}

pub struct EventExposure {
    subs: BTreeMap<String, SubState>,
    next_id: u64,
    watermarks: HashMap<(NfKind, String), u64>,
    transport: Box<dyn WebhookTransport>,
}

impl Default for EventExposure {
    fn default() -> Self {
        Self::new(Box::new(HttpWebhook::default()))
    }
}

impl EventExposure {
    pub fn new(transport: Box<dyn WebhookTransport>) -> Self {
        Self {
            subs: BTreeMap::new(),
            next_id: 1,
            watermarks: HashMap::new(),
            transport,
        }
    }

    pub fn subscribe(
        &mut self,
        filter: EventFilter,
        sink: Sink,
        batch_period_ms: u64,
    ) -> Result<String, ExposureError> {
        sink.validate()?;
        if batch_period_ms == 0 {
            return Err(ExposureError::InvalidBatchPeriod);
        }
        let sub_id = format!("sub-{:04}", self.next_id);
        self.next_id += 1;
        self.subs.insert(
            sub_id.clone(),
            SubState {
                sub: EventSubscription {
                    sub_id: sub_id.clone(),
                    filter,
                    sink,
                    batch_period_ms,
                },
                pending: Vec::new(),
                batch_started_ms: 0,
                next_seq: 1,
                queue: VecDeque::new(),
                retries: Vec::new(),
                stats: SubscriptionStats::default(),
            },
        );
        Ok(sub_id)
    }

    /// Removes the subscription after delivering whatever it already accepted.
    pub fn unsubscribe(&mut self, sub_id: &str) -> Result<Vec<Notification>, ExposureError> {
        let state = self
            .subs
            .get_mut(sub_id)
            .ok_or_else(|| ExposureError::UnknownSubscription(sub_id.to_owned()))?;
        Self::seal_batch(state);
        let mut state = self.subs.remove(sub_id).expect("present");
        self.deliver_ready(&mut state, u64::MAX);
        Ok(state.queue.into_iter().collect())
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &EventSubscription> {
        self.subs.values().map(|s| &s.sub)
    }

    pub fn stats(&self, sub_id: &str) -> Option<SubscriptionStats> {
        self.subs.get(sub_id).map(|s| SubscriptionStats {
            pending_records: s.pending.len(),
            ..s.stats.clone()
        })
    }

    /// Routes one record to every matching subscription; returns how many matched.
    pub fn publish(
        &mut self,
        record: &TelemetryRecord,
        store: &mut AnalyticsStore,
    ) -> Result<usize, ExposureError> {
        record.validate().map_err(ExposureError::Malformed)?;
        let key = (record.source_nf, record.metric.clone());
        if let Some(&last) = self.watermarks.get(&key) {
            if record.timestamp_ms < last {
                return Err(ExposureError::Malformed(format!(
                    "{}.{} timestamp {} precedes {}",
                    record.source_nf, record.metric, record.timestamp_ms, last
                )));
            }
        }
        self.watermarks.insert(key, record.timestamp_ms);

        let mut count = 0;
        for state in self.subs.values_mut() {
            if !state.sub.filter.matches(record) {
                continue;
            }
            count += 1;
            match state.sub.sink {
                Sink::Store => {
                    store
                        .insert(record.clone())
                        .map_err(|e| ExposureError::Malformed(e.to_string()))?;
                    state.next_seq += 1;
                    state.stats.delivered_records += 1;
                    state.stats.notifications += 1;
                }
                Sink::Queue | Sink::Webhook { .. } => {
                    if state.pending.is_empty() {
                        state.batch_started_ms = record.timestamp_ms;
                    }
                    state.pending.push(record.clone());
                }
            }
        }
        Ok(count)
    }

    /// Flushes batches whose period has elapsed and runs due webhook retries.
    pub fn flush_due(&mut self, now_ms: u64) {
        let ids: Vec<String> = self.subs.keys().cloned().collect();
        for id in ids {
            let mut state = self.subs.remove(&id).expect("listed");
            if !state.pending.is_empty()
                && now_ms.saturating_sub(state.batch_started_ms) >= state.sub.batch_period_ms
            {
                Self::seal_batch(&mut state);
            }
            self.deliver_ready(&mut state, now_ms);
            self.subs.insert(id, state);
        }
    }

    /// Flushes every pending batch regardless of its period.
    pub fn flush_all(&mut self, now_ms: u64) {
        for state in self.subs.values_mut() {
            Self::seal_batch(state);
        }
        self.flush_due(now_ms);
    }

    /// Takes queued notifications of an in-process queue subscription.
    pub fn drain_queue(&mut self, sub_id: &str) -> Result<Vec<Notification>, ExposureError> {
        let state = self
            .subs
            .get_mut(sub_id)
            .ok_or_else(|| ExposureError::UnknownSubscription(sub_id.to_owned()))?;
        Ok(state.queue.drain(..).collect())
    }

    fn seal_batch(state: &mut SubState) {
        if state.pending.is_empty() {
            return;
        }
        let notification = Notification {
            sub_id: state.sub.sub_id.clone(),
            seq: state.next_seq,
            records: std::mem::take(&mut state.pending),
        };
        state.next_seq += 1;
        state.stats.notifications += 1;
        state.stats.delivered_records += notification.records.len() as u64;
        match state.sub.sink {
            Sink::Queue => state.queue.push_back(notification),
            Sink::Webhook { .. } => state.retries.push(Retry {
                due_ms: 0,
                attempt: 0,
                notification,
            }),
            Sink::Store => unreachable!("store sinks never batch"),
        }
    }

    fn deliver_ready(&self, state: &mut SubState, now_ms: u64) {
        let Sink::Webhook { url } = &state.sub.sink else {
            return;
        };
        let mut waiting = Vec::new();
        for mut retry in std::mem::take(&mut state.retries) {
            if retry.due_ms > now_ms {
                waiting.push(retry);
                continue;
            }
            if self.transport.post(url, &retry.notification).is_ok() {
                continue;
            }
            if retry.attempt >= WEBHOOK_MAX_RETRIES || now_ms == u64::MAX {
                state.stats.errors += 1;
                continue;
            }
            let backoff = WEBHOOK_BACKOFF_MS << retry.attempt;
            retry.attempt += 1;
            retry.due_ms = now_ms + backoff;
            waiting.push(retry);
        }
        state.retries = waiting;
    }
}
