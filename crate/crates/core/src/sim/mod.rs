//! Simulated 5G core: slices, UEs, PDU sessions and the UPF/SMF/PCF
//! emulators that emit telemetry on every virtual clock tick.

mod config;
mod types;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{MemoryModel, SimConfig, UeAssignment};
pub use types::{
    is_valid_supi, metrics, Dims, Kbps, NfKind, PduSession, SessionState, SliceConfig, Snssai,
    TelemetryRecord, UeContext, UeState,
};

use crate::clock::{parse_epoch, VirtualClock};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid slice config: {0}")]
    InvalidSlice(String),
    #[error("slice '{0}' already exists")]
    DuplicateSlice(String),
    #[error("unknown slice '{0}'")]
    UnknownSlice(String),
    #[error("malformed supi '{0}': expected imsi- followed by 15 digits")]
    MalformedSupi(String),
    #[error("supi '{0}' is already attached")]
    DuplicateSupi(String),
    #[error("session {0} not found")]
    UnknownSession(u64),
    #[error("session {session_id} is {state}; cannot {action}")]
    InvalidTransition {
        session_id: u64,
        state: SessionState,
        action: &'static str,
    },
    #[error("{what} {requested} exceeds capacity {capacity}")]
    CapacityExceeded {
        what: &'static str,
        requested: Kbps,
        capacity: Kbps,
    },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone)]
struct SliceState {
    config: SliceConfig,
    baseline: (Kbps, Kbps),
    memory_pct: f64,
    policy_decisions: u64,
}

/// Comparable view of all mutable network state (telemetry excluded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSnapshot {
    pub now_ms: u64,
    pub slices: Vec<SliceConfig>,
    pub ues: Vec<UeContext>,
    pub sessions: Vec<PduSession>,
}

impl SimSnapshot {
    /// Network state without the clock, for "did anything change" checks.
    pub fn same_network_state(&self, other: &SimSnapshot) -> bool {
        self.slices == other.slices && self.ues == other.ues && self.sessions == other.sessions
    }
}

pub struct CoreSim {
    clock: VirtualClock,
    rng: ChaCha8Rng,
    memory: MemoryModel,
    emit_telemetry: bool,
    default_five_qi: u8,
    slices: Vec<SliceState>,
    ues: BTreeMap<String, UeContext>,
    sessions: BTreeMap<u64, PduSession>,
    throughput: BTreeMap<u64, f64>,
    next_session_id: u64,
    events: Vec<TelemetryRecord>,
}

impl CoreSim {
    pub fn new(clock: VirtualClock, seed: u64) -> Self {
        Self {
            clock,
            rng: ChaCha8Rng::seed_from_u64(seed),
            memory: MemoryModel::default(),
            emit_telemetry: true,
            default_five_qi: 9,
            slices: Vec::new(),
            ues: BTreeMap::new(),
            sessions: BTreeMap::new(),
            throughput: BTreeMap::new(),
            next_session_id: 1,
            events: Vec::new(),
        }
    }

    /// Builds a simulation from config: slices first, then UEs in index order.
    pub fn from_config(cfg: &SimConfig) -> Result<Self, SimError> {
        if cfg.tick_ms == 0 {
            return Err(SimError::InvalidConfig("tick_ms must be positive".into()));
        }
        let epoch = parse_epoch(&cfg.epoch)
            .map_err(|e| SimError::InvalidConfig(format!("epoch '{}': {e}", cfg.epoch)))?;
        let m = cfg.memory;
        if !(m.sigma >= 0.0 && m.phi.abs() < 1.0 && (0.0..=100.0).contains(&m.mean)) {
            return Err(SimError::InvalidConfig(
                "memory model needs 0<=mean<=100, |phi|<1, sigma>=0".into(),
            ));
        }
        let mut sim = CoreSim::new(VirtualClock::new(epoch, cfg.tick_ms), cfg.seed);
        sim.memory = m;
        sim.emit_telemetry = cfg.emit_telemetry;
        sim.default_five_qi = cfg.five_qi;
        for slice in &cfg.slices {
            sim.create_slice(slice.clone())?;
        }
        if cfg.num_ues > 0 && cfg.slices.is_empty() {
            return Err(SimError::InvalidConfig("num_ues > 0 but no slices".into()));
        }
        for i in 0..cfg.num_ues {
            let slice = match &cfg.ue_assignment {
                UeAssignment::RoundRobin => cfg.slices[i % cfg.slices.len()].name.clone(),
                UeAssignment::Explicit(names) => names.get(i).cloned().ok_or_else(|| {
                    SimError::InvalidConfig(format!("explicit ue_assignment has no entry for UE {i}"))
                })?,
            };
            sim.attach_ue(&SimConfig::supi_for(i), &slice)?;
        }
        // Establishment bookkeeping is not part of the telemetry stream.
        sim.events.clear();
        Ok(sim)
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn create_slice(&mut self, cfg: SliceConfig) -> Result<&SliceConfig, SimError> {
        cfg.validate()?;
        if self.slice_index(&cfg.name).is_some() {
            return Err(SimError::DuplicateSlice(cfg.name));
        }
        self.slices.push(SliceState {
            baseline: (cfg.ambr_dl, cfg.ambr_ul),
            memory_pct: self.memory.mean,
            policy_decisions: 0,
            config: cfg,
        });
        Ok(&self.slices.last().expect("just pushed").config)
    }

    fn slice_index(&self, name: &str) -> Option<usize> {
        self.slices.iter().position(|s| s.config.name == name)
    }

    pub fn slice(&self, name: &str) -> Option<&SliceConfig> {
        self.slice_index(name).map(|i| &self.slices[i].config)
    }

    /// AMBR captured when the slice was created.
    pub fn slice_baseline(&self, name: &str) -> Option<(Kbps, Kbps)> {
        self.slice_index(name).map(|i| self.slices[i].baseline)
    }

    pub fn slices(&self) -> impl Iterator<Item = &SliceConfig> {
        self.slices.iter().map(|s| &s.config)
    }

    pub fn ues(&self) -> impl Iterator<Item = &UeContext> {
        self.ues.values()
    }

    pub fn session(&self, id: u64) -> Option<&PduSession> {
        self.sessions.get(&id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &PduSession> {
        self.sessions.values()
    }

    pub fn active_sessions_on<'a>(&'a self, slice: &'a str) -> impl Iterator<Item = &'a PduSession> {
        self.sessions
            .values()
            .filter(move |s| s.slice_name == slice && s.state == SessionState::Active)
    }

    pub fn attach_ue(&mut self, supi: &str, slice_name: &str) -> Result<UeContext, SimError> {
        if !is_valid_supi(supi) {
            return Err(SimError::MalformedSupi(supi.to_owned()));
        }
        let idx = self
            .slice_index(slice_name)
            .ok_or_else(|| SimError::UnknownSlice(slice_name.to_owned()))?;
        if self.ues.contains_key(supi) {
            return Err(SimError::DuplicateSupi(supi.to_owned()));
        }
        let ue = UeContext {
            supi: supi.to_owned(),
            slice_name: slice_name.to_owned(),
            state: UeState::Registered,
        };
        self.ues.insert(supi.to_owned(), ue.clone());

        let slice = &mut self.slices[idx];
        let session = PduSession {
            session_id: self.next_session_id,
            supi: supi.to_owned(),
            slice_name: slice_name.to_owned(),
            five_qi: self.default_five_qi,
            session_ambr_dl: slice.config.ambr_dl,
            session_ambr_ul: slice.config.ambr_ul,
            state: SessionState::Active,
        };
        slice.policy_decisions += 1;
        self.throughput
            .insert(session.session_id, session.session_ambr_dl as f64 / 2.0);
        self.sessions.insert(session.session_id, session);
        self.next_session_id += 1;
        Ok(ue)
    }

    pub fn set_session_ambr(
        &mut self,
        session_id: u64,
        dl_kbps: Kbps,
        ul_kbps: Kbps,
    ) -> Result<PduSession, SimError> {
        let session = self
            .sessions
            .get(&session_id)
            .ok_or(SimError::UnknownSession(session_id))?;
        if session.state != SessionState::Active {
            return Err(SimError::InvalidTransition {
                session_id,
                state: session.state,
                action: "modify AMBR",
            });
        }
        let slice = self
            .slice(&session.slice_name)
            .expect("sessions always reference an existing slice");
        if dl_kbps == 0 || ul_kbps == 0 {
            return Err(SimError::InvalidSlice("session AMBR must be positive".into()));
        }
        if dl_kbps > slice.capacity_dl {
            return Err(SimError::CapacityExceeded {
                what: "session_ambr_dl",
                requested: dl_kbps,
                capacity: slice.capacity_dl,
            });
        }
        if ul_kbps > slice.capacity_ul {
            return Err(SimError::CapacityExceeded {
                what: "session_ambr_ul",
                requested: ul_kbps,
                capacity: slice.capacity_ul,
            });
        }
        let session = self.sessions.get_mut(&session_id).expect("checked above");
        session.session_ambr_dl = dl_kbps;
        session.session_ambr_ul = ul_kbps;
        let session = session.clone();
        self.push_session_ambr_event(&session);
        Ok(session)
    }

    fn push_session_ambr_event(&mut self, session: &PduSession) {
        self.events.push(TelemetryRecord {
            source_nf: NfKind::Smf,
            metric: metrics::SESSION_AMBR_DL.into(),
            value: session.session_ambr_dl as f64,
            unit: "kbps".into(),
            timestamp_ms: self.clock.now_ms(),
            dims: Dims {
                slice: Some(session.slice_name.clone()),
                supi: Some(session.supi.clone()),
                session_id: Some(session.session_id),
            },
        });
    }

    /// Sets the slice AMBR and propagates it to every active session of the slice.
    pub fn set_slice_ambr(
        &mut self,
        name: &str,
        dl_kbps: Kbps,
        ul_kbps: Kbps,
    ) -> Result<SliceConfig, SimError> {
        let idx = self
            .slice_index(name)
            .ok_or_else(|| SimError::UnknownSlice(name.to_owned()))?;
        let cfg = &self.slices[idx].config;
        if dl_kbps == 0 || ul_kbps == 0 {
            return Err(SimError::InvalidSlice(format!("slice '{name}': ambr must be positive")));
        }
        if dl_kbps > cfg.capacity_dl {
            return Err(SimError::CapacityExceeded {
                what: "ambr_dl",
                requested: dl_kbps,
                capacity: cfg.capacity_dl,
            });
        }
        if ul_kbps > cfg.capacity_ul {
            return Err(SimError::CapacityExceeded {
                what: "ambr_ul",
                requested: ul_kbps,
                capacity: cfg.capacity_ul,
            });
        }
        let slice = &mut self.slices[idx];
        slice.config.ambr_dl = dl_kbps;
        slice.config.ambr_ul = ul_kbps;
        slice.policy_decisions += 1;
        let updated = slice.config.clone();

        let ids: Vec<u64> = self.active_sessions_on(name).map(|s| s.session_id).collect();
        for id in ids {
            let session = self.sessions.get_mut(&id).expect("listed above");
            session.session_ambr_dl = dl_kbps;
            session.session_ambr_ul = ul_kbps;
            let session = session.clone();
            self.push_session_ambr_event(&session);
        }
        Ok(updated)
    }

    /// Releases a session, passing through `releasing` on the way to `released`.
    pub fn release_session(&mut self, session_id: u64) -> Result<PduSession, SimError> {
        let session = self
            .sessions
            .get_mut(&session_id)
            .ok_or(SimError::UnknownSession(session_id))?;
        if session.state == SessionState::Released {
            return Err(SimError::InvalidTransition {
                session_id,
                state: session.state,
                action: "release",
            });
        }
        session.state = SessionState::Releasing;
        session.state = SessionState::Released;
        let session = session.clone();
        self.throughput.remove(&session_id);
        if let Some(ue) = self.ues.get_mut(&session.supi) {
            ue.state = UeState::Deregistered;
        }
        Ok(session)
    }

    /// Moves the clock one tick forward without producing telemetry.
    pub fn tick_clock(&mut self) -> u64 {
        self.clock.tick()
    }

    /// Drains records produced by mutations since the last call.
    pub fn drain_events(&mut self) -> Vec<TelemetryRecord> {
        std::mem::take(&mut self.events)
    }

    /// Samples every emitter once at the current clock time.
    pub fn emit_telemetry(&mut self) -> Vec<TelemetryRecord> {
        if !self.emit_telemetry {
            return Vec::new();
        }
        let now = self.clock.now_ms();
        let mut out = Vec::new();

        let ids: Vec<u64> = self
            .sessions
            .values()
            .filter(|s| s.state == SessionState::Active)
            .map(|s| s.session_id)
            .collect();
        for id in ids {
            let session = &self.sessions[&id];
            let cap = session.session_ambr_dl as f64;
            let step = Normal::new(0.0, 0.05 * cap).expect("finite std");
            let current = self.throughput.get(&id).copied().unwrap_or(cap / 2.0);
            let next = (current + step.sample(&mut self.rng)).clamp(0.0, cap);
            self.throughput.insert(id, next);
            out.push(TelemetryRecord {
                source_nf: NfKind::Upf,
                metric: metrics::THROUGHPUT_DL.into(),
                value: next,
                unit: "kbps".into(),
                timestamp_ms: now,
                dims: Dims {
                    slice: Some(session.slice_name.clone()),
                    supi: Some(session.supi.clone()),
                    session_id: Some(id),
                },
            });
        }

        let noise = Normal::new(0.0, self.memory.sigma).expect("finite sigma");
        let MemoryModel { mean, phi, .. } = self.memory;
        for slice in &mut self.slices {
            let x = mean + phi * (slice.memory_pct - mean) + noise.sample(&mut self.rng);
            slice.memory_pct = x.clamp(0.0, 100.0);
            out.push(TelemetryRecord {
                source_nf: NfKind::Upf,
                metric: metrics::MEMORY_UTILIZATION.into(),
                value: slice.memory_pct,
                unit: "%".into(),
                timestamp_ms: now,
                dims: Dims::slice(&slice.config.name),
            });
        }

        for slice in &self.slices {
            let active = self
                .sessions
                .values()
                .filter(|s| s.slice_name == slice.config.name && s.state == SessionState::Active)
                .count();
            out.push(TelemetryRecord {
                source_nf: NfKind::Smf,
                metric: metrics::ACTIVE_SESSIONS.into(),
                value: active as f64,
                unit: "count".into(),
                timestamp_ms: now,
                dims: Dims::slice(&slice.config.name),
            });
        }

        for slice in &self.slices {
            let name = &slice.config.name;
            for (metric, value, unit) in [
                (metrics::POLICY_DECISIONS, slice.policy_decisions as f64, "count"),
                (metrics::SLICE_AMBR_DL, slice.config.ambr_dl as f64, "kbps"),
                (metrics::SLICE_AMBR_UL, slice.config.ambr_ul as f64, "kbps"),
            ] {
                out.push(TelemetryRecord {
                    source_nf: NfKind::Pcf,
                    metric: metric.into(),
                    value,
                    unit: unit.into(),
                    timestamp_ms: now,
                    dims: Dims::slice(name),
                });
            }
        }
        out
    }

    /// One full tick: clock, pending mutation events, then sampled telemetry.
    pub fn step(&mut self) -> Vec<TelemetryRecord> {
        self.tick_clock();
        let mut out = self.drain_events();
        out.extend(self.emit_telemetry());
        out
    }

    pub fn advance(&mut self, steps: u64) -> Vec<TelemetryRecord> {
        let mut out = Vec::new();
        for _ in 0..steps {
            out.extend(self.step());
        }
        out
    }

    pub fn snapshot(&self) -> SimSnapshot {
        SimSnapshot {
            now_ms: self.clock.now_ms(),
            slices: self.slices().cloned().collect(),
            ues: self.ues.values().cloned().collect(),
            sessions: self.sessions.values().cloned().collect(),
        }
    }
}
