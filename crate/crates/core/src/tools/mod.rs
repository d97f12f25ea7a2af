//! Intent tools engine.
//!
//! [`Engine`] owns the simulated core, the analytics store, event exposure,
//! the monitoring manager and the approval registry, and implements every
//! intent tool on top of them. All mutation goes through one `&mut Engine`;
//! [`EngineHandle`] provides the shared single-writer wrapper used by the
//! gateway, the agent and the HTTP server.

pub mod approval;
pub mod catalog;
pub mod forecast;
pub mod kpi;
pub mod policy;
pub mod scheduler;

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::exposure::{EventExposure, EventFilter, Sink};
use crate::gateway::ToolFailure;
use crate::sim::{CoreSim, PduSession, SessionState, SimConfig, SimError, TelemetryRecord};
use crate::store::{AnalyticsStore, DimsFilter};

pub use approval::{ApprovalError, ApprovalState, ApprovalToken, Approvals, Decision};
pub use forecast::{ForecastParams, ForecastReport};
pub use kpi::KpiStats;
pub use policy::{AmbrField, Baseline, ChangeMode, Day, PolicyChange, TimeOfDay, TimeWindow};
pub use scheduler::{ActionState, ScheduledAction, Scheduler, SchedulerEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub reasons: Vec<String>,
    pub computed_values: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub now_ms: u64,
    pub records: usize,
    pub scheduler_events: Vec<SchedulerEvent>,
    pub expired_tokens: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdvanceReport {
    pub now_ms: u64,
    pub now: String,
    pub ticks: u64,
    pub records: usize,
    pub scheduler_events: Vec<SchedulerEvent>,
    pub expired_tokens: usize,
}

impl From<SimError> for ToolFailure {
    fn from(e: SimError) -> Self {
        ToolFailure::precondition(e.to_string())
    }
}

impl From<ApprovalError> for ToolFailure {
    fn from(e: ApprovalError) -> Self {
        ToolFailure::approval(e.to_string())
    }
}

pub struct Engine {
    pub sim: CoreSim,
    pub store: AnalyticsStore,
    pub exposure: EventExposure,
    pub scheduler: Scheduler,
    pub approvals: Approvals,
    store_subscription: String,
    next_change: u64,
}

impl Engine {
    /// Wires the store in as a sink subscribed to every record.
    pub fn new(
        sim: CoreSim,
        store: AnalyticsStore,
        mut exposure: EventExposure,
        approvals: Approvals,
    ) -> Self {
        let store_subscription = exposure
            .subscribe(EventFilter::all(), Sink::Store, 1)
            .expect("store sink is always valid");
        Self {
            sim,
            store,
            exposure,
            scheduler: Scheduler::new(),
            approvals,
            store_subscription,
            next_change: 0,
        }
    }

    pub fn from_config(cfg: &SimConfig) -> Result<Self, SimError> {
        Ok(Self::new(
            CoreSim::from_config(cfg)?,
            AnalyticsStore::new(),
            EventExposure::default(),
            Approvals::default(),
        ))
    }

    pub fn store_subscription(&self) -> &str {
        &self.store_subscription
    }

    pub fn now_ms(&self) -> u64 {
        self.sim.now_ms()
    }

    fn publish(&mut self, records: Vec<TelemetryRecord>) -> usize {
        let n = records.len();
        for record in &records {
            // Simulator output always satisfies the record invariants.
            let _ = self.exposure.publish(record, &mut self.store);
        }
        n
    }

    /// Publishes records produced by mutations since the last tick.
    pub fn publish_events(&mut self) -> usize {
        let events = self.sim.drain_events();
        self.publish(events)
    }

    /// One tick: clock, monitoring manager, token expiry, telemetry, delivery.
    pub fn tick(&mut self) -> TickReport {
        let now_ms = self.sim.tick_clock();
        let now = self.sim.clock().now();
        let scheduler_events = self.scheduler.evaluate(&now, now_ms, &mut self.sim);
        let expired_tokens = self.approvals.expire(now_ms);
        let mut records = self.sim.drain_events();
        records.extend(self.sim.emit_telemetry());
        let records = self.publish(records);
        self.exposure.flush_due(now_ms);
        TickReport {
            now_ms,
            records,
            scheduler_events,
            expired_tokens,
        }
    }

    pub fn advance(&mut self, ticks: u64) -> AdvanceReport {
        let mut report = AdvanceReport::default();
        for _ in 0..ticks {
            let t = self.tick();
            report.records += t.records;
            report.expired_tokens += t.expired_tokens;
            report.scheduler_events.extend(t.scheduler_events);
        }
        let _ = self.store.flush();
        report.ticks = ticks;
        report.now_ms = self.now_ms();
        report.now = self.sim.clock().now().to_rfc3339();
        report
    }

    /// Advances by whole ticks covering `duration_ms`.
    pub fn advance_by_ms(&mut self, duration_ms: u64) -> AdvanceReport {
        let ticks = self.sim.clock().ticks_for(duration_ms);
        self.advance(ticks)
    }

    pub fn next_change_id(&mut self) -> String {
        self.next_change += 1;
        format!("chg-{:04}", self.next_change)
    }

    fn baseline_for(&self, change: &PolicyChange) -> Option<(Baseline, Baseline)> {
        let slice = self.sim.slice(&change.slice_name)?;
        let current = Baseline {
            dl: slice.ambr_dl,
            ul: slice.ambr_ul,
        };
        let base = self
            .scheduler
            .active_on(&change.slice_name, change.field)
            .and_then(|a| a.change.baseline)
            .unwrap_or(current);
        Some((base, current))
    }

    pub fn feasibility_check(
        &self,
        change: &PolicyChange,
        window: Option<&TimeWindow>,
    ) -> FeasibilityReport {
        let mut reasons = Vec::new();
        let mut values = BTreeMap::new();
        if let Err(e) = change.validate_amount() {
            reasons.push(e);
        }
        match (self.sim.slice(&change.slice_name), self.baseline_for(change)) {
            (Some(slice), Some((base, current))) => {
                values.insert("baseline_dl".into(), json!(base.dl));
                values.insert("baseline_ul".into(), json!(base.ul));
                values.insert("capacity_dl".into(), json!(slice.capacity_dl));
                values.insert("capacity_ul".into(), json!(slice.capacity_ul));
                if reasons.is_empty() {
                    let target = change.target(base, current);
                    if change.field.touches_dl() {
                        values.insert("new_ambr_dl".into(), json!(target.dl));
                        check_rate(&mut reasons, "ambr_dl", target.dl, slice.capacity_dl);
                    }
                    if change.field.touches_ul() {
                        values.insert("new_ambr_ul".into(), json!(target.ul));
                        check_rate(&mut reasons, "ambr_ul", target.ul, slice.capacity_ul);
                    }
                }
            }
            _ => reasons.push(format!("unknown slice '{}'", change.slice_name)),
        }
        match window {
            Some(window) => {
                if let Err(e) = window.validate() {
                    reasons.push(e);
                } else if let Some(other) =
                    self.scheduler
                        .overlapping(&change.slice_name, change.field, window)
                {
                    reasons.push(format!(
                        "overlaps scheduled action {} ({})",
                        other.action_id, other.window
                    ));
                }
            }
            None => {
                if let Some(active) = self.scheduler.active_on(&change.slice_name, change.field) {
                    reasons.push(format!(
                        "conflicts with active scheduled action {}",
                        active.action_id
                    ));
                }
            }
        }
        FeasibilityReport {
            feasible: reasons.is_empty(),
            reasons,
            computed_values: values,
        }
    }

    pub fn kpi_analyze(
        &self,
        collection: &str,
        filter: &DimsFilter,
        last_n: usize,
    ) -> Result<KpiStats, ToolFailure> {
        if last_n < 2 {
            return Err(ToolFailure::precondition("last_n must be at least 2"));
        }
        let values = self
            .store
            .recent_values(collection, filter, last_n)
            .map_err(|e| ToolFailure::precondition(e.to_string()))?;
        kpi::kpi_stats(&values).ok_or_else(|| {
            ToolFailure::precondition(format!(
                "insufficient data: {} matching value(s) in '{collection}', need at least 2",
                values.len()
            ))
        })
    }

    pub fn forecast(
        &self,
        collection: &str,
        filter: &DimsFilter,
        params: &ForecastParams,
    ) -> Result<ForecastReport, ToolFailure> {
        params
            .validate()
            .map_err(|e| ToolFailure::precondition(e.to_string()))?;
        let values = self
            .store
            .recent_values(collection, filter, params.history_n)
            .map_err(|e| ToolFailure::precondition(e.to_string()))?;
        forecast::forecast(&values, params).map_err(|e| ToolFailure::precondition(e.to_string()))
    }

    pub fn schedule_policy(
        &mut self,
        change: PolicyChange,
        window: TimeWindow,
        token: Option<&str>,
    ) -> Result<ScheduledAction, ToolFailure> {
        let report = self.feasibility_check(&change, Some(&window));
        if !report.feasible {
            return Err(ToolFailure::precondition(format!(
                "infeasible: {}",
                report.reasons.join("; ")
            )));
        }
        let now_ms = self.now_ms();
        self.approvals.consume(token, now_ms)?;
        let id = self.scheduler.register(change, window);
        let now = self.sim.clock().now();
        self.scheduler.evaluate(&now, now_ms, &mut self.sim);
        self.publish_events();
        Ok(self.scheduler.action(&id).expect("just registered").clone())
    }

    pub fn apply_policy_now(
        &mut self,
        mut change: PolicyChange,
        token: Option<&str>,
    ) -> Result<PolicyChange, ToolFailure> {
        change
            .validate_amount()
            .map_err(ToolFailure::precondition)?;
        if let Some(active) = self.scheduler.active_on(&change.slice_name, change.field) {
            return Err(ToolFailure::precondition(format!(
                "conflict: scheduled action {} is active on slice '{}'",
                active.action_id, change.slice_name
            )));
        }
        let report = self.feasibility_check(&change, None);
        if !report.feasible {
            return Err(ToolFailure::precondition(format!(
                "infeasible: {}",
                report.reasons.join("; ")
            )));
        }
        let now_ms = self.now_ms();
        self.approvals.consume(token, now_ms)?;
        let (base, current) = self.baseline_for(&change).expect("feasible implies slice exists");
        let target = change.target(base, current);
        self.sim.set_slice_ambr(&change.slice_name, target.dl, target.ul)?;
        self.publish_events();
        change.baseline = Some(base);
        Ok(change)
    }

    pub fn cancel_schedule(
        &mut self,
        action_id: &str,
        token: Option<&str>,
    ) -> Result<ScheduledAction, ToolFailure> {
        match self.scheduler.action(action_id) {
            None => {
                return Err(ToolFailure::precondition(format!(
                    "unknown scheduled action '{action_id}'"
                )))
            }
            Some(a) if a.state == ActionState::Cancelled => {
                return Err(ToolFailure::precondition(format!(
                    "scheduled action '{action_id}' is already cancelled"
                )))
            }
            Some(_) => {}
        }
        let now_ms = self.now_ms();
        self.approvals.consume(token, now_ms)?;
        let action = self
            .scheduler
            .cancel(action_id, now_ms, &mut self.sim)
            .expect("checked above");
        self.publish_events();
        Ok(action)
    }

    pub fn list_sessions(&self) -> Vec<PduSession> {
        self.sim.sessions().cloned().collect()
    }

    fn modifiable_session(&self, session_id: u64, action: &'static str) -> Result<&PduSession, ToolFailure> {
        let session = self
            .sim
            .session(session_id)
            .ok_or_else(|| ToolFailure::precondition(format!("session {session_id} not found")))?;
        let allowed = match action {
            "release" => session.state != SessionState::Released,
            _ => session.state == SessionState::Active,
        };
        if !allowed {
            return Err(ToolFailure::precondition(format!(
                "invalid transition: session {session_id} is {}; cannot {action}",
                session.state
            )));
        }
        Ok(session)
    }

    pub fn modify_session_qos(
        &mut self,
        session_id: u64,
        dl_kbps: Option<u64>,
        ul_kbps: Option<u64>,
        token: Option<&str>,
    ) -> Result<PduSession, ToolFailure> {
        let session = self.modifiable_session(session_id, "modify_qos")?;
        let dl = dl_kbps.unwrap_or(session.session_ambr_dl);
        let ul = ul_kbps.unwrap_or(session.session_ambr_ul);
        let slice = self
            .sim
            .slice(&session.slice_name)
            .expect("sessions reference existing slices");
        if dl == 0 || ul == 0 {
            return Err(ToolFailure::precondition("session AMBR must be positive"));
        }
        if dl > slice.capacity_dl || ul > slice.capacity_ul {
            return Err(ToolFailure::precondition(format!(
                "requested {dl}/{ul} kbps exceeds slice capacity {}/{}",
                slice.capacity_dl, slice.capacity_ul
            )));
        }
        let now_ms = self.now_ms();
        self.approvals.consume(token, now_ms)?;
        let updated = self.sim.set_session_ambr(session_id, dl, ul)?;
        self.publish_events();
        Ok(updated)
    }

    pub fn release_session(
        &mut self,
        session_id: u64,
        token: Option<&str>,
    ) -> Result<PduSession, ToolFailure> {
        self.modifiable_session(session_id, "release")?;
        let now_ms = self.now_ms();
        self.approvals.consume(token, now_ms)?;
        let released = self.sim.release_session(session_id)?;
        self.publish_events();
        Ok(released)
    }

    pub fn request_confirmation(&mut self, action_summary: &str) -> ApprovalToken {
        let now_ms = self.now_ms();
        self.approvals.request(action_summary, now_ms)
    }

    pub fn resolve_approval(
        &mut self,
        token: &str,
        decision: Decision,
    ) -> Result<ApprovalToken, ApprovalError> {
        let now_ms = self.now_ms();
        self.approvals.resolve(token, decision, now_ms)
    }
}

fn check_rate(reasons: &mut Vec<String>, what: &str, value: u64, capacity: u64) {
    if value == 0 {
        reasons.push(format!("resulting {what} must be positive"));
    } else if value > capacity {
        reasons.push(format!("{what} {value} exceeds capacity {capacity}"));
    }
}

/// Shared single-writer wrapper with a change signal for waiters.
pub struct EngineHandle {
    engine: RwLock<Engine>,
    generation: Mutex<u64>,
    changed: Condvar,
}

impl EngineHandle {
    pub fn new(engine: Engine) -> Self {
        Self {
            engine: RwLock::new(engine),
            generation: Mutex::new(0),
            changed: Condvar::new(),
        }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Engine> {
        self.engine.read().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` with exclusive access, then wakes waiters.
    pub fn write<T>(&self, f: impl FnOnce(&mut Engine) -> T) -> T {
        let out = {
            let mut guard: RwLockWriteGuard<'_, Engine> =
                self.engine.write().unwrap_or_else(|e| e.into_inner());
            f(&mut guard)
        };
        self.notify();
        out
    }

    pub fn notify(&self) {
        let mut generation = self.generation.lock().unwrap_or_else(|e| e.into_inner());
        *generation += 1;
        self.changed.notify_all();
    }

    pub fn generation(&self) -> u64 {
        *self.generation.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Blocks until the generation moves past `seen` or the timeout elapses.
    pub fn wait_change(&self, seen: u64, timeout: Duration) -> u64 {
        let guard = self.generation.lock().unwrap_or_else(|e| e.into_inner());
        let (guard, _) = self
            .changed
            .wait_timeout_while(guard, timeout, |g| *g == seen)
            .unwrap_or_else(|e| e.into_inner());
        *guard
    }
}
