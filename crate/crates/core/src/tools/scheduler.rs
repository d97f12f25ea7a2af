//! Monitoring manager: applies scheduled policy changes while the virtual
//! clock is inside their window and restores the captured baseline on exit.

use std::collections::BTreeMap;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use super::policy::{AmbrField, Baseline, PolicyChange, TimeWindow};
use crate::sim::CoreSim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionState {
    Pending,
    Active,
    RevertedIdle,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledAction {
    pub action_id: String,
    pub change: PolicyChange,
    pub window: TimeWindow,
    pub state: ActionState,
    pub applied_at: Option<u64>,
    pub reverted_at: Option<u64>,
    /// Completed apply/revert cycles.
    pub cycles: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Applied,
    Reverted,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerEvent {
    pub action_id: String,
    pub kind: EventKind,
    pub at_ms: u64,
    pub slice_name: String,
    pub ambr_dl: u64,
    pub ambr_ul: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Default)]
pub struct Scheduler {
    actions: BTreeMap<String, ScheduledAction>,
    history: Vec<SchedulerEvent>,
    next_id: u64,
}

impl Scheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn actions(&self) -> impl Iterator<Item = &ScheduledAction> {
        self.actions.values()
    }

    pub fn action(&self, id: &str) -> Option<&ScheduledAction> {
        self.actions.get(id)
    }

    pub fn history(&self) -> &[SchedulerEvent] {
        &self.history
    }

    /// First live action on the same slice and field whose window overlaps.
    pub fn overlapping<'a>(
        &'a self,
        slice: &'a str,
        field: AmbrField,
        window: &TimeWindow,
    ) -> Option<&'a ScheduledAction> {
        self.live_on(slice, field).find(|a| a.window.overlaps(window))
    }

    /// Action currently holding the given slice field inside its window.
    pub fn active_on<'a>(&'a self, slice: &'a str, field: AmbrField) -> Option<&'a ScheduledAction> {
        self.live_on(slice, field).find(|a| a.state == ActionState::Active)
    }

    fn live_on<'a>(
        &'a self,
        slice: &'a str,
        field: AmbrField,
    ) -> impl Iterator<Item = &'a ScheduledAction> {
        self.actions.values().filter(move |a| {
            a.state != ActionState::Cancelled
                && a.change.slice_name == slice
                && a.change.field.overlaps(field)
        })
    }

    pub fn register(&mut self, change: PolicyChange, window: TimeWindow) -> String {
        self.next_id += 1;
        let action_id = format!("act-{:04}", self.next_id);
        self.actions.insert(
            action_id.clone(),
            ScheduledAction {
                action_id: action_id.clone(),
                change,
                window,
                state: ActionState::Pending,
                applied_at: None,
                reverted_at: None,
                cycles: 0,
            },
        );
        action_id
    }

    /// Applies or reverts every action according to the current instant.
    pub fn evaluate(
        &mut self,
        now: &DateTime<FixedOffset>,
        now_ms: u64,
        sim: &mut CoreSim,
    ) -> Vec<SchedulerEvent> {
        let mut events = Vec::new();
        for action in self.actions.values_mut() {
            if action.state == ActionState::Cancelled {
                continue;
            }
            let inside = action.window.contains(now);
            if inside && action.state != ActionState::Active {
                events.push(apply(action, now_ms, sim));
            } else if !inside && action.state == ActionState::Active {
                events.push(revert(action, now_ms, sim));
            }
        }
        self.history.extend(events.iter().cloned());
        events
    }

    /// Cancels an action, restoring its baseline first if it is active.
    pub fn cancel(
        &mut self,
        action_id: &str,
        now_ms: u64,
        sim: &mut CoreSim,
    ) -> Option<ScheduledAction> {
        let action = self.actions.get_mut(action_id)?;
        if action.state == ActionState::Active {
            let event = revert(action, now_ms, sim);
            self.history.push(event);
        }
        action.state = ActionState::Cancelled;
        Some(action.clone())
    }
}

fn current(sim: &CoreSim, slice: &str) -> Option<Baseline> {
    sim.slice(slice).map(|s| Baseline {
        dl: s.ambr_dl,
        ul: s.ambr_ul,
    })
}

fn event(action: &ScheduledAction, kind: EventKind, at_ms: u64, sim: &CoreSim, detail: Option<String>) -> SchedulerEvent {
    let now = current(sim, &action.change.slice_name).unwrap_or(Baseline { dl: 0, ul: 0 });
    SchedulerEvent {
        action_id: action.action_id.clone(),
        kind,
        at_ms,
        slice_name: action.change.slice_name.clone(),
        ambr_dl: now.dl,
        ambr_ul: now.ul,
        detail,
    }
}

fn apply(action: &mut ScheduledAction, now_ms: u64, sim: &mut CoreSim) -> SchedulerEvent {
    let slice = action.change.slice_name.clone();
    let Some(baseline) = current(sim, &slice) else {
        return event(action, EventKind::Failed, now_ms, sim, Some(format!("slice '{slice}' vanished")));
    };
    let target = action.change.target(baseline, baseline);
    match sim.set_slice_ambr(&slice, target.dl, target.ul) {
        Ok(_) => {
            action.change.baseline = Some(baseline);
            action.state = ActionState::Active;
            action.applied_at = Some(now_ms);
            event(action, EventKind::Applied, now_ms, sim, None)
        }
        Err(e) => event(action, EventKind::Failed, now_ms, sim, Some(e.to_string())),
    }
}

fn revert(action: &mut ScheduledAction, now_ms: u64, sim: &mut CoreSim) -> SchedulerEvent {
    let slice = action.change.slice_name.clone();
    let baseline = action.change.baseline.expect("active actions carry a baseline");
    let now = current(sim, &slice).unwrap_or(baseline);
    let restored = Baseline {
        dl: if action.change.field.touches_dl() { baseline.dl } else { now.dl },
        ul: if action.change.field.touches_ul() { baseline.ul } else { now.ul },
    };
    let detail = sim
        .set_slice_ambr(&slice, restored.dl, restored.ul)
        .err()
        .map(|e| e.to_string());
    action.state = ActionState::RevertedIdle;
    action.reverted_at = Some(now_ms);
    action.cycles += 1;
    let kind = if detail.is_some() { EventKind::Failed } else { EventKind::Reverted };
    event(action, kind, now_ms, sim, detail)
}
