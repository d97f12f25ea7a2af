//! Registers every data-retrieval, intent and safety tool on a registry.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use super::{
    AmbrField, ChangeMode, Day, EngineHandle, ForecastParams, PolicyChange, TimeOfDay, TimeWindow,
};
use crate::gateway::{
    arg, required_arg, EntityKind, GatewayError, Mutation, ParamSpec, ParamsSchema, Registry,
    ToolDescriptor, ToolFailure, ToolGroup,
};
use crate::store::{DimsFilter, Order, Query};

pub const DEFAULT_QUERY_LIMIT: u64 = 50;
pub const MAX_QUERY_LIMIT: f64 = 10_000.0;

const DAY_NAMES: &[&str] = &[
    "mon", "tue", "wed", "thu", "fri", "sat", "sun", "weekdays", "weekends", "daily",
];

fn slice_param() -> ParamSpec {
    ParamSpec::string("Slice name, as reported by get_slice_config").entity(EntityKind::Slice)
}

fn collection_param() -> ParamSpec {
    ParamSpec::string("Collection name, as reported by list_collections")
        .entity(EntityKind::Collection)
}

fn change_params(schema: ParamsSchema) -> ParamsSchema {
    schema
        .required("slice_name", slice_param())
        .optional(
            "field",
            ParamSpec::string("AMBR direction to change (default ambr_dl)")
                .one_of(&["ambr_dl", "ambr_ul", "both"]),
        )
        .optional(
            "mode",
            ParamSpec::string("percent_delta (signed %, default) or absolute (kbps)")
                .one_of(&["percent_delta", "absolute"]),
        )
        .required("amount", ParamSpec::number("Signed percentage or absolute kbps"))
}

fn window_params(schema: ParamsSchema, required: bool) -> ParamsSchema {
    let start = ParamSpec::string("Window start, HH:MM local time");
    let end = ParamSpec::string("Window end (exclusive), HH:MM local time");
    let days = ParamSpec::array_of(
        ParamSpec::string("Day name or group").one_of(DAY_NAMES),
        "Days the window recurs on",
    );
    if required {
        schema
            .required("window_start", start)
            .required("window_end", end)
            .required("days", days)
    } else {
        schema
            .optional("window_start", start)
            .optional("window_end", end)
            .optional("days", days)
    }
}

fn token_param(schema: ParamsSchema) -> ParamsSchema {
    schema.optional(
        "approval_token",
        ParamSpec::string("Approved token from request_confirmation"),
    )
}

fn dims_params(schema: ParamsSchema) -> ParamsSchema {
    schema
        .optional("slice", slice_param())
        .optional("supi", ParamSpec::string("UE identifier imsi-<15 digits>"))
        .optional(
            "session_id",
            ParamSpec::integer("PDU session id")
                .range(Some(1.0), None)
                .entity(EntityKind::Session),
        )
}

fn dims_filter(args: &Map<String, Value>) -> Result<DimsFilter, ToolFailure> {
    Ok(DimsFilter {
        slice: arg(args, "slice")?,
        supi: arg(args, "supi")?,
        session_id: arg(args, "session_id")?,
    })
}

fn parse_change(change_id: String, args: &Map<String, Value>) -> Result<PolicyChange, ToolFailure> {
    Ok(PolicyChange {
        change_id,
        slice_name: required_arg(args, "slice_name")?,
        field: arg(args, "field")?.unwrap_or(AmbrField::AmbrDl),
        mode: arg(args, "mode")?.unwrap_or(ChangeMode::PercentDelta),
        amount: required_arg(args, "amount")?,
        baseline: None,
    })
}

fn parse_window(args: &Map<String, Value>) -> Result<Option<TimeWindow>, ToolFailure> {
    let start: Option<String> = arg(args, "window_start")?;
    let end: Option<String> = arg(args, "window_end")?;
    let days: Option<Vec<String>> = arg(args, "days")?;
    let (start, end) = match (start, end) {
        (None, None) => return Ok(None),
        (Some(s), Some(e)) => (s, e),
        _ => {
            return Err(ToolFailure::precondition(
                "window_start and window_end must be given together",
            ))
        }
    };
    let start: TimeOfDay = start.parse().map_err(ToolFailure::precondition)?;
    let end: TimeOfDay = end.parse().map_err(ToolFailure::precondition)?;
    let mut set = Vec::new();
    for name in days.unwrap_or_else(|| vec!["daily".into()]) {
        let expanded = Day::parse_set(&name)
            .ok_or_else(|| ToolFailure::precondition(format!("unknown day '{name}'")))?;
        set.extend(expanded);
    }
    Ok(Some(TimeWindow::new(start, end, set)))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Value, ToolFailure> {
    serde_json::to_value(value).map_err(|e| ToolFailure::internal(e.to_string()))
}

/// Builds the full tool catalog over a shared engine.
pub fn build_registry(handle: Arc<EngineHandle>) -> Result<Registry, GatewayError> {
    let mut reg = Registry::new();

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "list_collections",
            ToolGroup::DataRetrieval,
            "List telemetry collections with record counts and time ranges.",
            ParamsSchema::new(),
        ),
        move |_| {
            let collections = h.read().store.list_collections();
            Ok(json!({ "collections": collections }))
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "query_data",
            ToolGroup::DataRetrieval,
            "Fetch telemetry records from one collection, optionally filtered by slice, supi or session.",
            dims_params(ParamsSchema::new().required("collection", collection_param()))
                .optional(
                    "limit",
                    ParamSpec::integer("Maximum records (default 50)")
                        .range(Some(1.0), Some(MAX_QUERY_LIMIT)),
                )
                .optional(
                    "order",
                    ParamSpec::string("recent_first (default) or oldest_first")
                        .one_of(&["recent_first", "oldest_first"]),
                ),
        ),
        move |args| {
            let query = Query {
                collection: required_arg(args, "collection")?,
                dims_filter: dims_filter(args)?,
                limit: arg::<u64>(args, "limit")?.unwrap_or(DEFAULT_QUERY_LIMIT) as usize,
                order: arg::<Order>(args, "order")?.unwrap_or_default(),
            };
            let records = h
                .read()
                .store
                .query(&query)
                .map_err(|e| ToolFailure::precondition(e.to_string()))?;
            Ok(json!({
                "collection": query.collection,
                "count": records.len(),
                "records": records,
            }))
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "get_slice_config",
            ToolGroup::DataRetrieval,
            "Current configuration of one slice or all slices, with active session counts.",
            ParamsSchema::new().optional("slice_name", slice_param()),
        ),
        move |args| {
            let wanted: Option<String> = arg(args, "slice_name")?;
            let engine = h.read();
            let mut slices = Vec::new();
            for slice in engine.sim.slices() {
                if wanted.as_ref().is_some_and(|w| *w != slice.name) {
                    continue;
                }
                let (base_dl, base_ul) = engine.sim.slice_baseline(&slice.name).unwrap_or_default();
                let mut entry = to_json(slice)?;
                entry["baseline_ambr_dl"] = json!(base_dl);
                entry["baseline_ambr_ul"] = json!(base_ul);
                entry["active_sessions"] = json!(engine.sim.active_sessions_on(&slice.name).count());
                slices.push(entry);
            }
            if let (Some(name), true) = (&wanted, slices.is_empty()) {
                return Err(ToolFailure::precondition(format!("unknown slice '{name}'")));
            }
            Ok(json!({ "slices": slices }))
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "list_schedules",
            ToolGroup::DataRetrieval,
            "Scheduled policy actions and their apply/revert history.",
            ParamsSchema::new(),
        ),
        move |_| {
            let engine = h.read();
            let actions: Vec<_> = engine.scheduler.actions().cloned().collect();
            Ok(json!({ "actions": actions, "history": engine.scheduler.history() }))
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "feasibility_check",
            ToolGroup::Intent,
            "Check whether an AMBR change (optionally within a time window) is possible without applying it.",
            window_params(change_params(ParamsSchema::new()), false),
        ),
        move |args| {
            let change = parse_change("proposed".into(), args)?;
            let window = parse_window(args)?;
            let report = h.read().feasibility_check(&change, window.as_ref());
            to_json(&report)
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "kpi_analyze",
            ToolGroup::Intent,
            "Summary statistics (mean, std, min, max, p95, trend slope) over the last N values of a collection.",
            dims_params(ParamsSchema::new().required("collection", collection_param())).required(
                "last_n",
                ParamSpec::integer("Number of most recent values").range(Some(2.0), Some(MAX_QUERY_LIMIT)),
            ),
        ),
        move |args| {
            let collection: String = required_arg(args, "collection")?;
            let last_n: u64 = required_arg(args, "last_n")?;
            let stats = h
                .read()
                .kpi_analyze(&collection, &dims_filter(args)?, last_n as usize)?;
            let mut out = to_json(&stats)?;
            out["collection"] = json!(collection);
            Ok(out)
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "forecast",
            ToolGroup::Intent,
            "Autoregressive forecast of a collection: fits on history, reports holdout R-squared and the next values.",
            dims_params(ParamsSchema::new().required("collection", collection_param()))
                .required(
                    "history_n",
                    ParamSpec::integer("Values of history to use").range(Some(5.0), Some(MAX_QUERY_LIMIT)),
                )
                .required(
                    "window_w",
                    ParamSpec::integer("Lag window size").range(Some(1.0), Some(200.0)),
                )
                .required(
                    "horizon_h",
                    ParamSpec::integer("Steps to predict").range(Some(1.0), Some(1000.0)),
                )
                .optional(
                    "holdout_frac",
                    ParamSpec::number("Holdout fraction in (0, 0.5), default 0.2")
                        .range(Some(0.0), Some(0.5)),
                ),
        ),
        move |args| {
            let collection: String = required_arg(args, "collection")?;
            let params = ForecastParams {
                history_n: required_arg::<u64>(args, "history_n")? as usize,
                window_w: required_arg::<u64>(args, "window_w")? as usize,
                horizon_h: required_arg::<u64>(args, "horizon_h")? as usize,
                holdout_frac: arg(args, "holdout_frac")?.unwrap_or(0.2),
            };
            let report = h.read().forecast(&collection, &dims_filter(args)?, &params)?;
            let mut out = to_json(&report)?;
            out["collection"] = json!(collection);
            Ok(out)
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "schedule_policy",
            ToolGroup::Intent,
            "Schedule an AMBR change that is applied inside a recurring time window and reverted outside it. Requires an approved token.",
            token_param(window_params(change_params(ParamsSchema::new()), true)),
        )
        .mutating(Mutation::Always),
        move |args| {
            let change = parse_change(h.write(|e| e.next_change_id()), args)?;
            let window = parse_window(args)?.expect("window is required by the schema");
            let token: Option<String> = arg(args, "approval_token")?;
            let action = h.write(|e| e.schedule_policy(change, window, token.as_deref()))?;
            to_json(&action)
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "apply_policy_now",
            ToolGroup::Intent,
            "Apply an AMBR change immediately. Requires an approved token.",
            token_param(change_params(ParamsSchema::new())),
        )
        .mutating(Mutation::Always),
        move |args| {
            let change = parse_change(h.write(|e| e.next_change_id()), args)?;
            let token: Option<String> = arg(args, "approval_token")?;
            let applied = h.write(|e| e.apply_policy_now(change, token.as_deref()))?;
            to_json(&applied)
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "cancel_schedule",
            ToolGroup::Intent,
            "Cancel a scheduled action, restoring the baseline if it is active. Requires an approved token.",
            token_param(ParamsSchema::new().required(
                "action_id",
                ParamSpec::string("Scheduled action id").entity(EntityKind::Action),
            )),
        )
        .mutating(Mutation::Always),
        move |args| {
            let id: String = required_arg(args, "action_id")?;
            let token: Option<String> = arg(args, "approval_token")?;
            let action = h.write(|e| e.cancel_schedule(&id, token.as_deref()))?;
            to_json(&action)
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "session_tool",
            ToolGroup::Intent,
            "List PDU sessions, or modify a session's AMBR, or release a session. modify_qos and release require an approved token.",
            token_param(
                ParamsSchema::new()
                    .required(
                        "op",
                        ParamSpec::string("Operation").one_of(&["list", "modify_qos", "release"]),
                    )
                    .optional(
                        "session_id",
                        ParamSpec::integer("PDU session id")
                            .range(Some(1.0), None)
                            .entity(EntityKind::Session),
                    )
                    .optional("slice", slice_param())
                    .optional(
                        "ambr_dl",
                        ParamSpec::integer("New session AMBR downlink, kbps").range(Some(1.0), None),
                    )
                    .optional(
                        "ambr_ul",
                        ParamSpec::integer("New session AMBR uplink, kbps").range(Some(1.0), None),
                    ),
            ),
        )
        .mutating(Mutation::WhenArg {
            arg: "op".into(),
            values: vec!["modify_qos".into(), "release".into()],
        }),
        move |args| {
            let op: String = required_arg(args, "op")?;
            let token: Option<String> = arg(args, "approval_token")?;
            match op.as_str() {
                "list" => {
                    let slice: Option<String> = arg(args, "slice")?;
                    let sessions: Vec<_> = h
                        .read()
                        .list_sessions()
                        .into_iter()
                        .filter(|s| slice.as_ref().is_none_or(|n| *n == s.slice_name))
                        .collect();
                    Ok(json!({ "sessions": sessions }))
                }
                "modify_qos" => {
                    let id: u64 = required_arg(args, "session_id")?;
                    let dl: Option<u64> = arg(args, "ambr_dl")?;
                    let ul: Option<u64> = arg(args, "ambr_ul")?;
                    if dl.is_none() && ul.is_none() {
                        return Err(ToolFailure::precondition(
                            "modify_qos needs ambr_dl and/or ambr_ul",
                        ));
                    }
                    let s = h.write(|e| e.modify_session_qos(id, dl, ul, token.as_deref()))?;
                    to_json(&s)
                }
                _ => {
                    let id: u64 = required_arg(args, "session_id")?;
                    let s = h.write(|e| e.release_session(id, token.as_deref()))?;
                    to_json(&s)
                }
            }
        },
    )?;

    let h = handle.clone();
    reg.register(
        ToolDescriptor::new(
            "request_confirmation",
            ToolGroup::Safety,
            "Ask the human operator to approve a state-changing action. Returns a pending approval token.",
            ParamsSchema::new().required(
                "action_summary",
                ParamSpec::string("One-line description of the exact action to approve"),
            ),
        ),
        move |args| {
            let summary: String = required_arg(args, "action_summary")?;
            let token = h.write(|e| e.request_confirmation(&summary));
            to_json(&token)
        },
    )?;

    // validate_call checks against every schema registered so far, itself excluded.
    let schemas: BTreeMap<String, ParamsSchema> = reg
        .descriptors()
        .into_iter()
        .map(|d| (d.name, d.params_schema))
        .collect();
    reg.register(
        ToolDescriptor::new(
            "validate_call",
            ToolGroup::Safety,
            "Check a prospective tool call against its parameter schema without running it.",
            ParamsSchema::new()
                .required("name", ParamSpec::string("Tool name"))
                .required("arguments", ParamSpec::new(crate::gateway::ParamType::Object, "Arguments")),
        ),
        move |args| {
            let name: String = required_arg(args, "name")?;
            let arguments: Map<String, Value> = required_arg(args, "arguments")?;
            let Some(schema) = schemas.get(&name) else {
                return Ok(json!({ "valid": false, "violations": [format!("unknown tool '{name}'")] }));
            };
            Ok(match schema.validate_map(&arguments) {
                Ok(()) => json!({ "valid": true, "violations": [] }),
                Err(v) => json!({ "valid": false, "violations": [v.to_string()] }),
            })
        },
    )?;

    Ok(reg)
}
