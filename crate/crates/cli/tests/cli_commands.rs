mod support;

use std::time::Duration;

use netintent_cli::{ApiClient, ApiError};
use serde_json::{json, Value};
use support::{netintent, poll, Server};

const INTENT: &str = "Increase the bandwidth of the 'streaming' slice by 20% between 16:27 and 16:30 on weekdays.";

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json_out(server: &Server, args: &[&str]) -> Value {
    serde_json::from_str(&server.cli(args).unwrap()).unwrap()
}

/// Submits the demo intent at Mon 16:26 and approves its token; returns (intent id, token).
fn completed_intent(server: &Server) -> (String, String) {
    server.cli(&["clock", "advance", "6m"]).unwrap();
    let id = server.cli(&["intent", "submit", INTENT]).unwrap();
    let token = poll("approval", Duration::from_secs(5), || {
        Ok(server
            .cli(&["approvals", "list", "--pending"])?
            .split_whitespace()
            .next()
            .map(str::to_owned))
    })
    .unwrap();
    assert_eq!(server.cli(&["approve", &token]).unwrap(), format!("{token} approved"));
    poll("completion", Duration::from_secs(5), || {
        let status = json_out(server, &["intent", "status", &id]);
        Ok((status["status"] != "running" && status["status"] != "awaiting_approval").then_some(()))
    })
    .unwrap();
    (id, token)
}

#[test]
fn malformed_config_names_the_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"seed\": 7,, \"tick_ms\": 1000}").unwrap();
    let out = netintent(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("byte offset 11"), "{}", stderr(&out));

    let out = netintent(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn occupied_port_is_a_bind_error() {
    let server = Server::start().unwrap();
    let addr = server.api.trim_start_matches("http://").to_owned();
    let config = support::configs().join("demo.json");
    let out = netintent(&["run", "--config", config.to_str().unwrap(), "--bind", &addr]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cannot bind"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_2_and_transport_errors_exit_1() {
    assert_eq!(netintent(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(netintent(&["approve"]).status.code(), Some(2));
    let out = netintent(&["clock", "show"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cannot reach"), "{}", stderr(&out));
}

#[test]
fn clock_advances_by_duration_and_rejects_negative() {
    let server = Server::start().unwrap();
    let start = json_out(&server, &["clock", "show"]);
    assert_eq!(start["now"], "2025-09-22T16:20:00+00:00");
    assert_eq!(server.cli(&["clock", "advance", "0s"]).unwrap(), "2025-09-22T16:20:00+00:00");

    let out = server.raw(&["clock", "advance", "-1s"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("negative"), "{}", stderr(&out));
    assert_eq!(json_out(&server, &["clock", "show"])["now_ms"], start["now_ms"]);

    assert_eq!(server.cli(&["clock", "advance", "1h30m"]).unwrap(), "2025-09-22T17:50:00+00:00");
    assert_eq!(server.raw(&["clock", "advance", "soon"]).status.code(), Some(1));
}

#[test]
fn unknown_ids_exit_1() {
    let server = Server::start().unwrap();
    for args in [
        &["intent", "status", "int-9999"][..],
        &["intent", "trace", "int-9999"],
        &["approve", "apv-9999"],
        &["collections", "records", "no.such"],
    ] {
        let out = server.raw(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr(&out).contains("HTTP 404"), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn approved_intent_completes_and_its_token_cannot_be_reused() {
    let server = Server::start().unwrap();
    let (id, token) = completed_intent(&server);
    assert_eq!(json_out(&server, &["intent", "status", &id])["status"], "done");

    let out = server.raw(&["approve", &token, "--decision", "deny"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("HTTP 409"), "{}", stderr(&out));

    let listed = server.cli(&["approvals", "list"]).unwrap();
    assert!(listed.starts_with(&token) && listed.contains("consumed"), "{listed}");
    assert!(server.cli(&["approvals", "list", "--pending"]).unwrap().is_empty());

    let intents = server.cli(&["intent", "list"]).unwrap();
    assert!(intents.contains(&id) && intents.contains("done"), "{intents}");
    let schedules = json_out(&server, &["schedules", "list"]);
    assert_eq!(schedules["actions"].as_array().unwrap().len(), 1);
}

#[test]
fn trace_renders_verdicts_and_ends_with_the_answer() {
    let server = Server::start().unwrap();
    let (id, _) = completed_intent(&server);
    let text = server.cli(&["intent", "trace", &id]).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.iter().any(|l| l.contains("schedule_policy") && l.ends_with("-> needs approval")), "{text}");
    assert!(lines.iter().any(|l| l.contains("request_confirmation") && l.contains("(automatic)")), "{text}");
    assert!(lines.iter().any(|l| l.contains("list_collections") && l.ends_with("-> allowed")), "{text}");
    assert_eq!(lines.last(), Some(&"status: done"));

    let trace = json_out(&server, &["intent", "trace", &id, "--json"]);
    let kinds: Vec<&str> = trace["entries"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds[kinds.len() - 3..], ["final_answer", "summary", "status"]);

    let followed = server.cli(&["intent", "follow", &id]).unwrap();
    assert_eq!(followed.lines().count(), kinds.len() + 1);
    assert!(followed.ends_with("status: done"));
}

#[test]
fn stream_resumes_after_last_event_id() {
    let server = Server::start().unwrap();
    let (id, _) = completed_intent(&server);
    let api = ApiClient::new(&server.api);
    let total = api.get(&format!("/intents/{id}/trace")).unwrap()["entries"].as_array().unwrap().len();

    let mut ids = Vec::new();
    let mut end = None;
    api.stream(&format!("/intents/{id}/stream"), Some("3"), |e| {
        if e.event == "end" {
            end = Some(e.data);
            return false;
        }
        let entry: Value = serde_json::from_str(&e.data).unwrap();
        assert_eq!(entry["kind"], e.event.as_str());
        ids.push(e.id.unwrap().parse::<usize>().unwrap());
        true
    })
    .unwrap();
    assert_eq!(ids, (4..total).collect::<Vec<_>>());
    let end: Value = serde_json::from_str(&end.expect("end event")).unwrap();
    assert_eq!(end["status"], "done");

    let mut from = Vec::new();
    api.stream(&format!("/intents/{id}/stream?from={}", total - 2), None, |e| {
        from.push(e.event);
        true
    })
    .unwrap();
    assert_eq!(from, ["summary", "status", "end"]);
}

#[test]
fn tools_are_callable_and_gated() {
    let server = Server::start().unwrap();
    let listed = json_out(&server, &["tools", "list"]);
    let names: Vec<&str> = listed["tools"].as_array().unwrap().iter().map(|t| t["name"].as_str().unwrap()).collect();
    for tool in ["list_collections", "query_data", "kpi_analyze", "feasibility_check", "schedule_policy"] {
        assert!(names.contains(&tool), "{names:?}");
    }
    let result = json_out(&server, &["tools", "call", "list_collections"]);
    assert_eq!(result["isError"], false);

    let out = server.raw(&[
        "tools",
        "call",
        "apply_policy_now",
        r#"{"slice_name":"streaming","amount":10}"#,
    ]);
    assert_eq!(out.status.code(), Some(1));
    let result: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["isError"], true);
    assert_eq!(result["errorKind"], "approval_required");

    assert_eq!(server.raw(&["tools", "call", "list_collections", "{not json"]).status.code(), Some(1));
}

#[test]
fn collections_serve_bounded_recent_records() {
    let server = Server::start().unwrap();
    server.cli(&["clock", "advance", "30s"]).unwrap();
    let listed = server.cli(&["collections", "list"]).unwrap();
    assert!(listed.lines().any(|l| l.starts_with("upf.memory_utilization_pct")), "{listed}");
    let records = json_out(&server, &["collections", "records", "upf.memory_utilization_pct", "--slice", "streaming", "--limit", "3"]);
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 3);
    let ts: Vec<u64> = records.iter().map(|r| r["timestamp_ms"].as_u64().unwrap()).collect();
    assert!(ts.windows(2).all(|w| w[0] > w[1]), "{ts:?}");
    assert!(records.iter().all(|r| r["dims"]["slice"] == "streaming"));
}

#[test]
fn queue_subscriptions_deliver_gap_free_batches() {
    let server = Server::start().unwrap();
    let api = ApiClient::new(&server.api);
    let created = api
        .post(
            "/subscriptions",
            &json!({ "filter": { "metrics": ["memory_utilization_pct"] }, "sink": { "type": "queue" }, "batch_period_ms": 2000 }),
        )
        .unwrap();
    let sub = created["sub_id"].as_str().unwrap().to_owned();
    server.cli(&["clock", "advance", "20s"]).unwrap();
    let notes = api.get(&format!("/subscriptions/{sub}/notifications")).unwrap();
    let notes = notes.as_array().unwrap();
    assert!(notes.len() >= 5, "{notes:?}");
    let seqs: Vec<u64> = notes.iter().map(|n| n["seq"].as_u64().unwrap()).collect();
    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1), "{seqs:?}");
    assert!(notes
        .iter()
        .flat_map(|n| n["records"].as_array().unwrap())
        .all(|r| r["metric"] == "memory_utilization_pct"));
    assert!(api.get(&format!("/subscriptions/{sub}/notifications")).unwrap().as_array().unwrap().is_empty());

    let status = |r: Result<Value, ApiError>| match r {
        Err(ApiError::Status { status, .. }) => status,
        other => panic!("expected an HTTP error, got {other:?}"),
    };
    assert_eq!(status(api.delete("/subscriptions/sub-0001")), 409);
    assert_eq!(status(api.post("/subscriptions", &json!({ "sink": { "type": "store" } }))), 400);
    assert!(status(api.post("/subscriptions", &json!({ "sink": { "type": "queue" }, "bogus": 1 }))) >= 400);
    assert_eq!(status(api.post("/clock/advance", &json!({ "duration_ms": -5 }))), 400);

    let removed = api.delete(&format!("/subscriptions/{sub}")).unwrap();
    assert_eq!(removed["sub_id"], sub.as_str());
    assert_eq!(status(api.delete(&format!("/subscriptions/{sub}"))), 404);
}
