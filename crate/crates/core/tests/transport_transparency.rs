//! The JSON-RPC framing adds nothing and loses nothing: the same call sequence
//! against two identical stacks, one direct and one through serialized
//! requests, yields identical results and identical network state.

mod common;

use netintent_core::gateway::rpc::{handle, handle_bytes, WireToolResult};
use netintent_core::gateway::{ToolCall, ToolResult};
use netintent_core::tools::Decision;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

fn random_call(rng: &mut ChaCha8Rng, last_token: &Option<String>) -> (String, Map<String, Value>) {
    let slice = ["streaming", "internet", "nowhere"][rng.random_range(0..3)];
    let op = ["list", "release", "modify_qos"][rng.random_range(0..3)];
    let token = last_token.clone().unwrap_or_else(|| "tok-9999".into());
    let (name, args) = match rng.random_range(0..12) {
        0 => ("list_collections", json!({})),
        1 => ("query_data", json!({ "collection": "upf.memory_utilization_pct", "slice": slice, "limit": rng.random_range(1..20) })),
        2 => ("get_slice_config", json!({ "slice_name": slice })),
        3 => ("feasibility_check", json!({ "slice_name": slice, "amount": rng.random_range(-50..150) })),
        4 => ("kpi_analyze", json!({ "collection": "upf.memory_utilization_pct", "slice": slice, "last_n": rng.random_range(1..40) })),
        5 => ("forecast", json!({ "collection": "upf.memory_utilization_pct", "slice": "internet",
                                  "history_n": 40, "window_w": rng.random_range(1..10), "horizon_h": 3 })),
        6 => ("request_confirmation", json!({ "action_summary": "change" })),
        7 => ("apply_policy_now", json!({ "slice_name": slice, "amount": rng.random_range(-30..60), "approval_token": token })),
        8 => ("schedule_policy", json!({ "slice_name": slice, "amount": 20, "window_start": "00:00",
                                         "window_end": "23:59", "days": ["daily"], "approval_token": token })),
        9 => ("session_tool", json!({ "op": op,
                                       "session_id": rng.random_range(1..12), "ambr_dl": 5000, "approval_token": token })),
        10 => ("list_schedules", json!({})),
        _ => ("query_data", json!({ "collection": 12 })),
    };
    (name.to_owned(), args.as_object().unwrap().clone())
}

#[test]
fn rpc_matches_direct_dispatch() {
    let direct = common::demo_stack();
    let remote = common::demo_stack();
    for s in [&direct, &remote] {
        s.engine.write(|e| e.advance(60));
    }
    let listed = handle(&remote.gateway, &json!({ "jsonrpc": "2.0", "id": 0, "method": "tools/list" }));
    assert_eq!(listed["result"]["tools"], json!(direct.gateway.list()));

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut last_token = None;
    for i in 0..2_000 {
        let (name, arguments) = random_call(&mut rng, &last_token);
        let call_id = format!("c-{i}");
        let want = direct.gateway.dispatch(&ToolCall { call_id: call_id.clone(), name: name.clone(), arguments: arguments.clone() });
        let body = json!({ "jsonrpc": "2.0", "id": i, "method": "tools/call",
                           "params": { "name": name, "arguments": arguments, "call_id": call_id } });
        let response = handle_bytes(&remote.gateway, body.to_string().as_bytes());
        assert_eq!(response["id"], json!(i));
        let wire: WireToolResult = serde_json::from_value(response["result"].clone()).unwrap();
        let got: ToolResult = wire.into();
        assert_eq!(got, want, "call {i} {name}");

        if name == "request_confirmation" && !want.is_error {
            let token = want.content["token"].as_str().unwrap().to_owned();
            let decision = if rng.random_bool(0.7) { Decision::Approve } else { Decision::Deny };
            for s in [&direct, &remote] {
                s.engine.write(|e| e.resolve_approval(&token, decision)).unwrap();
            }
            last_token = Some(token);
        }
        if rng.random_bool(0.05) {
            for s in [&direct, &remote] {
                s.engine.write(|e| e.advance(3));
            }
        }
        let a = direct.engine.read().sim.snapshot();
        let b = remote.engine.read().sim.snapshot();
        assert_eq!(a, b, "state diverged after call {i}");
    }
}
