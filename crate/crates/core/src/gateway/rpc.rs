//! JSON-RPC 2.0 framing for `tools/list` and `tools/call`.
//!
//! Transport problems use JSON-RPC error objects; tool failures travel inside
//! a successful response as `{content, isError, errorKind}`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{ErrorKind, Gateway, GatewayError, ToolCall, ToolDescriptor, ToolGateway, ToolResult};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
}

fn error_response(id: Value, code: i64, message: impl Into<String>) -> Value {
    json!({
        "jsonrpc": "2.0",
        "id": id,
        "error": RpcError { code, message: message.into() },
    })
}

fn result_response(id: Value, result: Value) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "result": result })
}

/// Wire shape of a tool result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WireToolResult {
    #[serde(rename = "call_id")]
    pub call_id: String,
    pub content: Value,
    pub is_error: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<ErrorKind>,
}

impl From<ToolResult> for WireToolResult {
    fn from(r: ToolResult) -> Self {
        Self {
            call_id: r.call_id,
            content: r.content,
            is_error: r.is_error,
            error_kind: r.error_kind,
        }
    }
}

impl From<WireToolResult> for ToolResult {
    fn from(w: WireToolResult) -> Self {
        Self {
            call_id: w.call_id,
            is_error: w.is_error,
            content: w.content,
            error_kind: w.error_kind,
        }
    }
}

/// Handles one raw request body.
pub fn handle_bytes(gateway: &Gateway, body: &[u8]) -> Value {
    match serde_json::from_slice::<Value>(body) {
        Ok(request) => handle(gateway, &request),
        Err(e) => error_response(Value::Null, PARSE_ERROR, format!("parse error: {e}")),
    }
}

pub fn handle(gateway: &Gateway, request: &Value) -> Value {
    let Some(obj) = request.as_object() else {
        return error_response(Value::Null, INVALID_REQUEST, "request must be an object");
    };
    let id = obj.get("id").cloned().unwrap_or(Value::Null);
    if obj.get("jsonrpc").and_then(Value::as_str) != Some("2.0") {
        return error_response(id, INVALID_REQUEST, "jsonrpc must be \"2.0\"");
    }
    let Some(method) = obj.get("method").and_then(Value::as_str) else {
        return error_response(id, INVALID_REQUEST, "method must be a string");
    };
    let params = obj.get("params").cloned().unwrap_or_else(|| json!({}));
    match method {
        "tools/list" => result_response(id, json!({ "tools": gateway.list() })),
        "tools/call" => {
            let Some(params) = params.as_object() else {
                return error_response(id, INVALID_PARAMS, "params must be an object");
            };
            let Some(name) = params.get("name").and_then(Value::as_str) else {
                return error_response(id, INVALID_PARAMS, "params.name must be a string");
            };
            let arguments = match params.get("arguments") {
                None | Some(Value::Null) => Map::new(),
                Some(Value::Object(m)) => m.clone(),
                Some(_) => {
                    return error_response(id, INVALID_PARAMS, "params.arguments must be an object")
                }
            };
            let call_id = params
                .get("call_id")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_owned();
            let result = gateway.dispatch(&ToolCall {
                call_id,
                name: name.to_owned(),
                arguments,
            });
            result_response(id, json!(WireToolResult::from(result)))
        }
        other => error_response(id, METHOD_NOT_FOUND, format!("method '{other}' not found")),
    }
}

/// Remote gateway reached over HTTP at `{base_url}/rpc`.
pub struct RpcClient {
    url: String,
    agent: ureq::Agent,
    next_id: AtomicU64,
}

impl RpcClient {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: format!("{}/rpc", base_url.trim_end_matches('/')),
            agent,
            next_id: AtomicU64::new(1),
        }
    }

    fn request(&self, method: &str, params: Value) -> Result<Value, GatewayError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = json!({ "jsonrpc": "2.0", "id": id, "method": method, "params": params });
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| GatewayError::Unreachable(e.to_string()))?;
        let reply: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| GatewayError::Protocol(e.to_string()))?;
        if let Some(err) = reply.get("error") {
            return Err(GatewayError::Protocol(err.to_string()));
        }
        reply
            .get("result")
            .cloned()
            .ok_or_else(|| GatewayError::Protocol("response without result".into()))
    }
}

impl ToolGateway for RpcClient {
    fn list_tools(&self) -> Result<Vec<ToolDescriptor>, GatewayError> {
        let result = self.request("tools/list", json!({}))?;
        serde_json::from_value(result.get("tools").cloned().unwrap_or(Value::Null))
            .map_err(|e| GatewayError::Protocol(e.to_string()))
    }

    fn call_tool(&self, call: &ToolCall) -> Result<ToolResult, GatewayError> {
        let result = self.request(
            "tools/call",
            json!({ "name": call.name, "arguments": call.arguments, "call_id": call.call_id }),
        )?;
        serde_json::from_value::<WireToolResult>(result)
            .map(Into::into)
            .map_err(|e| GatewayError::Protocol(e.to_string()))
    }
}
