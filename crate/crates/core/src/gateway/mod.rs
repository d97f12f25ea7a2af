//! MCP-style tool registry and invocation boundary.
//!
//! Every tool the agent can reach is registered here with a descriptor and a
//! closed parameter schema. Arguments are validated before dispatch, and every
//! failure comes back as a structured [`ToolResult`], never as a transport error.

pub mod rpc;
pub mod schema;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

pub use schema::{EntityKind, ParamSpec, ParamType, ParamsSchema, SchemaViolation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolGroup {
    DataRetrieval,
    Intent,
    Safety,
}

/// Whether invoking a tool can change network state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    Never,
    Always,
    /// Mutating only when `arg` takes one of `values`.
    WhenArg { arg: String, values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    pub params_schema: ParamsSchema,
    pub group: ToolGroup,
    pub mutates: Mutation,
}

impl ToolDescriptor {
    pub fn new(name: &str, group: ToolGroup, description: &str, params: ParamsSchema) -> Self {
        Self {
            name: name.to_owned(),
            description: description.to_owned(),
            params_schema: params,
            group,
            mutates: Mutation::Never,
        }
    }

    pub fn mutating(mut self, mutates: Mutation) -> Self {
        self.mutates = mutates;
        self
    }

    pub fn is_mutating_call(&self, arguments: &Map<String, Value>) -> bool {
        match &self.mutates {
            Mutation::Never => false,
            Mutation::Always => true,
            Mutation::WhenArg { arg, values } => arguments
                .get(arg)
                .and_then(Value::as_str)
                .is_some_and(|v| values.iter().any(|x| x == v)),
        }
    }

    fn check(&self) -> Result<(), String> {
        let snake = !self.name.is_empty()
            && self.name.starts_with(|c: char| c.is_ascii_lowercase())
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if !snake {
            return Err(format!("tool name '{}' is not snake_case", self.name));
        }
        self.params_schema
            .check()
            .map_err(|e| format!("tool '{}': {e}", self.name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub call_id: String,
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    UnknownTool,
    SchemaViolation,
    PreconditionFailed,
    ApprovalRequired,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    pub is_error: bool,
    pub content: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<ErrorKind>,
}

impl ToolResult {
    pub fn ok(call_id: &str, content: Value) -> Self {
        Self {
            call_id: call_id.to_owned(),
            is_error: false,
            content,
            error_kind: None,
        }
    }

    pub fn error(call_id: &str, kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            call_id: call_id.to_owned(),
            is_error: true,
            content: json!({ "error": message.into() }),
            error_kind: Some(kind),
        }
    }

    pub fn error_message(&self) -> Option<&str> {
        self.content.get("error").and_then(Value::as_str)
    }
}

/// Failure reported by tool code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ToolFailure {
    pub kind: ErrorKind,
    pub message: String,
}

impl ToolFailure {
    pub fn precondition(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::PreconditionFailed,
            message: message.into(),
        }
    }

    pub fn approval(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::ApprovalRequired,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Internal,
            message: message.into(),
        }
    }
}

pub type ToolHandler = Arc<dyn Fn(&Map<String, Value>) -> Result<Value, ToolFailure> + Send + Sync>;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("gateway unreachable: {0}")]
    Unreachable(String),
    #[error("gateway protocol error: {0}")]
    Protocol(String),
    #[error("invalid tool registration: {0}")]
    Registration(String),
}

/// Client view of a tool gateway, in-process or remote.
pub trait ToolGateway: Send + Sync {
    fn list_tools(&self) -> Result<Vec<ToolDescriptor>, GatewayError>;
    fn call_tool(&self, call: &ToolCall) -> Result<ToolResult, GatewayError>;
}

#[derive(Default)]
pub struct Registry {
    tools: Vec<(ToolDescriptor, ToolHandler)>,
    index: HashMap<String, usize>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, descriptor: ToolDescriptor, handler: F) -> Result<(), GatewayError>
    where
        F: Fn(&Map<String, Value>) -> Result<Value, ToolFailure> + Send + Sync + 'static,
    {
        descriptor.check().map_err(GatewayError::Registration)?;
        if self.index.contains_key(&descriptor.name) {
            return Err(GatewayError::Registration(format!(
                "duplicate tool '{}'",
                descriptor.name
            )));
        }
        self.index.insert(descriptor.name.clone(), self.tools.len());
        self.tools.push((descriptor, Arc::new(handler)));
        Ok(())
    }

    pub fn descriptor(&self, name: &str) -> Option<&ToolDescriptor> {
        self.index.get(name).map(|&i| &self.tools[i].0)
    }

    pub fn descriptors(&self) -> Vec<ToolDescriptor> {
        self.tools.iter().map(|(d, _)| d.clone()).collect()
    }

    /// Schema check without dispatch.
    pub fn validate(&self, name: &str, arguments: &Map<String, Value>) -> Result<(), ToolResult> {
        let Some(descriptor) = self.descriptor(name) else {
            return Err(ToolResult::error(
                "",
                ErrorKind::UnknownTool,
                format!("unknown tool '{name}'"),
            ));
        };
        descriptor.params_schema.validate_map(arguments).map_err(|v| {
            ToolResult::error("", ErrorKind::SchemaViolation, format!("{name}: {v}"))
        })
    }
}

/// In-process gateway around a registry.
pub struct Gateway {
    registry: Registry,
    next_call: AtomicU64,
}

impl Gateway {
    pub fn new(registry: Registry) -> Self {
        Self {
            registry,
            next_call: AtomicU64::new(1),
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn list(&self) -> Vec<ToolDescriptor> {
        self.registry.descriptors()
    }

    /// Validates then dispatches; tool panics surface as `internal`.
    pub fn dispatch(&self, call: &ToolCall) -> ToolResult {
        let call_id = if call.call_id.is_empty() {
            format!("call-{}", self.next_call.fetch_add(1, Ordering::Relaxed))
        } else {
            call.call_id.clone()
        };
        if let Err(mut rejected) = self.registry.validate(&call.name, &call.arguments) {
            rejected.call_id = call_id;
            return rejected;
        }
        let handler = self.registry.index[&call.name];
        let handler = &self.registry.tools[handler].1;
        match catch_unwind(AssertUnwindSafe(|| handler(&call.arguments))) {
            Ok(Ok(content)) => ToolResult::ok(&call_id, content),
            Ok(Err(failure)) => ToolResult::error(&call_id, failure.kind, failure.message),
            Err(_) => ToolResult::error(&call_id, ErrorKind::Internal, "tool panicked"),
        }
    }
}

impl ToolGateway for Gateway {
    fn list_tools(&self) -> Result<Vec<ToolDescriptor>, GatewayError> {
        Ok(self.list())
    }

    fn call_tool(&self, call: &ToolCall) -> Result<ToolResult, GatewayError> {
        Ok(self.dispatch(call))
    }
}

impl<T: ToolGateway + ?Sized> ToolGateway for Arc<T> {
    fn list_tools(&self) -> Result<Vec<ToolDescriptor>, GatewayError> {
        (**self).list_tools()
    }

    fn call_tool(&self, call: &ToolCall) -> Result<ToolResult, GatewayError> {
        (**self).call_tool(call)
    }
}

/// Reads an optional argument, mapping type errors to `precondition_failed`.
pub fn arg<T: serde::de::DeserializeOwned>(
    args: &Map<String, Value>,
    name: &str,
) -> Result<Option<T>, ToolFailure> {
    match args.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| ToolFailure::precondition(format!("argument '{name}': {e}"))),
    }
}

pub fn required_arg<T: serde::de::DeserializeOwned>(
    args: &Map<String, Value>,
    name: &str,
) -> Result<T, ToolFailure> {
    arg(args, name)?.ok_or_else(|| ToolFailure::precondition(format!("argument '{name}' missing")))
}
