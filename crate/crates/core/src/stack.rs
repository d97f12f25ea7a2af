//! Whole-stack configuration and assembly: simulator, store, exposure,
//! tools, gateway and intent service wired around one shared engine.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::backend::{HttpBackendConfig, HttpFactory, ScriptFile, ScriptedFactory};
use crate::agent::{AgentConfig, BackendFactory, IntentService};
use crate::exposure::EventExposure;
use crate::gateway::{Gateway, GatewayError};
use crate::sim::{CoreSim, SimConfig};
use crate::store::AnalyticsStore;
use crate::tools::approval::DEFAULT_TOKEN_TTL_MS;
use crate::tools::catalog::build_registry;
use crate::tools::{Approvals, Engine, EngineHandle};

pub const DEFAULT_BIND: &str = "127.0.0.1:7878";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Scripted { path: PathBuf },
    Http(HttpBackendConfig),
}

fn default_bind() -> String {
    DEFAULT_BIND.to_owned()
}

fn default_max_iterations() -> usize {
    crate::agent::runner::DEFAULT_MAX_ITERATIONS
}

fn default_ttl() -> u64 {
    DEFAULT_TOKEN_TTL_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    pub sim: SimConfig,
    #[serde(default = "default_bind")]
    pub bind: String,
    pub backend: BackendConfig,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_ttl")]
    pub approval_ttl_ms: u64,
    /// JSON-lines journal of every stored telemetry record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store_path: Option<PathBuf>,
    /// Directory receiving one JSON-lines transcript per intent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config at byte offset {offset} (line {line}, column {column}): {message}")]
    Syntax {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let before: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (before + column.saturating_sub(1)).min(text.len())
}

impl StackConfig {
    /// Parses config text; relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            offset: byte_offset(text, e.line(), e.column()),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut cfg: StackConfig =
            serde_json::from_value(value).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        if let BackendConfig::Scripted { path } = &mut cfg.backend {
            resolve(path);
        }
        if let Some(p) = cfg.store_path.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.transcript_dir.as_mut() {
            resolve(p);
        }
        if cfg.max_iterations == 0 {
            return Err(ConfigError::Invalid("max_iterations must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }
}

/// Assembled components, shared by the HTTP server and in-process clients.
pub struct Stack {
    pub engine: Arc<EngineHandle>,
    pub gateway: Arc<Gateway>,
    pub intents: Arc<IntentService>,
}

impl Stack {
    pub fn build(cfg: &StackConfig) -> Result<Self, ConfigError> {
        Self::build_with(cfg, |s| s)
    }

    /// Builds the configured backend, letting the caller adjust the intent service.
    pub fn build_with(
        cfg: &StackConfig,
        customise: impl FnOnce(IntentService) -> IntentService,
    ) -> Result<Self, ConfigError> {
        let backends: Arc<dyn BackendFactory> = match &cfg.backend {
            BackendConfig::Scripted { path } => Arc::new(ScriptedFactory {
                script: ScriptFile::load(path).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            }),
            BackendConfig::Http(http) => Arc::new(HttpFactory {
                config: http.clone(),
            }),
        };
        Self::with_backends(cfg, backends, customise)
    }

    /// Like [`Stack::build`] with an explicit backend factory and a hook to
    /// customise the intent service before it is shared.
    pub fn with_backends(
        cfg: &StackConfig,
        backends: Arc<dyn BackendFactory>,
        customise: impl FnOnce(IntentService) -> IntentService,
    ) -> Result<Self, ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        let sim = CoreSim::from_config(&cfg.sim).map_err(|e| invalid(&e))?;
        let store = match &cfg.store_path {
            Some(p) => AnalyticsStore::open(p).map_err(|e| invalid(&e))?,
            None => AnalyticsStore::new(),
        };
        let engine = Engine::new(
            sim,
            store,
            EventExposure::default(),
            Approvals::new(cfg.approval_ttl_ms),
        );
        let engine = Arc::new(EngineHandle::new(engine));
        let registry = build_registry(engine.clone()).map_err(|e: GatewayError| invalid(&e))?;
        let gateway = Arc::new(Gateway::new(registry));
        let agent = AgentConfig {
            max_iterations: cfg.max_iterations,
            ..AgentConfig::default()
        };
        let mut service = IntentService::new(gateway.clone(), backends, engine.clone(), agent);
        if let Some(dir) = &cfg.transcript_dir {
            service = service.with_transcript_dir(dir.clone());
        }
        let intents = Arc::new(customise(service));
        Ok(Self {
            engine,
            gateway,
            intents,
        })
    }
}
