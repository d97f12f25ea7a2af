use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Aggregate bit rates are carried as integer kilobits per second.
pub type Kbps = u64;

/// Single network slice selection assistance information.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snssai {
    pub sst: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<String>,
}

impl Snssai {
    pub fn new(sst: u8, sd: Option<&str>) -> Self {
        Self {
            sst,
            sd: sd.map(str::to_owned),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if let Some(sd) = &self.sd {
            if sd.len() != 6 || !sd.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(SimError::InvalidSlice(format!(
                    "sd '{sd}' must be exactly 6 hex digits"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceConfig {
    pub snssai: Snssai,
    pub name: String,
    pub ambr_dl: Kbps,
    pub ambr_ul: Kbps,
    pub capacity_dl: Kbps,
    pub capacity_ul: Kbps,
}

impl SliceConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.snssai.validate()?;
        if self.name.trim().is_empty() {
            return Err(SimError::InvalidSlice("slice name must not be empty".into()));
        }
        if self.ambr_dl == 0 || self.ambr_ul == 0 {
            return Err(SimError::InvalidSlice(format!(
                "slice '{}': ambr must be positive",
                self.name
            )));
        }
        if self.ambr_dl > self.capacity_dl {
            return Err(SimError::InvalidSlice(format!(
                "slice '{}': ambr_dl {} exceeds capacity_dl {}",
                self.name, self.ambr_dl, self.capacity_dl
            )));
        }
        if self.ambr_ul > self.capacity_ul {
            return Err(SimError::InvalidSlice(format!(
                "slice '{}': ambr_ul {} exceeds capacity_ul {}",
                self.name, self.ambr_ul, self.capacity_ul
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UeState {
    Registered,
    Deregistered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeContext {
    pub supi: String,
    pub slice_name: String,
    pub state: UeState,
}

fn supi_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"^imsi-[0-9]{15}$").expect("static regex"))
}

pub fn is_valid_supi(supi: &str) -> bool {
    supi_pattern().is_match(supi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Active,
    Releasing,
    Released,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Active => "active",
            SessionState::Releasing => "releasing",
            SessionState::Released => "released",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PduSession {
    pub session_id: u64,
    pub supi: String,
    pub slice_name: String,
    pub five_qi: u8,
    pub session_ambr_dl: Kbps,
    pub session_ambr_ul: Kbps,
    pub state: SessionState,
}

/// Network function that produced a telemetry record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NfKind {
    #[serde(rename = "UPF")]
    Upf,
    #[serde(rename = "SMF")]
    Smf,
    #[serde(rename = "PCF")]
    Pcf,
}

impl NfKind {
    pub const ALL: [NfKind; 3] = [NfKind::Upf, NfKind::Smf, NfKind::Pcf];

    pub fn as_str(self) -> &'static str {
        match self {
            NfKind::Upf => "UPF",
            NfKind::Smf => "SMF",
            NfKind::Pcf => "PCF",
        }
    }
}

impl fmt::Display for NfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optional dimensions attached to a telemetry record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<u64>,
}

impl Dims {
    pub fn slice(name: &str) -> Self {
        Dims {
            slice: Some(name.to_owned()),
            ..Dims::default()
        }
    }
}

pub mod metrics {
    pub const THROUGHPUT_DL: &str = "throughput_dl_kbps";
    pub const MEMORY_UTILIZATION: &str = "memory_utilization_pct";
    pub const ACTIVE_SESSIONS: &str = "active_sessions";
    pub const POLICY_DECISIONS: &str = "policy_decisions";
    pub const SLICE_AMBR_DL: &str = "slice_ambr_dl_kbps";
    pub const SLICE_AMBR_UL: &str = "slice_ambr_ul_kbps";
    pub const SESSION_AMBR_DL: &str = "session_ambr_dl_kbps";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub source_nf: NfKind,
    pub metric: String,
    pub value: f64,
    pub unit: String,
    pub timestamp_ms: u64,
    #[serde(default)]
    pub dims: Dims,
}

impl TelemetryRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.metric.is_empty() {
            return Err("metric name is empty".into());
        }
        if !self.value.is_finite() {
            return Err(format!("{}: value {} is not finite", self.metric, self.value));
        }
        if self.metric == metrics::MEMORY_UTILIZATION && !(0.0..=100.0).contains(&self.value) {
            return Err(format!(
                "{}: value {} outside [0, 100]",
                self.metric, self.value
            ));
        }
        Ok(())
    }

    /// Collection this record belongs to, e.g. `upf.memory_utilization_pct`.
    pub fn collection_name(&self) -> String {
        format!(
            "{}.{}",
            self.source_nf.as_str().to_ascii_lowercase(),
            self.metric.to_ascii_lowercase()
        )
    }
}
