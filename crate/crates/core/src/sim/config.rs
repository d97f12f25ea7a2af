use serde::{Deserialize, Serialize};

use super::types::SliceConfig;
use crate::clock::DEFAULT_TICK_MS;

/// How simulated UEs are spread over the configured slices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UeAssignment {
    /// UE `i` joins slice `i mod slices.len()`.
    #[default]
    RoundRobin,
    /// UE `i` joins the slice named at position `i`.
    Explicit(Vec<String>),
}

/// Parameters of the per-slice memory utilisation AR(1) process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryModel {
    pub mean: f64,
    pub phi: f64,
    pub sigma: f64,
}

impl Default for MemoryModel {
    fn default() -> Self {
        Self {
            mean: 55.0,
            phi: 0.9,
            sigma: 2.0,
        }
    }
}

fn default_tick_ms() -> u64 {
    DEFAULT_TICK_MS
}

fn default_five_qi() -> u8 {
    9
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    #[serde(default = "default_tick_ms")]
    pub tick_ms: u64,
    /// ISO-8601 timestamp with explicit offset, e.g. `2025-09-22T16:20:00+00:00`.
    pub epoch: String,
    pub slices: Vec<SliceConfig>,
    #[serde(default)]
    pub num_ues: usize,
    #[serde(default)]
    pub ue_assignment: UeAssignment,
    #[serde(default = "default_five_qi")]
    pub five_qi: u8,
    #[serde(default)]
    pub memory: MemoryModel,
    /// When false, ticks only move the clock; no telemetry is produced.
    #[serde(default = "default_true")]
    pub emit_telemetry: bool,
}

impl SimConfig {
    /// SUPI given to the `index`-th simulated UE (zero-based).
    pub fn supi_for(index: usize) -> String {
        format!("imsi-00101{:010}", index + 1)
    }
}
