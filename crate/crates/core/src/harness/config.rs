//! Run configuration and its plain-text `key = value` file format.
//!
//! ```text
//! # channel
//! latency = 0.5
//! drop_probability = 0.0
//! seed = 42
//! level.housemate = L2
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::LevelMapping;
use crate::error::{ConcordError, Result};
use crate::model::RelationshipLevel;
use crate::protocol::{ApprovalPolicy, ChannelConfig};
use crate::relationship::Thresholds;
use crate::speaker_gate::GateConfig;

/// Agent-side settings shared by both participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub thresholds: Thresholds,
    pub approvals: ApprovalPolicy,
    /// Simulated seconds the owner takes to answer an approval prompt.
    pub approval_delay: f64,
    /// Simulated seconds between consecutive turns.
    pub turn_seconds: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            thresholds: Thresholds::default(),
            approvals: ApprovalPolicy::Silent,
            approval_delay: 1.0,
            turn_seconds: 10.0,
        }
    }
}

impl EngineConfig {
    pub fn check(&self) -> Result<()> {
        self.thresholds.check()?;
        if !(self.approval_delay >= 0.0 && self.approval_delay.is_finite()) {
            return Err(ConcordError::InvalidConfig("approval_delay must be >= 0".into()));
        }
        if !(self.turn_seconds > 0.0 && self.turn_seconds.is_finite()) {
            return Err(ConcordError::InvalidConfig("turn_seconds must be > 0".into()));
        }
        Ok(())
    }
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub engine: EngineConfig,
    pub channel: ChannelConfig,
    pub gate: GateConfig,
    pub levels: LevelMapping,
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// a repeated key keeps the last value.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default();
        if line.trim().is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ConcordError::Parse {
                line: i + 1,
                column: line.len() - line.trim_start().len() + 1,
                message: "expected `key = value`".into(),
            });
        };
        let key = line[..eq].trim();
        if key.is_empty() {
            return Err(ConcordError::Parse { line: i + 1, column: eq + 1, message: "empty key".into() });
        }
        out.insert(key.to_string(), (i + 1, line[eq + 1..].trim().to_string()));
    }
    Ok(out)
}

fn value<T: FromStr>(key: &str, line: usize, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| ConcordError::Parse {
        line,
        column: 1,
        message: format!("invalid value `{raw}` for `{key}`"),
    })
}

fn level(raw: &str) -> Option<RelationshipLevel> {
    match raw.to_ascii_uppercase().as_str() {
        "L1" => Some(RelationshipLevel::L1),
        "L2" => Some(RelationshipLevel::L2),
        "L3" => Some(RelationshipLevel::L3),
        _ => None,
    }
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (key, (line, raw)) in parse_key_values(text)? {
            let raw = raw.as_str();
            match key.as_str() {
                "latency" => s.channel.latency = value(&key, line, raw)?,
                "drop_probability" | "drop" => s.channel.drop_probability = value(&key, line, raw)?,
                "timeout" => s.channel.timeout = value(&key, line, raw)?,
                "seed" | "rng_seed" => s.channel.rng_seed = value(&key, line, raw)?,
                "approval_delay" => s.engine.approval_delay = value(&key, line, raw)?,
                "turn_seconds" => s.engine.turn_seconds = value(&key, line, raw)?,
                "approvals" => s.engine.approvals = value(&key, line, raw)?,
                "distance_lock" => s.engine.thresholds.distance_lock = value(&key, line, raw)?,
                "intimacy_types" => s.engine.thresholds.intimacy_types = value(&key, line, raw)?,
                "collective_floor" => s.engine.thresholds.collective_floor = value(&key, line, raw)?,
                "implicit_ratio_floor" => s.engine.thresholds.implicit_ratio_floor = value(&key, line, raw)?,
                "window_len" => s.gate.window_len = value(&key, line, raw)?,
                "overlap" => s.gate.overlap = value(&key, line, raw)?,
                "target_fpr" => s.gate.target_fpr = value(&key, line, raw)?,
                "threshold" => s.gate.threshold = Some(value(&key, line, raw)?),
                k if k.starts_with("level.") => {
                    let lv = level(raw).ok_or_else(|| ConcordError::Parse {
                        line,
                        column: 1,
                        message: format!("`{raw}` is not L1, L2 or L3"),
                    })?;
                    s.levels.insert(&k["level.".len()..], lv);
                }
                other => {
                    return Err(ConcordError::Parse { line, column: 1, message: format!("unknown key `{other}`") })
                }
            }
        }
        s.engine.check()?;
        s.channel.check()?;
        s.gate.check()?;
        Ok(s)
    }
}
