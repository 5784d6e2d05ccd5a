use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::pool::ConstraintId;
use crate::providers::{ProviderConfig, ReasoningEffort, Verbosity};

/// One (model × instruction type) condition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub model: String,
    pub instruction_type: String,
}

impl CellKey {
    pub fn new(model: impl Into<String>, instruction_type: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            instruction_type: instruction_type.into(),
        }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.model, self.instruction_type)
    }
}

impl FromStr for CellKey {
    type Err = String;

    /// Parses `model:instruction`. The split happens at the last colon.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.rsplit_once(':') {
            Some((m, i)) if !m.trim().is_empty() && !i.trim().is_empty() => {
                Ok(CellKey::new(m.trim(), i.trim()))
            }
            _ => Err(format!("expected <model>:<instruction>, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Valid,
    Invalid,
}

/// Decoding parameters echoed into every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderMeta {
    pub model: String,
    pub kind: String,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_effort: Option<ReasoningEffort>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbosity: Option<Verbosity>,
}

impl From<&ProviderConfig> for ProviderMeta {
    fn from(cfg: &ProviderConfig) -> Self {
        Self {
            model: cfg.model.clone(),
            kind: if cfg.is_live() { "live" } else { "synthetic" }.into(),
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            reasoning_effort: cfg.reasoning_effort,
            verbosity: cfg.verbosity,
        }
    }
}

/// One replication as persisted in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: Uuid,
    #[serde(flatten)]
    pub cell: CellKey,
    pub replication: u32,
    /// Seed of the permutation the final attempt used.
    pub permutation_seed: u64,
    pub attempts: u32,
    pub status: RunStatus,
    pub selected: Vec<ConstraintId>,
    #[serde(default)]
    pub justifications: Vec<String>,
    #[serde(default)]
    pub compatibility: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_payload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub provider: ProviderMeta,
    /// Wall-clock bounds in Unix milliseconds; recorded for live runs only
    /// so synthetic logs stay byte-reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_unix_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix_ms: Option<u64>,
}

impl RunRecord {
    pub fn is_valid(&self) -> bool {
        self.status == RunStatus::Valid
    }

    /// A copy that marks this replication invalid. Appending it supersedes
    /// the original.
    pub fn invalidated(&self, reason: impl Into<String>) -> Self {
        let mut r = self.clone();
        r.status = RunStatus::Invalid;
        r.error = Some(reason.into());
        r
    }
}
