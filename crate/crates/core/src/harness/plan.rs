use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::providers::{DispositionParams, ProviderConfig};
use crate::seed::derive_seed;

use super::HarnessError;

pub const DEFAULT_REPLICATIONS: u32 = 160;
pub const DEFAULT_BUDGET: usize = 20;

fn default_replications() -> u32 {
    DEFAULT_REPLICATIONS
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

/// A replication grid: every model crossed with every instruction type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Pool file. `None` selects the bundled placeholder pool. Relative
    /// paths resolve against the plan file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PathBuf>,
    /// Instruction registry file; `None` uses the bundled registry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<PathBuf>,
    pub models: Vec<ProviderConfig>,
    pub instruction_types: Vec<String>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl ExperimentPlan {
    /// An offline plan with one synthetic model per concentration, named
    /// `alpha-<value>`. Each model's preference seed derives from
    /// `base_seed` and its name.
    pub fn synthetic(
        concentrations: &[f64],
        instruction_types: &[&str],
        replications: u32,
        budget: usize,
        base_seed: u64,
    ) -> Self {
        let models = concentrations
            .iter()
            .map(|&alpha| {
                let name = synthetic_model_name(alpha);
                let seed =
                    derive_seed(&[b"disposition", &base_seed.to_le_bytes(), name.as_bytes()]);
                ProviderConfig::synthetic(
                    name,
                    DispositionParams {
                        concentration: alpha,
                        seed,
                        weights: None,
                        latency_ms: 0,
                    },
                )
            })
            .collect();
        Self {
            pool: None,
            registry: None,
            models,
            instruction_types: instruction_types.iter().map(|s| s.to_string()).collect(),
            replications,
            budget,
            base_seed,
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Plan(format!("cannot read {}: {e}", path.display())))?;
        let mut plan: ExperimentPlan = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Plan(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut plan.pool, &mut plan.registry].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }

    /// Structural checks. `pool_size` bounds the budget.
    pub fn validate(&self, pool_size: usize) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Plan(m));
        if self.models.is_empty() {
            return bad("plan lists no models".into());
        }
        if self.instruction_types.is_empty() {
            return bad("plan lists no instruction types".into());
        }
        if self.replications < 2 {
            return bad(format!(
                "replications must be at least 2 for pairwise consistency, got {}",
                self.replications
            ));
        }
        if self.budget == 0 || self.budget > pool_size {
            return bad(format!("budget {} must be in 1..={pool_size}", self.budget));
        }
        let mut seen = HashSet::new();
        for m in &self.models {
            if !seen.insert(m.model.as_str()) {
                return bad(format!("model {} listed twice", m.model));
            }
            m.validate()
                .map_err(|e| HarnessError::Plan(e.to_string()))?;
        }
        let mut seen = HashSet::new();
        for i in &self.instruction_types {
            if !seen.insert(i.as_str()) {
                return bad(format!("instruction type {i} listed twice"));
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.models.len() * self.instruction_types.len()
    }
}

/// Model id used by [`ExperimentPlan::synthetic`] for concentration `alpha`.
pub fn synthetic_model_name(alpha: f64) -> String {
    format!("alpha-{alpha}")
}
