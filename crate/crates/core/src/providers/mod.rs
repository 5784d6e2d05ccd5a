//! Elicitation backends.
//!
//! A [`Provider`] answers one isolated selection request. Two backends ship:
//! [`LiveProvider`] talks to HTTP chat-completion endpoints and
//! [`SyntheticProvider`] simulates a model offline from a Dirichlet
//! preference vector.

mod config;
mod live;
pub mod selection;
mod synthetic;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pool::{ConstraintPool, Permutation};

pub use config::{
    ApiStyle, Backend, DispositionParams, LiveSettings, ProviderConfig, ReasoningEffort, Verbosity,
};
pub use live::LiveProvider;
pub use selection::{build_prompt, parse_selection, Prompt, SelectionError, SelectionResponse};
pub use synthetic::SyntheticProvider;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("transport failure: {message}")]
    Transport { message: String, retryable: bool },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("invalid selection: {0}")]
    Validation(#[from] SelectionError),
}

/// A system-prompt stance held fixed within a cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub name: String,
    pub text: String,
    /// False for stand-in texts that do not reproduce an original prompt.
    pub verbatim: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegistryEntry {
    text: String,
    #[serde(default)]
    verbatim: bool,
}

/// Instruction type name → system prompt.
#[derive(Debug, Clone, Default)]
pub struct InstructionRegistry {
    entries: BTreeMap<String, Instruction>,
}

const BUILTIN_REGISTRY: &str = include_str!("../../assets/instructions.json");

impl InstructionRegistry {
    pub fn from_json_str(json: &str) -> Result<Self, ProviderError> {
        let raw: BTreeMap<String, RegistryEntry> = serde_json::from_str(json)
            .map_err(|e| ProviderError::Config(format!("instruction registry: {e}")))?;
        let entries = raw
            .into_iter()
            .map(|(name, e)| {
                let instruction = Instruction {
                    name: name.clone(),
                    text: e.text,
                    verbatim: e.verbatim,
                };
                (name, instruction)
            })
            .collect();
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = fs::read_to_string(path).map_err(|e| {
            ProviderError::Config(format!("cannot read registry {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }

    /// Basic/Quality-focused/Creativity-focused stand-ins plus the four
    /// additional stances.
    pub fn builtin() -> Self {
        Self::from_json_str(BUILTIN_REGISTRY).expect("bundled registry parses")
    }

    pub fn get(&self, name: &str) -> Option<&Instruction> {
        self.entries.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&Instruction, ProviderError> {
        self.get(name)
            .ok_or_else(|| ProviderError::Config(format!("unknown instruction type {name:?}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Everything a backend sees for one run. No state carries between calls.
#[derive(Debug, Clone, Copy)]
pub struct ElicitRequest<'a> {
    pub pool: &'a ConstraintPool,
    pub permutation: &'a Permutation,
    pub instruction: &'a Instruction,
    pub budget: usize,
}

pub trait Provider: Send + Sync {
    fn model_id(&self) -> &str;

    fn is_live(&self) -> bool;

    fn elicit(&self, req: &ElicitRequest<'_>) -> Result<SelectionResponse, ProviderError>;
}

/// Builds the backend described by `config`. Live providers resolve their
/// credential here, so a missing key fails before any run starts.
pub fn build_provider(
    config: &ProviderConfig,
    pool: &ConstraintPool,
) -> Result<Box<dyn Provider>, ProviderError> {
    config.validate()?;
    match &config.backend {
        Backend::Synthetic { disposition } => Ok(Box::new(SyntheticProvider::new(
            config.model.clone(),
            disposition.clone(),
            pool,
        )?)),
        Backend::Live(_) => Ok(Box::new(LiveProvider::new(config.clone())?)),
    }
}

/// Checks request preconditions shared by all backends.
pub fn check_request(req: &ElicitRequest<'_>) -> Result<(), ProviderError> {
    if req.budget == 0 || req.budget > req.pool.len() {
        return Err(ProviderError::Config(format!(
            "budget {} must be in 1..={}",
            req.budget,
            req.pool.len()
        )));
    }
    if !req.permutation.matches(req.pool) {
        return Err(ProviderError::Config(
            "permutation does not match pool".into(),
        ));
    }
    Ok(())
}
