use serde::{Deserialize, Serialize};

use super::ProviderError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verbosity {
    Low,
    Medium,
    High,
}

impl ReasoningEffort {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningEffort::Low => "low",
            ReasoningEffort::Medium => "medium",
            ReasoningEffort::High => "high",
        }
    }
}

impl Verbosity {
    pub fn as_str(self) -> &'static str {
        match self {
            Verbosity::Low => "low",
            Verbosity::Medium => "medium",
            Verbosity::High => "high",
        }
    }
}

/// Request/response dialect of a live endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    /// `POST …/chat/completions` with `messages`, bearer auth.
    #[default]
    OpenaiChat,
    /// `POST …/v1/messages` with `system` + `messages`, `x-api-key` auth.
    AnthropicMessages,
}

fn default_max_in_flight() -> usize {
    4
}
fn default_max_attempts() -> u32 {
    5
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_timeout_secs() -> u64 {
    600
}
fn default_max_tokens() -> u32 {
    16_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveSettings {
    pub endpoint: String,
    /// Identifier sent to the endpoint when it differs from the plan's
    /// model id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_model: Option<String>,
    #[serde(default)]
    pub api_style: ApiStyle,
    /// Name of the environment variable holding the API key.
    pub credential_env: String,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Attempts per request on transport errors (429, 5xx, network).
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// First backoff delay; doubles after each failed attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

/// Parameters of the synthetic disposition simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispositionParams {
    /// Symmetric Dirichlet concentration. Small values make a rigid model,
    /// large values an exploratory one.
    pub concentration: f64,
    pub seed: u64,
    /// Fixed preference weights over pool ids (index `id - 1`). Overrides
    /// the Dirichlet draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Simulated per-call latency.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub latency_ms: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Live(LiveSettings),
    Synthetic { disposition: DispositionParams },
}

fn default_unit() -> f64 {
    1.0
}

/// One model as it appears in an experiment plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub model: String,
    #[serde(default = "default_unit")]
    pub temperature: f64,
    #[serde(default = "default_unit")]
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_effort: Option<ReasoningEffort>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbosity: Option<Verbosity>,
    #[serde(flatten)]
    pub backend: Backend,
}

impl ProviderConfig {
    pub fn synthetic(model: impl Into<String>, disposition: DispositionParams) -> Self {
        Self {
            model: model.into(),
            temperature: 1.0,
            top_p: 1.0,
            reasoning_effort: None,
            verbosity: None,
            backend: Backend::Synthetic { disposition },
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self.backend, Backend::Live(_))
    }

    /// Checks ranges. Does not look at the environment; see
    /// [`ProviderConfig::credential`].
    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |msg: String| Err(ProviderError::Config(msg));
        if self.model.trim().is_empty() {
            return bad("model identifier is empty".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!(
                "{}: temperature {} outside [0, 2]",
                self.model, self.temperature
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!(
                "{}: top_p {} outside (0, 1]",
                self.model, self.top_p
            ));
        }
        match &self.backend {
            Backend::Synthetic { disposition } => {
                if !(disposition.concentration.is_finite() && disposition.concentration > 0.0) {
                    return bad(format!(
                        "{}: concentration must be positive, got {}",
                        self.model, disposition.concentration
                    ));
                }
                if let Some(w) = &disposition.weights {
                    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                        return bad(format!(
                            "{}: weights must be finite and non-negative",
                            self.model
                        ));
                    }
                    if w.iter().all(|x| *x == 0.0) {
                        return bad(format!("{}: weights are all zero", self.model));
                    }
                }
            }
            Backend::Live(live) => {
                if live.endpoint.trim().is_empty() {
                    return bad(format!("{}: endpoint is empty", self.model));
                }
                if live.credential_env.trim().is_empty() {
                    return bad(format!("{}: credential_env is empty", self.model));
                }
                if live.max_in_flight == 0 || live.max_attempts == 0 {
                    return bad(format!(
                        "{}: max_in_flight and max_attempts must be positive",
                        self.model
                    ));
                }
            }
        }
        Ok(())
    }

    /// Resolves the API key of a live provider from its environment variable.
    pub fn credential(&self) -> Result<Option<String>, ProviderError> {
        match &self.backend {
            Backend::Live(live) => match std::env::var(&live.credential_env) {
                Ok(v) if !v.is_empty() => Ok(Some(v)),
                _ => Err(ProviderError::MissingCredential(
                    live.credential_env.clone(),
                )),
            },
            Backend::Synthetic { .. } => Ok(None),
        }
    }
}
