//! HTTP chat-completion backends.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde_json::{json, Value};

use super::selection::{build_prompt, parse_selection, Prompt};
use super::{
    ApiStyle, Backend, ElicitRequest, LiveSettings, Provider, ProviderConfig, ProviderError,
    SelectionResponse,
};

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct InFlight {
    free: Mutex<usize>,
    released: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            free: Mutex::new(limit),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.released.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore poisoned") += 1;
        self.0.released.notify_one();
    }
}

pub struct LiveProvider {
    config: ProviderConfig,
    settings: LiveSettings,
    api_key: String,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl std::fmt::Debug for LiveProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveProvider")
            .field("model", &self.config.model)
            .field("endpoint", &self.settings.endpoint)
            .finish_non_exhaustive()
    }
}

impl LiveProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let Backend::Live(settings) = config.backend.clone() else {
            return Err(ProviderError::Config(format!(
                "{} is not a live provider",
                config.model
            )));
        };
        let api_key = config.credential()?.unwrap_or_default();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            in_flight: InFlight::new(settings.max_in_flight),
            config,
            settings,
            api_key,
            agent,
        })
    }

    /// JSON request body for `prompt`, including only the decoding knobs the
    /// config sets.
    pub fn request_body(&self, prompt: &Prompt) -> Value {
        let cfg = &self.config;
        let model = self.settings.api_model.as_deref().unwrap_or(&cfg.model);
        match self.settings.api_style {
            ApiStyle::OpenaiChat => {
                let mut body = json!({
                    "model": model,
                    "messages": [
                        {"role": "system", "content": prompt.system},
                        {"role": "user", "content": prompt.user},
                    ],
                    "temperature": cfg.temperature,
                    "top_p": cfg.top_p,
                });
                if let Some(effort) = cfg.reasoning_effort {
                    body["reasoning_effort"] = json!(effort.as_str());
                }
                if let Some(verbosity) = cfg.verbosity {
                    body["verbosity"] = json!(verbosity.as_str());
                }
                body
            }
            ApiStyle::AnthropicMessages => json!({
                "model": model,
                "system": prompt.system,
                "messages": [{"role": "user", "content": prompt.user}],
                "max_tokens": self.settings.max_tokens,
                "temperature": cfg.temperature,
                "top_p": cfg.top_p,
            }),
        }
    }

    fn completion_text(&self, body: &Value) -> Option<String> {
        match self.settings.api_style {
            ApiStyle::OpenaiChat => body["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_owned),
            ApiStyle::AnthropicMessages => {
                let parts: Vec<&str> = body["content"]
                    .as_array()?
                    .iter()
                    .filter(|b| b["type"] == "text")
                    .filter_map(|b| b["text"].as_str())
                    .collect();
                (!parts.is_empty()).then(|| parts.concat())
            }
        }
    }

    fn post_once(&self, body: &Value) -> Result<String, ProviderError> {
        let request = self.agent.post(&self.settings.endpoint);
        let request = match self.settings.api_style {
            ApiStyle::OpenaiChat => {
                request.header("Authorization", &format!("Bearer {}", self.api_key))
            }
            ApiStyle::AnthropicMessages => request
                .header("x-api-key", &self.api_key)
                .header("anthropic-version", "2023-06-01"),
        };
        let mut response = request
            .send_json(body)
            .map_err(|e| ProviderError::Transport {
                message: e.to_string(),
                retryable: true,
            })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport {
                message: e.to_string(),
                retryable: true,
            })?;
        if status == 429 || status >= 500 {
            return Err(ProviderError::Transport {
                message: format!("HTTP {status}: {}", truncate(&text)),
                retryable: true,
            });
        }
        if !(200..300).contains(&status) {
            return Err(ProviderError::Transport {
                message: format!("HTTP {status}: {}", truncate(&text)),
                retryable: false,
            });
        }
        Ok(text)
    }

    /// Sends one request, retrying transport errors with exponential backoff.
    fn complete(&self, prompt: &Prompt) -> Result<String, ProviderError> {
        let body = self.request_body(prompt);
        let _slot = self.in_flight.acquire();
        let mut delay = Duration::from_millis(self.settings.backoff_ms);
        let mut attempt = 1;
        loop {
            match self.post_once(&body) {
                Ok(text) => {
                    let json: Value = serde_json::from_str(&text).map_err(|e| {
                        ProviderError::Malformed(format!("response is not JSON: {e}"))
                    })?;
                    return self.completion_text(&json).ok_or_else(|| {
                        ProviderError::Malformed("response carries no completion text".into())
                    });
                }
                Err(ProviderError::Transport {
                    message,
                    retryable: true,
                }) if attempt < self.settings.max_attempts => {
                    warn!(
                        "{}: attempt {attempt} failed ({message}); retrying in {delay:?}",
                        self.config.model
                    );
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

fn truncate(text: &str) -> &str {
    let end = text
        .char_indices()
        .nth(200)
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    &text[..end]
}

impl Provider for LiveProvider {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn is_live(&self) -> bool {
        true
    }

    fn elicit(&self, req: &ElicitRequest<'_>) -> Result<SelectionResponse, ProviderError> {
        // Every call is a fresh single-turn conversation.
        let prompt = build_prompt(req.pool, req.permutation, req.instruction, req.budget);
        debug!(
            "{}: eliciting with permutation seed {}",
            self.config.model, req.permutation.seed
        );
        let text = self.complete(&prompt)?;
        parse_selection(&text, req.pool, req.budget).map_err(|e| {
            if e.is_validation() {
                ProviderError::Validation(e)
            } else {
                ProviderError::Malformed(format!("{e}; reply: {}", truncate(&text)))
            }
        })
    }
}
