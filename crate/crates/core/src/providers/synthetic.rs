//! Offline disposition simulator.
//!
//! Each simulated model owns a preference vector over pool ids, drawn once
//! per `(model id, seed)` from a symmetric Dirichlet with the configured
//! concentration (or given explicitly). A run picks `budget` distinct ids by
//! sequential weighted draws with removal. Run randomness is keyed by the
//! permutation seed, which the harness derives from the replication index,
//! so results do not depend on scheduling.

use std::thread;
use std::time::Duration;

use rand_distr::{Distribution, Gamma};

use crate::pool::{ConstraintId, ConstraintPool};
use crate::seed;

use super::{DispositionParams, ElicitRequest, Provider, ProviderError, SelectionResponse};

#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    model: String,
    disposition: DispositionParams,
    weights: Vec<f64>,
}

impl SyntheticProvider {
    pub fn new(
        model: impl Into<String>,
        disposition: DispositionParams,
        pool: &ConstraintPool,
    ) -> Result<Self, ProviderError> {
        let model = model.into();
        let weights = match &disposition.weights {
            Some(w) => {
                if w.len() != pool.len() {
                    return Err(ProviderError::Config(format!(
                        "{model}: weight vector has {} entries, pool has {}",
                        w.len(),
                        pool.len()
                    )));
                }
                w.clone()
            }
            None => dirichlet_weights(&model, &disposition, pool.len())?,
        };
        Ok(Self {
            model,
            disposition,
            weights,
        })
    }

    /// Preference weights indexed by `id - 1`, summing to 1 for Dirichlet
    /// draws.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Draws `budget` distinct ids for a run keyed by `run_seed`.
    pub fn sample(&self, run_seed: u64, budget: usize) -> Result<Vec<ConstraintId>, ProviderError> {
        let support = self.weights.iter().filter(|w| **w > 0.0).count();
        if budget > self.weights.len() {
            return Err(ProviderError::Config(format!(
                "budget {budget} exceeds pool size {}",
                self.weights.len()
            )));
        }
        if self.disposition.weights.is_some() && support < budget {
            return Err(ProviderError::Config(format!(
                "{}: weight vector has {support} non-zero entries, budget is {budget}",
                self.model
            )));
        }
        let mut rng = seed::stream(seed::derive_seed(&[
            b"synthetic-run",
            self.model.as_bytes(),
            &self.disposition.seed.to_le_bytes(),
            &run_seed.to_le_bytes(),
        ]));
        let mut remaining: Vec<(ConstraintId, f64)> = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (i as ConstraintId + 1, w))
            .collect();
        let mut picked = Vec::with_capacity(budget);
        for _ in 0..budget {
            let total: f64 = remaining.iter().map(|(_, w)| w).sum();
            let slot = if total > 0.0 {
                let target = seed::unit_f64(&mut rng) * total;
                let mut acc = 0.0;
                let mut slot = None;
                for (i, &(_, w)) in remaining.iter().enumerate() {
                    if w <= 0.0 {
                        continue;
                    }
                    acc += w;
                    slot = Some(i);
                    if target < acc {
                        break;
                    }
                }
                slot.expect("positive total has a positive weight")
            } else {
                // Only reachable when Dirichlet draws underflow to zero.
                seed::uniform_below(&mut rng, remaining.len() as u64) as usize
            };
            picked.push(remaining.remove(slot).0);
        }
        Ok(picked)
    }
}

fn dirichlet_weights(
    model: &str,
    disposition: &DispositionParams,
    n: usize,
) -> Result<Vec<f64>, ProviderError> {
    let gamma = Gamma::new(disposition.concentration, 1.0)
        .map_err(|e| ProviderError::Config(format!("{model}: invalid concentration: {e}")))?;
    let mut rng = seed::stream(seed::derive_seed(&[
        b"synthetic-weights",
        model.as_bytes(),
        &disposition.seed.to_le_bytes(),
    ]));
    let mut w: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rng)).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        w.iter_mut().for_each(|x| *x /= total);
    } else {
        w.fill(1.0 / n as f64);
    }
    Ok(w)
}

impl Provider for SyntheticProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn is_live(&self) -> bool {
        false
    }

    fn elicit(&self, req: &ElicitRequest<'_>) -> Result<SelectionResponse, ProviderError> {
        if self.disposition.latency_ms > 0 {
            thread::sleep(Duration::from_millis(self.disposition.latency_ms));
        }
        let selected = self.sample(req.permutation.seed, req.budget)?;
        let justifications = selected
            .iter()
            .map(|id| format!("simulated preference for constraint {id}"))
            .collect();
        let response = SelectionResponse {
            selected,
            justifications,
            compatibility: format!(
                "simulated run (concentration {})",
                self.disposition.concentration
            ),
            raw_payload: None,
        };
        response.validate(req.pool, req.budget)?;
        Ok(response)
    }
}
