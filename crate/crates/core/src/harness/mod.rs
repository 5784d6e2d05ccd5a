//! Replication grids and their execution.
//!
//! [`Experiment::execute`] runs every `(model, instruction type,
//! replication)` that the store does not yet hold as a valid record. Each
//! run derives its permutation seed from
//! `(base seed, model id, instruction type, replication index)` through
//! [`seed::derive_seed`], so two executions of one plan show models the
//! same constraint orderings, and a resumed execution continues exactly
//! where the previous one stopped.
//!
//! Runs are executed by a pool of worker threads; a single appender writes
//! results to the store in plan order regardless of completion order.

mod plan;
mod record;
mod store;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::Serialize;
use thiserror::Error;
use uuid::Uuid;

use crate::pool::{load_pool, permute, ConstraintPool, PoolError};
use crate::providers::{
    build_provider, check_request, ElicitRequest, Instruction, InstructionRegistry, Provider,
    ProviderError,
};
use crate::seed;

pub use plan::{synthetic_model_name, ExperimentPlan, DEFAULT_BUDGET, DEFAULT_REPLICATIONS};
pub use record::{CellKey, ProviderMeta, RunRecord, RunStatus};
pub use store::{RunStore, StoreError, SCHEMA_NAME, SCHEMA_VERSION};

/// Retries with a fresh permutation after a count/duplicate/range violation.
pub const VALIDATION_RETRIES: u32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Permutation seed of one attempt. Attempt 0 hashes exactly
/// `(base seed, model, instruction, replication)`; retries append the
/// attempt number.
pub fn run_seed(base_seed: u64, cell: &CellKey, replication: u32, attempt: u32) -> u64 {
    let base = base_seed.to_le_bytes();
    let rep = replication.to_le_bytes();
    let att = attempt.to_le_bytes();
    let mut parts: Vec<&[u8]> = vec![
        &base,
        cell.model.as_bytes(),
        cell.instruction_type.as_bytes(),
        &rep,
    ];
    if attempt > 0 {
        parts.push(&att);
    }
    seed::derive_seed(&parts)
}

fn run_id(base_seed: u64, cell: &CellKey, replication: u32) -> Uuid {
    let s = run_seed(base_seed, cell, replication, 0).to_le_bytes();
    let hi = seed::derive_seed(&[b"run-id-hi", &s]).to_le_bytes();
    let lo = seed::derive_seed(&[b"run-id-lo", &s]).to_le_bytes();
    let mut bytes = [0u8; 16];
    bytes[..8].copy_from_slice(&hi);
    bytes[8..].copy_from_slice(&lo);
    uuid::Builder::from_random_bytes(bytes).into_uuid()
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Progress of one cell after an execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellSummary {
    pub cell: CellKey,
    pub planned: u32,
    /// Valid records found before this execution.
    pub resumed: u32,
    pub new_valid: u32,
    pub new_invalid: u32,
}

impl CellSummary {
    pub fn valid(&self) -> u32 {
        self.resumed + self.new_valid
    }

    pub fn is_complete(&self) -> bool {
        self.valid() >= self.planned
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionSummary {
    pub cells: Vec<CellSummary>,
    /// Provider calls made, retries included.
    pub elicitations: usize,
}

impl ExecutionSummary {
    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(CellSummary::is_complete)
    }

    pub fn incomplete_cells(&self) -> Vec<&CellKey> {
        self.cells
            .iter()
            .filter(|c| !c.is_complete())
            .map(|c| &c.cell)
            .collect()
    }
}

struct Job {
    seq: usize,
    model: usize,
    instruction: usize,
    replication: u32,
}

/// A plan with its pool, instructions and providers resolved.
pub struct Experiment {
    pub plan: ExperimentPlan,
    pub pool: ConstraintPool,
    instructions: Vec<Instruction>,
    providers: Vec<Box<dyn Provider>>,
}

impl Experiment {
    /// Loads the pool and registry named by the plan and builds providers.
    /// Missing credentials fail here.
    pub fn prepare(plan: ExperimentPlan) -> Result<Self, HarnessError> {
        let pool = match &plan.pool {
            Some(path) => load_pool(path)?,
            None => ConstraintPool::placeholder(),
        };
        let registry = match &plan.registry {
            Some(path) => InstructionRegistry::load(path)?,
            None => InstructionRegistry::builtin(),
        };
        plan.validate(pool.len())?;
        let providers = plan
            .models
            .iter()
            .map(|cfg| build_provider(cfg, &pool))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_providers(plan, pool, &registry, providers)
    }

    /// Uses caller-supplied providers, one per plan model in plan order.
    pub fn with_providers(
        plan: ExperimentPlan,
        pool: ConstraintPool,
        registry: &InstructionRegistry,
        providers: Vec<Box<dyn Provider>>,
    ) -> Result<Self, HarnessError> {
        plan.validate(pool.len())?;
        if providers.len() != plan.models.len() {
            return Err(HarnessError::Plan(format!(
                "{} providers for {} models",
                providers.len(),
                plan.models.len()
            )));
        }
        let instructions = plan
            .instruction_types
            .iter()
            .map(|name| registry.require(name).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            plan,
            pool,
            instructions,
            providers,
        })
    }

    pub fn cell(&self, model: usize, instruction: usize) -> CellKey {
        CellKey::new(
            self.plan.models[model].model.clone(),
            self.plan.instruction_types[instruction].clone(),
        )
    }

    pub fn cells(&self) -> Vec<CellKey> {
        (0..self.plan.models.len())
            .flat_map(|m| (0..self.instructions.len()).map(move |i| (m, i)))
            .map(|(m, i)| self.cell(m, i))
            .collect()
    }

    /// Runs one replication to a record, applying the retry policy.
    fn run_one(&self, job: &Job) -> (RunRecord, usize) {
        let cell = self.cell(job.model, job.instruction);
        let provider = &self.providers[job.model];
        let config = &self.plan.models[job.model];
        let live = provider.is_live();
        let started = live.then(now_ms);
        let mut calls = 0;
        let mut attempt = 0;
        let outcome = loop {
            let perm_seed = run_seed(self.plan.base_seed, &cell, job.replication, attempt);
            let permutation = permute(&self.pool, perm_seed);
            let request = ElicitRequest {
                pool: &self.pool,
                permutation: &permutation,
                instruction: &self.instructions[job.instruction],
                budget: self.plan.budget,
            };
            calls += 1;
            let result = check_request(&request).and_then(|_| provider.elicit(&request));
            match result {
                Err(ProviderError::Validation(e)) if attempt < VALIDATION_RETRIES => {
                    warn!(
                        "{cell} #{}: {e}; retrying with a fresh permutation",
                        job.replication
                    );
                    attempt += 1;
                }
                other => break (perm_seed, other),
            }
        };
        let (permutation_seed, result) = outcome;
        let mut record = RunRecord {
            run_id: run_id(self.plan.base_seed, &cell, job.replication),
            cell,
            replication: job.replication,
            permutation_seed,
            attempts: attempt + 1,
            status: RunStatus::Valid,
            selected: Vec::new(),
            justifications: Vec::new(),
            compatibility: String::new(),
            raw_payload: None,
            error: None,
            provider: ProviderMeta::from(config),
            started_unix_ms: started,
            finished_unix_ms: live.then(now_ms),
        };
        match result {
            Ok(resp) => {
                record.selected = resp.selected;
                record.justifications = resp.justifications;
                record.compatibility = resp.compatibility;
                record.raw_payload = resp.raw_payload;
            }
            Err(e) => {
                record.status = RunStatus::Invalid;
                record.error = Some(e.to_string());
            }
        }
        (record, calls)
    }

    /// Executes every missing replication with `parallelism` workers.
    pub fn execute(
        &self,
        store: &RunStore,
        parallelism: usize,
    ) -> Result<ExecutionSummary, HarnessError> {
        let parallelism = parallelism.max(1);
        let mut summaries: BTreeMap<(usize, usize), CellSummary> = BTreeMap::new();
        let mut jobs = Vec::new();
        for m in 0..self.plan.models.len() {
            for i in 0..self.instructions.len() {
                let cell = self.cell(m, i);
                let mut resumed = 0;
                for r in 0..self.plan.replications {
                    match store.get(&cell, r) {
                        Some(rec) if rec.is_valid() => resumed += 1,
                        _ => jobs.push(Job {
                            seq: jobs.len(),
                            model: m,
                            instruction: i,
                            replication: r,
                        }),
                    }
                }
                summaries.insert(
                    (m, i),
                    CellSummary {
                        cell,
                        planned: self.plan.replications,
                        resumed,
                        new_valid: 0,
                        new_invalid: 0,
                    },
                );
            }
        }
        info!(
            "{} cells, {} replications pending, {parallelism} workers",
            summaries.len(),
            jobs.len()
        );

        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let mut elicitations = 0;
        let mut failure: Option<StoreError> = None;
        thread::scope(|scope| {
            let (tx, rx) = mpsc::channel::<(usize, RunRecord, usize)>();
            for _ in 0..parallelism.min(jobs.len()) {
                let tx = tx.clone();
                let (jobs, next, abort) = (&jobs, &next, &abort);
                scope.spawn(move || loop {
                    if abort.load(Ordering::Relaxed) {
                        break;
                    }
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(k) else { break };
                    let (record, calls) = self.run_one(job);
                    if tx.send((job.seq, record, calls)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);

            // Commit in plan order.
            let mut pending: BTreeMap<usize, (RunRecord, usize)> = BTreeMap::new();
            let mut commit = 0;
            for (seq, record, calls) in rx {
                pending.insert(seq, (record, calls));
                while let Some((record, calls)) = pending.remove(&commit) {
                    if failure.is_none() {
                        let job = &jobs[commit];
                        if let Err(e) = store.append(&record) {
                            abort.store(true, Ordering::Relaxed);
                            failure = Some(e);
                        } else {
                            let s = summaries
                                .get_mut(&(job.model, job.instruction))
                                .expect("cell");
                            if record.is_valid() {
                                s.new_valid += 1;
                            } else {
                                warn!(
                                    "{} #{} invalid: {}",
                                    s.cell,
                                    record.replication,
                                    record.error.as_deref().unwrap_or("unknown")
                                );
                                s.new_invalid += 1;
                            }
                            if s.valid() + s.new_invalid == s.planned {
                                info!("{}: {}/{} valid", s.cell, s.valid(), s.planned);
                            }
                        }
                    }
                    elicitations += calls;
                    commit += 1;
                }
            }
        });
        if let Some(e) = failure {
            return Err(e.into());
        }
        Ok(ExecutionSummary {
            cells: summaries.into_values().collect(),
            elicitations,
        })
    }
}

/// Loads a plan file, prepares it and executes it against the store at
/// `store_path`.
pub fn execute_plan_file(
    plan_path: &Path,
    store_path: &Path,
    parallelism: usize,
) -> Result<ExecutionSummary, HarnessError> {
    let experiment = Experiment::prepare(ExperimentPlan::load(plan_path)?)?;
    let store = RunStore::open(store_path)?;
    experiment.execute(&store, parallelism)
}

/// Valid records of `cell` in replication order.
pub fn load_cell(store: &RunStore, cell: &CellKey) -> Result<Vec<RunRecord>, StoreError> {
    store.load_cell(cell)
}
