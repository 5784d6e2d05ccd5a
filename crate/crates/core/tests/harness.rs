mod common;

use std::collections::BTreeSet;
use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use disposition::harness::{
    execute_plan_file, run_seed, CellKey, Experiment, ExperimentPlan, RunStatus, RunStore,
    VALIDATION_RETRIES,
};
use disposition::pool::{write_pool, ConstraintPool};
use disposition::providers::{
    Backend, ElicitRequest, InstructionRegistry, Provider, ProviderError, SelectionError,
    SelectionResponse,
};

fn small_plan(seed: u64) -> ExperimentPlan {
    ExperimentPlan::synthetic(&[0.1, 10.0], &["Basic", "Quality-focused"], 20, 20, seed)
}

#[test]
fn grid_fills_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("runs.jsonl")).unwrap();
    let exp = Experiment::prepare(small_plan(3)).unwrap();
    let summary = exp.execute(&store, 4).unwrap();
    assert!(summary.is_complete());
    assert_eq!(summary.elicitations, 80);
    assert_eq!(store.record_lines(), 80);
    for cell in exp.cells() {
        let recs = store.load_cell(&cell).unwrap();
        assert_eq!(recs.len(), 20);
        for (r, rec) in recs.iter().enumerate() {
            assert_eq!(rec.replication, r as u32);
            assert_eq!(rec.selected.len(), 20);
            assert_eq!(rec.selected.iter().collect::<BTreeSet<_>>().len(), 20);
            assert_eq!(rec.permutation_seed, run_seed(3, &cell, r as u32, 0));
            assert!(
                rec.started_unix_ms.is_none(),
                "offline runs carry no wall clock"
            );
        }
    }
}

#[test]
fn resume_makes_no_new_calls() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.jsonl");
    let exp = Experiment::prepare(small_plan(4)).unwrap();
    exp.execute(&RunStore::open(&path).unwrap(), 2).unwrap();
    let before = fs::read(&path).unwrap();
    let again = exp.execute(&RunStore::open(&path).unwrap(), 2).unwrap();
    assert_eq!(again.elicitations, 0);
    assert!(again
        .cells
        .iter()
        .all(|c| c.resumed == 20 && c.new_valid == 0));
    assert_eq!(fs::read(&path).unwrap(), before);
}

#[test]
fn resume_after_partial_store_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let (full, partial) = (
        dir.path().join("full.jsonl"),
        dir.path().join("partial.jsonl"),
    );
    let exp = Experiment::prepare(small_plan(5)).unwrap();
    exp.execute(&RunStore::open(&full).unwrap(), 3).unwrap();

    // keep the header and the first 33 records, then cut the 34th in half
    let text = fs::read_to_string(&full).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut cut = lines[..34].join("\n");
    cut.push('\n');
    cut.push_str(&lines[34][..lines[34].len() / 2]);
    fs::write(&partial, cut).unwrap();

    let store = RunStore::open(&partial).unwrap();
    let summary = exp.execute(&store, 3).unwrap();
    assert_eq!(summary.elicitations, 80 - 33);
    assert_eq!(fs::read(&partial).unwrap(), fs::read(&full).unwrap());
}

#[test]
fn parallelism_does_not_change_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::prepare(small_plan(6)).unwrap();
    let logs: Vec<Vec<u8>> = [1, 8]
        .iter()
        .map(|&p| {
            let path = dir.path().join(format!("p{p}.jsonl"));
            exp.execute(&RunStore::open(&path).unwrap(), p).unwrap();
            fs::read(&path).unwrap()
        })
        .collect();
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn invalidated_runs_are_repeated() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("runs.jsonl")).unwrap();
    let exp = Experiment::prepare(small_plan(7)).unwrap();
    exp.execute(&store, 2).unwrap();
    let cell = exp.cell(0, 1);
    let original = store.get(&cell, 4).unwrap();
    store.invalidate(&cell, 4, "annotator flagged").unwrap();
    let summary = exp.execute(&store, 2).unwrap();
    assert_eq!(summary.elicitations, 1);
    let redo = store.get(&cell, 4).unwrap();
    assert_eq!(redo, original);
}

/// Fails the first `bad` calls with `error`, then answers with the head
/// of the permutation.
struct Flaky {
    bad: usize,
    calls: AtomicUsize,
    seeds: Mutex<Vec<u64>>,
    error: fn() -> ProviderError,
}

impl Provider for Flaky {
    fn model_id(&self) -> &str {
        "flaky"
    }

    fn is_live(&self) -> bool {
        false
    }

    fn elicit(&self, req: &ElicitRequest<'_>) -> Result<SelectionResponse, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        self.seeds.lock().unwrap().push(req.permutation.seed);
        if n < self.bad {
            return Err((self.error)());
        }
        Ok(SelectionResponse {
            selected: req.permutation.order[..req.budget].to_vec(),
            justifications: vec![String::new(); req.budget],
            compatibility: String::new(),
            raw_payload: None,
        })
    }
}

fn flaky_experiment(bad: usize, error: fn() -> ProviderError) -> (Experiment, &'static Flaky) {
    let mut plan = ExperimentPlan::synthetic(&[1.0], &["Basic"], 2, 5, 11);
    plan.models[0].model = "flaky".into();
    let flaky: &'static Flaky = Box::leak(Box::new(Flaky {
        bad,
        calls: AtomicUsize::new(0),
        seeds: Mutex::new(Vec::new()),
        error,
    }));
    struct Shim(&'static Flaky);
    impl Provider for Shim {
        fn model_id(&self) -> &str {
            self.0.model_id()
        }
        fn is_live(&self) -> bool {
            false
        }
        fn elicit(&self, req: &ElicitRequest<'_>) -> Result<SelectionResponse, ProviderError> {
            self.0.elicit(req)
        }
    }
    let exp = Experiment::with_providers(
        plan,
        ConstraintPool::placeholder(),
        &InstructionRegistry::builtin(),
        vec![Box::new(Shim(flaky))],
    )
    .unwrap();
    (exp, flaky)
}

fn duplicate() -> ProviderError {
    ProviderError::Validation(SelectionError::Duplicate(3))
}

#[test]
fn validation_failures_retry_with_fresh_permutations() {
    let (exp, flaky) = flaky_experiment(2, duplicate);
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("runs.jsonl")).unwrap();
    let summary = exp.execute(&store, 1).unwrap();
    assert!(summary.is_complete());
    assert_eq!(summary.elicitations, 4);
    let cell = CellKey::new("flaky", "Basic");
    let rec = store.get(&cell, 0).unwrap();
    assert_eq!(rec.attempts, 3);
    assert_eq!(rec.permutation_seed, run_seed(11, &cell, 0, 2));
    let seeds = flaky.seeds.lock().unwrap();
    assert_eq!(seeds.iter().collect::<BTreeSet<_>>().len(), 4);
}

#[test]
fn exhausted_retries_leave_an_invalid_record() {
    let (exp, _) = flaky_experiment(VALIDATION_RETRIES as usize + 1, duplicate);
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("runs.jsonl")).unwrap();
    let summary = exp.execute(&store, 1).unwrap();
    assert!(!summary.is_complete());
    let cell = CellKey::new("flaky", "Basic");
    assert_eq!(summary.incomplete_cells(), vec![&cell]);
    let rec = store.get(&cell, 0).unwrap();
    assert_eq!(rec.status, RunStatus::Invalid);
    assert_eq!(rec.attempts, VALIDATION_RETRIES + 1);
    assert!(rec.error.unwrap().contains("duplicate"));
    assert!(store.get(&cell, 1).unwrap().is_valid());

    // the next execution only repeats the failed replication
    let again = exp.execute(&store, 1).unwrap();
    assert_eq!(again.elicitations, 1);
    assert!(again.is_complete());
}

#[test]
fn malformed_replies_are_not_retried() {
    let (exp, flaky) = flaky_experiment(1, || ProviderError::Malformed("no block".into()));
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("runs.jsonl")).unwrap();
    let summary = exp.execute(&store, 1).unwrap();
    assert_eq!(summary.elicitations, 2);
    assert_eq!(flaky.calls.load(Ordering::SeqCst), 2);
    assert_eq!(summary.cells[0].new_invalid, 1);
}

#[test]
fn narrow_fixed_weights_fail_hard() {
    let mut plan = ExperimentPlan::synthetic(&[1.0], &["Basic"], 3, 20, 0);
    let Backend::Synthetic { disposition } = &mut plan.models[0].backend else {
        unreachable!()
    };
    let mut w = vec![0.0; 200];
    w[..10].fill(1.0);
    disposition.weights = Some(w);
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("runs.jsonl")).unwrap();
    let summary = Experiment::prepare(plan)
        .unwrap()
        .execute(&store, 2)
        .unwrap();
    assert_eq!(summary.elicitations, 3);
    assert_eq!(summary.cells[0].new_invalid, 3);
    assert!(!summary.is_complete());
}

#[test]
fn plans_validate_and_resolve_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let pool = ConstraintPool::placeholder_sized(40);
    write_pool(&pool, &dir.path().join("pool.json")).unwrap();
    let mut plan = ExperimentPlan::synthetic(&[2.0], &["Basic"], 3, 4, 9);
    plan.pool = Some("pool.json".into());
    let plan_path = dir.path().join("plan.json");
    fs::write(&plan_path, plan.to_json()).unwrap();
    let loaded = ExperimentPlan::load(&plan_path).unwrap();
    assert_eq!(
        loaded.pool.as_deref(),
        Some(dir.path().join("pool.json").as_path())
    );
    let summary = execute_plan_file(&plan_path, &dir.path().join("out/runs.jsonl"), 2).unwrap();
    assert!(summary.is_complete());
    let store = RunStore::open_read_only(dir.path().join("out/runs.jsonl")).unwrap();
    let ids: BTreeSet<u32> = store
        .load_cell(&CellKey::new(plan.models[0].model.clone(), "Basic"))
        .unwrap()
        .iter()
        .flat_map(|r| r.selected.clone())
        .collect();
    assert!(ids.iter().all(|id| (1..=40).contains(id)));

    let reject = |f: fn(&mut ExperimentPlan)| {
        let mut p = ExperimentPlan::synthetic(&[1.0], &["Basic"], 3, 20, 0);
        f(&mut p);
        Experiment::prepare(p).is_err()
    };
    assert!(reject(|p| p.replications = 1));
    assert!(reject(|p| p.budget = 0));
    assert!(reject(|p| p.budget = 201));
    assert!(reject(|p| p.instruction_types.push("Basic".into())));
    assert!(reject(|p| p.instruction_types = vec!["Nonexistent".into()]));
    assert!(reject(|p| p.models.push(p.models[0].clone())));
    assert!(reject(|p| p.models[0].temperature = 3.0));
    assert!(ExperimentPlan::load(&dir.path().join("missing.json")).is_err());
}

#[test]
fn same_seed_same_log_other_seed_differs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: u64, name: &str| {
        let path = dir.path().join(name);
        Experiment::prepare(small_plan(seed))
            .unwrap()
            .execute(&RunStore::open(&path).unwrap(), 4)
            .unwrap();
        fs::read(&path).unwrap()
    };
    assert_eq!(run(1, "a"), run(1, "b"));
    assert_ne!(run(1, "c"), run(2, "d"));
}

#[test]
fn elicit_requests_are_independent_of_order() {
    // a cell's records do not depend on which other cells share the plan
    let dir = tempfile::tempdir().unwrap();
    let both = ExperimentPlan::synthetic(&[0.1, 10.0], &["Basic"], 5, 20, 3);
    let one = ExperimentPlan::synthetic(&[10.0], &["Basic"], 5, 20, 3);
    let a = RunStore::open(dir.path().join("a")).unwrap();
    let b = RunStore::open(dir.path().join("b")).unwrap();
    Experiment::prepare(both).unwrap().execute(&a, 3).unwrap();
    Experiment::prepare(one).unwrap().execute(&b, 1).unwrap();
    let cell = CellKey::new(disposition::harness::synthetic_model_name(10.0), "Basic");
    assert_eq!(a.load_cell(&cell).unwrap(), b.load_cell(&cell).unwrap());
}
