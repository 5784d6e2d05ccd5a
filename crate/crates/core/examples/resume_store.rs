//! Interrupt a grid, then resume it from the run log without repeating
//! finished replications.
//!
//!     cargo run --example resume_store

use disposition::harness::{Experiment, ExperimentPlan, RunStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("runs.jsonl");

    // A short first pass: only the first 8 replications per cell.
    let mut plan =
        ExperimentPlan::synthetic(&[0.5, 5.0], &["Basic", "Creativity-focused"], 20, 20, 3);
    plan.replications = 8;
    Experiment::prepare(plan.clone())?.execute(&RunStore::open(&path)?, 2)?;

    // Simulate a crash that left half a record at the end of the log.
    let mut bytes = std::fs::read(&path)?;
    bytes.extend_from_slice(br#"{"run_id":"truncated"#);
    std::fs::write(&path, bytes)?;

    plan.replications = 20;
    let store = RunStore::open(&path)?;
    let summary = Experiment::prepare(plan.clone())?.execute(&store, 2)?;
    for c in &summary.cells {
        println!(
            "{}: {} resumed, {} new, complete = {}",
            c.cell,
            c.resumed,
            c.new_valid,
            c.is_complete()
        );
    }

    // Running again is a no-op.
    let again = Experiment::prepare(plan)?.execute(&RunStore::open(&path)?, 2)?;
    println!("third pass made {} elicitations", again.elicitations);
    Ok(())
}
