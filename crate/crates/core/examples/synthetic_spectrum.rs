//! Sweep synthetic dispositions from rigid to exploratory and print the
//! consistency/diversity table.
//!
//!     cargo run --release --example synthetic_spectrum

use disposition::harness::{Experiment, ExperimentPlan, RunStore};
use disposition::metrics::{cell_metrics, MetricsReport};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = RunStore::open(dir.path().join("runs.jsonl"))?;
    let plan = ExperimentPlan::synthetic(&[0.05, 0.3, 1.0, 10.0, 100.0], &["Basic"], 30, 20, 11);
    let experiment = Experiment::prepare(plan)?;
    let summary = experiment.execute(&store, 4)?;
    println!("{} elicitations", summary.elicitations);

    let rows = experiment
        .cells()
        .iter()
        .map(|c| cell_metrics(&store.cell_records(c)?).map_err(Into::into))
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;
    print!("{}", MetricsReport::new(rows).to_tsv());
    Ok(())
}
