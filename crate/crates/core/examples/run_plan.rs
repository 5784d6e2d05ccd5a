//! Execute a plan file and print per-cell progress, as `disposition run`
//! does.
//!
//!     cargo run --release --example run_plan -- assets/plans/demo.json /tmp/runs.jsonl

use std::path::PathBuf;

use disposition::harness::execute_plan_file;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let plan =
        PathBuf::from(args.next().unwrap_or_else(|| {
            concat!(env!("CARGO_MANIFEST_DIR"), "/assets/plans/demo.json").into()
        }));
    let store = match args.next() {
        Some(p) => PathBuf::from(p),
        None => std::env::temp_dir().join("disposition-run-plan.jsonl"),
    };
    let summary = execute_plan_file(&plan, &store, 4)?;
    for c in &summary.cells {
        println!(
            "{:<32} {}/{} valid ({} resumed)",
            c.cell.to_string(),
            c.valid(),
            c.planned,
            c.resumed
        );
    }
    println!(
        "{} elicitations this pass, store at {}",
        summary.elicitations,
        store.display()
    );
    Ok(())
}
