//! Store to shared-space landscape: SVG figure plus plot-data JSON.
//!
//!     cargo run --release --example landscape_render -- /tmp/landscape

use std::path::PathBuf;

use disposition::harness::{Experiment, ExperimentPlan, RunStore};
use disposition::landscape::{
    landscape_from_store, write_landscape, LandscapeOptions, OutputFormat, PlotData, RenderStyle,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "landscape-out".into()),
    );
    std::fs::create_dir_all(&out)?;

    let plan = ExperimentPlan::synthetic(&[0.05, 0.5, 5.0, 100.0], &["Basic"], 40, 20, 5);
    let experiment = Experiment::prepare(plan)?;
    let store = RunStore::open(out.join("runs.jsonl"))?;
    experiment.execute(&store, 4)?;

    let landscape = landscape_from_store(
        &store,
        &experiment.pool,
        &experiment.cells(),
        &LandscapeOptions::default(),
    )?;
    for field in &landscape.fields {
        let area = field
            .contour_for_mass(0.9)
            .map_or(0.0, |c| c.enclosed_area());
        println!(
            "{:<20} h = ({:.4}, {:.4})  90% area {:.6}",
            field.cell.to_string(),
            field.bandwidth.0,
            field.bandwidth.1,
            area
        );
    }

    let style = RenderStyle {
        title: Some("Four synthetic dispositions".into()),
        ..RenderStyle::default()
    };
    write_landscape(
        &landscape,
        &out.join("landscape.svg"),
        OutputFormat::Svg,
        &style,
    )?;
    write_landscape(
        &landscape,
        &out.join("landscape.json"),
        OutputFormat::Plotdata,
        &style,
    )?;
    let doc = PlotData::load(&out.join("landscape.json"))?;
    println!(
        "plot data: {} scores, {} cells, written to {}",
        doc.scores.len(),
        doc.cells.len(),
        out.display()
    );
    Ok(())
}
