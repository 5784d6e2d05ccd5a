//! Exit criteria. Runs without the libtest harness so every criterion
//! prints its own PASS/FAIL line; the process fails if any criterion does.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use common::*;
use disposition::harness::{CellKey, Experiment, ExperimentPlan, RunRecord, RunStore};
use disposition::landscape::density::density_on_grid;
use disposition::landscape::{
    build_landscape, fit_pca, isolines, GridSpec, LandscapeOptions, LandscapeProjection, PlotData,
};
use disposition::metrics::{cell_metrics, diversity, FrequencyDistribution, MetricsReport};
use disposition::pool::ConstraintPool;
use disposition::providers::Backend;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_disposition"));
    cmd.env_remove("RUST_LOG");
    cmd
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let cell = CellKey::new(format!("cell{seed}"), "Basic");
        let runs = random_runs(seed, 30, 5, 10);
        let records: Vec<RunRecord> = runs
            .iter()
            .enumerate()
            .map(|(r, s)| record(&cell, r as u32, s.clone()))
            .collect();
        let got = cell_metrics(&records).map_err(|e| e.to_string())?;
        let j = naive_mean_jaccard(&runs);
        let (gs, en, unique) = naive_diversity(&runs);
        ensure!(
            got.unique_constraints == unique,
            "cell {seed}: unique {} vs {unique}",
            got.unique_constraints
        );
        for (name, a, b) in [
            ("J", got.jaccard, j),
            ("GS", got.gini_simpson, gs),
            ("EN", got.effective_number, en),
        ] {
            let d = (a - b).abs();
            worst = worst.max(d);
            ensure!(d <= 1e-12, "cell {seed}: {name} {a} vs oracle {b}");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("50 cells, max |diff| {worst:.1e}, {elapsed:.2?}"))
}

fn published_identity() -> Outcome {
    let text = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/stance_diversity.tsv"),
    )
    .map_err(|e| e.to_string())?;
    let mut rows = 0;
    let mut worst: f64 = 0.0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let gs: f64 = f[2].parse().map_err(|_| format!("bad GS in {line:?}"))?;
        let en: f64 = f[3].parse().map_err(|_| format!("bad EN in {line:?}"))?;
        let gap = (gs - (1.0 - 1.0 / en)).abs();
        worst = worst.max(gap);
        ensure!(gap <= 5e-5, "{}: |GS - (1 - 1/EN)| = {gap:.2e}", f[0]);
        rows += 1;
    }
    ensure!(rows == 4, "expected 4 published rows, read {rows}");
    // the implementation holds the same identity on its own output
    for seed in 0..20 {
        let runs = random_runs(seed, 200, 20, 30);
        let d = diversity(&FrequencyDistribution::from_selections(
            runs.iter().map(Vec::as_slice),
        ))
        .map_err(|e| e.to_string())?;
        let gap = (d.gini_simpson - (1.0 - 1.0 / d.effective_number)).abs();
        ensure!(
            gap <= 1e-12,
            "seed {seed}: implementation identity gap {gap:.2e}"
        );
    }
    Ok(format!("{rows} rows, max gap {worst:.2e}"))
}

fn degenerate_bounds() -> Outcome {
    let cell = CellKey::new("m", "Basic");
    let same: Vec<RunRecord> = (0..10)
        .map(|r| record(&cell, r, (101..121).collect()))
        .collect();
    let m = cell_metrics(&same).map_err(|e| e.to_string())?;
    ensure!(m.jaccard == 1.0, "identical J = {}", m.jaccard);
    ensure!(
        m.effective_number == 20.0,
        "identical EN = {}",
        m.effective_number
    );
    ensure!(
        m.unique_constraints == 20,
        "identical unique = {}",
        m.unique_constraints
    );

    let disjoint: Vec<RunRecord> = (0..10)
        .map(|r| record(&cell, r, (r * 20 + 1..=r * 20 + 20).collect()))
        .collect();
    let m = cell_metrics(&disjoint).map_err(|e| e.to_string())?;
    ensure!(m.jaccard == 0.0, "disjoint J = {}", m.jaccard);
    ensure!(
        m.effective_number == 200.0,
        "disjoint EN = {}",
        m.effective_number
    );
    Ok("J=1, EN=20, unique=20 / J=0, EN=200".into())
}

const SPECTRUM: [f64; 3] = [0.05, 1.0, 100.0];

fn spectrum_store(
    seed: u64,
    alphas: &[f64],
    dir: &Path,
) -> Result<(RunStore, Vec<CellKey>), String> {
    let plan = ExperimentPlan::synthetic(alphas, &["Basic"], 30, 20, seed);
    let exp = Experiment::prepare(plan).map_err(|e| e.to_string())?;
    let store = RunStore::open(dir.join(format!("spectrum-{seed}-{}.jsonl", alphas.len())))
        .map_err(|e| e.to_string())?;
    let summary = exp.execute(&store, 4).map_err(|e| e.to_string())?;
    ensure!(summary.is_complete(), "seed {seed}: incomplete grid");
    Ok((store, exp.cells()))
}

fn spectrum() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut lines = Vec::new();
    for seed in 0..5 {
        let (store, cells) = spectrum_store(seed, &SPECTRUM, dir.path())?;
        let rows = cells
            .iter()
            .map(|c| {
                cell_metrics(&store.cell_records(c).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()?;
        for w in rows.windows(2) {
            ensure!(
                w[0].jaccard > w[1].jaccard,
                "seed {seed}: J not decreasing {} -> {}",
                w[0].cell,
                w[1].cell
            );
            ensure!(
                w[0].effective_number < w[1].effective_number,
                "seed {seed}: EN not increasing {} -> {}",
                w[0].cell,
                w[1].cell
            );
        }
        lines.push(format!(
            "J {:.3}/{:.3}/{:.3} EN {:.1}/{:.1}/{:.1}",
            rows[0].jaccard,
            rows[1].jaccard,
            rows[2].jaccard,
            rows[0].effective_number,
            rows[1].effective_number,
            rows[2].effective_number
        ));
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("seed 0: {}; {elapsed:.2?}", lines[0]))
}

fn pca_correctness() -> Outcome {
    let mut shapes = Vec::new();
    for seed in 0..20u64 {
        let rows = 3 + (seed as usize * 5) % 10;
        let cols = 2 + (seed as usize * 3) % 5;
        let k = cols.min(rows - 1);
        let data = random_matrix(1000 + seed, rows, cols);
        let pca = fit_pca(&data, rows, cols, k).map_err(|e| e.to_string())?;
        let (vals, vecs) = covariance_oracle(&data, rows, cols);
        let centred = centered(&data, rows, cols);
        let scores = pca.transform(&data, cols);
        for c in 0..k {
            ensure!(
                (pca.explained_variance[c] - vals[c]).abs() <= 1e-8,
                "{rows}x{cols} variance {c}: {} vs {}",
                pca.explained_variance[c],
                vals[c]
            );
            let sign = dot(&pca.components[c], &vecs[c]).signum();
            for j in 0..cols {
                let d = (pca.components[c][j] - sign * vecs[c][j]).abs();
                ensure!(d <= 1e-8, "{rows}x{cols} component {c}[{j}] off by {d:.1e}");
            }
            for (i, row) in centred.chunks(cols).enumerate() {
                let expect = sign * dot(row, &vecs[c]);
                ensure!(
                    (scores[i][c] - expect).abs() <= 1e-8,
                    "{rows}x{cols} score ({i},{c})"
                );
            }
            for b in 0..k {
                let target = if b == c { 1.0 } else { 0.0 };
                let r = (dot(&pca.components[c], &pca.components[b]) - target).abs();
                ensure!(r <= 1e-8, "{rows}x{cols} orthonormality residual {r:.1e}");
            }
            if c > 0 {
                ensure!(
                    pca.explained_variance[c] <= pca.explained_variance[c - 1],
                    "{rows}x{cols} variance increases at {c}"
                );
            }
        }
        shapes.push(format!("{rows}x{cols}"));
    }
    Ok(format!("20 matrices ({} .. {})", shapes[0], shapes[19]))
}

fn density_validity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pool = ConstraintPool::placeholder();
    let mut fields = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..5 {
        let (store, cells) = spectrum_store(seed, &SPECTRUM, dir.path())?;
        let matrix = disposition::landscape::build_frequency_matrix(&store, &pool, &cells)
            .map_err(|e| e.to_string())?;
        let projection = LandscapeProjection::fit(matrix).map_err(|e| e.to_string())?;
        let landscape =
            build_landscape(projection, &LandscapeOptions::default()).map_err(|e| e.to_string())?;
        ensure!(
            landscape.degenerate.is_empty(),
            "seed {seed}: degenerate cells {:?}",
            landscape.degenerate
        );
        for f in &landscape.fields {
            ensure!(
                f.values.iter().all(|v| *v >= 0.0),
                "{}: negative density",
                f.cell
            );
            let mass = f.integral();
            ensure!((0.98..=1.0).contains(&mass), "{}: integral {mass}", f.cell);
            lo = lo.min(mass);
            hi = hi.max(mass);
            fields += 1;
        }
    }
    let (hx, hy) = (0.35, 0.8);
    let n = 201;
    let grid = GridSpec {
        x0: -1.5,
        y0: -4.0,
        dx: 0.015,
        dy: 0.04,
        nx: n,
        ny: n,
    };
    let v = density_on_grid(&[[0.0, 0.0]], &[1.0], &grid, (hx, hy)).map_err(|e| e.to_string())?;
    let peak = v[100 * n + 100];
    let closed = 1.0 / (2.0 * std::f64::consts::PI * hx * hy);
    ensure!((peak - closed).abs() <= 1e-9, "peak {peak} vs {closed}");
    Ok(format!(
        "{fields} fields, integrals in [{lo:.5}, {hi:.5}], peak error {:.1e}",
        (peak - closed).abs()
    ))
}

fn contour_radius() -> Outcome {
    let h = 0.5;
    let n = 241;
    let grid = GridSpec {
        x0: -3.0,
        y0: -3.0,
        dx: 0.025,
        dy: 0.025,
        nx: n,
        ny: n,
    };
    let v = density_on_grid(&[[0.0, 0.0]], &[1.0], &grid, (h, h)).map_err(|e| e.to_string())?;
    let peak = 1.0 / (2.0 * std::f64::consts::PI * h * h);
    let mut worst: f64 = 0.0;
    for frac in [0.1, 0.3, 0.5, 0.8] {
        let level = frac * peak;
        let radius = h * (-2.0 * frac.ln()).sqrt();
        let lines = isolines(&v, &grid, level);
        ensure!(
            lines.len() == 1 && lines[0].closed,
            "level {frac}: {} lines",
            lines.len()
        );
        for p in &lines[0].points {
            let dev = ((p[0].hypot(p[1]) - radius) / radius).abs();
            worst = worst.max(dev);
            ensure!(
                dev < 0.02,
                "level {frac}: vertex deviates {:.2}%",
                dev * 100.0
            );
        }
    }
    Ok(format!("max radial deviation {:.3}%", worst * 100.0))
}

fn landscape_structure() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pool = ConstraintPool::placeholder();
    let mut report = Vec::new();
    let mut failed = Vec::new();
    for seed in 0..5 {
        let (store, cells) = spectrum_store(seed, &[0.05, 100.0], dir.path())?;
        let matrix = disposition::landscape::build_frequency_matrix(&store, &pool, &cells)
            .map_err(|e| e.to_string())?;
        let projection = LandscapeProjection::fit(matrix).map_err(|e| e.to_string())?;
        let landscape =
            build_landscape(projection, &LandscapeOptions::default()).map_err(|e| e.to_string())?;
        let area = |cell: &CellKey| -> Result<f64, String> {
            let field = landscape.field(cell).ok_or(format!("{cell}: no density"))?;
            let level = field
                .contour_for_mass(0.9)
                .ok_or(format!("{cell}: no 90% contour"))?;
            Ok(level.enclosed_area())
        };
        let (rigid, diffuse) = (area(&cells[0])?, area(&cells[1])?);
        report.push(format!("{rigid:.2e} vs {diffuse:.2e}"));
        if rigid >= diffuse {
            failed.push(seed);
        }
    }
    let detail = format!("90% areas rigid vs diffuse: {}", report.join(", "));
    if failed.is_empty() {
        Ok(detail)
    } else {
        Err(format!("rigid not smaller for seeds {failed:?}; {detail}"))
    }
}

fn run_demo(out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let status = bin()
        .args(["demo", "--seed", "0", "--out"])
        .arg(out)
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "demo exited with {status}");
    Ok(start.elapsed())
}

fn end_to_end_demo() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let elapsed = run_demo(&a)?;
    ensure!(elapsed < Duration::from_secs(60), "demo took {elapsed:?}");
    run_demo(&b)?;

    let store = RunStore::open_read_only(a.join("runs.jsonl")).map_err(|e| e.to_string())?;
    let cells = store.cells();
    ensure!(cells.len() == 9, "{} cells in store", cells.len());
    for c in &cells {
        let n = store.load_cell(c).map_err(|e| e.to_string())?.len();
        ensure!(n == 30, "{c}: {n} valid runs");
    }
    let json = fs::read_to_string(a.join("metrics.json")).map_err(|e| e.to_string())?;
    let report = MetricsReport::from_json(&json).map_err(|e| e.to_string())?;
    ensure!(report.rows.len() == 9, "{} metric rows", report.rows.len());
    let tsv = fs::read_to_string(a.join("metrics.tsv")).map_err(|e| e.to_string())?;
    ensure!(
        tsv.lines().count() == 10,
        "metrics.tsv has {} lines",
        tsv.lines().count()
    );
    let svg = fs::read_to_string(a.join("landscape.svg")).map_err(|e| e.to_string())?;
    ensure!(
        svg.starts_with("<svg") && svg.contains("</svg>"),
        "landscape.svg is not an SVG document"
    );
    let plot = PlotData::load(&a.join("landscape.json")).map_err(|e| e.to_string())?;
    ensure!(
        plot.cells.len() == 9,
        "plot data holds {} cells",
        plot.cells.len()
    );

    for f in [
        "runs.jsonl",
        "metrics.tsv",
        "metrics.json",
        "landscape.svg",
        "landscape.json",
    ] {
        let same = fs::read(a.join(f)).map_err(|e| e.to_string())?
            == fs::read(b.join(f)).map_err(|e| e.to_string())?;
        ensure!(same, "{f} differs between runs");
    }
    Ok(format!(
        "9 cells x 30 runs, 5 outputs byte-identical, {elapsed:.2?}"
    ))
}

fn crash_resumability() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut plan =
        ExperimentPlan::synthetic(&[0.5, 5.0], &["Basic", "Creativity-focused"], 15, 20, 21);
    for m in &mut plan.models {
        if let Backend::Synthetic { disposition } = &mut m.backend {
            disposition.latency_ms = 25;
        }
    }
    let plan_path = dir.path().join("plan.json");
    fs::write(&plan_path, plan.to_json()).map_err(|e| e.to_string())?;
    let store_path = dir.path().join("runs.jsonl");
    let run = || {
        let mut cmd = bin();
        cmd.args(["run", "--parallelism", "2", "--plan"])
            .arg(&plan_path)
            .arg("--store")
            .arg(&store_path)
            .stdout(Stdio::null())
            .stderr(Stdio::null());
        cmd
    };

    let mut child = run().spawn().map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(20);
    let lines = |p: &Path| {
        fs::read_to_string(p)
            .map(|t| t.lines().count())
            .unwrap_or(0)
    };
    while lines(&store_path) < 12 {
        ensure!(Instant::now() < deadline, "first run made no progress");
        thread::sleep(Duration::from_millis(5));
    }
    child.kill().map_err(|e| e.to_string())?;
    child.wait().map_err(|e| e.to_string())?;
    let before = lines(&store_path).saturating_sub(1);
    ensure!(before < 60, "run finished before it could be killed");

    let status = run().status().map_err(|e| e.to_string())?;
    ensure!(status.success(), "resumed run exited with {status}");

    let text = fs::read_to_string(&store_path).map_err(|e| e.to_string())?;
    let mut seen: BTreeMap<(CellKey, u32), usize> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let rec: RunRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        *seen.entry((rec.cell, rec.replication)).or_default() += 1;
    }
    let exp = Experiment::prepare(plan).map_err(|e| e.to_string())?;
    let planned: Vec<(CellKey, u32)> = exp
        .cells()
        .into_iter()
        .flat_map(|c| (0..15).map(move |r| (c.clone(), r)))
        .collect();
    let dupes = seen.values().filter(|n| **n > 1).count();
    ensure!(dupes == 0, "{dupes} duplicated replications");
    ensure!(
        seen.keys().cloned().collect::<Vec<_>>() == planned,
        "store holds {} distinct replications, planned {}",
        seen.len(),
        planned.len()
    );
    Ok(format!(
        "killed after {before}/60 records; resumed to 60 with no duplicates"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric oracle equivalence", metric_oracle),
        ("GS/EN identity on published rows", published_identity),
        ("degenerate bounds", degenerate_bounds),
        ("rigidity-exploration spectrum", spectrum),
        ("PCA correctness", pca_correctness),
        ("density validity", density_validity),
        ("contour correctness", contour_radius),
        ("landscape structure", landscape_structure),
        ("end-to-end demo", end_to_end_demo),
        ("crash resumability", crash_resumability),
    ];
    // keep panics from interleaving with the report
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failures += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
