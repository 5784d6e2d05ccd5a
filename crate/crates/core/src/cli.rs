//! The `disposition` command.
//!
//! Exit codes: 0 success, 2 configuration error, 3 incomplete cells,
//! 4 missing data, 5 render failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::harness::{
    CellKey, ExecutionSummary, Experiment, ExperimentPlan, HarnessError, RunStore, StoreError,
};
use crate::landscape::{
    build_frequency_matrix, build_landscape, write_landscape, Landscape, LandscapeError,
    LandscapeOptions, LandscapeProjection, OutputFormat, RenderStyle, DEFAULT_GRID, DEFAULT_MASSES,
};
use crate::metrics::{cell_metrics, MetricsReport};
use crate::pool::{load_pool, ConstraintPool};
use crate::providers::Backend;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INCOMPLETE: u8 = 3;
pub const EXIT_MISSING_DATA: u8 = 4;
pub const EXIT_RENDER: u8 = 5;

pub const DEMO_CONCENTRATIONS: [f64; 3] = [0.05, 1.0, 100.0];
pub const DEMO_INSTRUCTIONS: [&str; 3] = ["Basic", "Quality-focused", "Creativity-focused"];
pub const DEMO_REPLICATIONS: u32 = 30;

#[derive(Debug, Parser)]
#[command(
    name = "disposition",
    version,
    about = "Profile model dispositions by repeated constraint selection"
)]
pub struct Cli {
    /// Settings file (JSON) with default pool, store, registry and credentials.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed for every random decision.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute an experiment plan, resuming whatever the store already holds.
    Run(RunArgs),
    /// Run an offline grid of synthetic dispositions and print its metrics.
    Simulate(SimulateArgs),
    /// Consistency and diversity per cell.
    Metrics(MetricsArgs),
    /// Shared-space PCA landscape with per-cell density contours.
    Landscape(LandscapeArgs),
    /// Synthetic end-to-end run: store, metrics and landscapes.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Worker threads; defaults to the core count, capped by live provider limits.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Pool file; the bundled placeholder pool when omitted.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Dirichlet concentrations, one synthetic model each.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "Basic")]
    pub instructions: Vec<String>,
    #[arg(long, default_value_t = DEMO_REPLICATIONS)]
    pub replications: u32,
    #[arg(long, default_value_t = 20)]
    pub budget: usize,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Restrict to these cells (`model:instruction`); repeatable.
    #[arg(long = "cell")]
    pub cells: Vec<String>,
    #[arg(long)]
    pub json: bool,
    /// Also print Jaccard differences between related cells.
    #[arg(long)]
    pub deltas: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Svg,
    Plotdata,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Svg => OutputFormat::Svg,
            FormatArg::Plotdata => OutputFormat::Plotdata,
        }
    }
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Cells to draw (`model:instruction`, comma separated); all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub cells: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "svg")]
    pub format: FormatArg,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    /// Fixed kernel bandwidths `hx,hy`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub bandwidth: Option<Vec<f64>>,
    /// Mass fractions to contour.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Pool file for landmark labels; the placeholder pool when omitted.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// SVG style file (JSON).
    #[arg(long)]
    pub style: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Output directory.
    #[arg(long, default_value = "demo-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub parallelism: Option<usize>,
}

/// Contents of the `--config` file. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub pool: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    /// Model id to the environment variable holding its API key.
    pub credentials: BTreeMap<String, String>,
    /// `error`, `warn`, `info`, `debug` or `trace`.
    pub log_level: Option<String>,
}

impl GlobalConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.pool, &mut cfg.store, &mut cfg.registry]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for p in [&cfg.pool, &cfg.registry].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::config(format!("{} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }
}

/// A failed command: its exit code and message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }

    fn missing(message: impl Into<String>) -> Self {
        Self::new(EXIT_MISSING_DATA, message)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Store(e) => e.into(),
            other => Self::config(other.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        Self::missing(e.to_string())
    }
}

impl From<LandscapeError> for CliError {
    fn from(e: LandscapeError) -> Self {
        match e {
            LandscapeError::EmptyCell(_) | LandscapeError::UnknownCell(_) => {
                Self::missing(e.to_string())
            }
            LandscapeError::Bandwidth(..) | LandscapeError::Levels(_) | LandscapeError::Grid(_) => {
                Self::config(e.to_string())
            }
            other => Self::new(EXIT_RENDER, other.to_string()),
        }
    }
}

/// Parses the process arguments and runs the command.
pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn init_logging(verbose: u8, configured: Option<&str>) {
    let level = match (verbose, configured) {
        (0, Some(l)) => l.to_string(),
        (0, None) => "warn".into(),
        (1, _) => "info".into(),
        (2, _) => "debug".into(),
        _ => "trace".into(),
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => GlobalConfig::load(path)?,
        None => GlobalConfig::default(),
    };
    if let Some(level) = &config.log_level {
        level
            .parse::<log::LevelFilter>()
            .map_err(|_| CliError::config(format!("bad log_level {level:?}")))?;
    }
    init_logging(cli.verbose, config.log_level.as_deref());
    let seed = cli.seed;
    match cli.command {
        Command::Run(args) => cmd_run(&config, seed, args),
        Command::Simulate(args) => cmd_simulate(&config, seed, args),
        Command::Metrics(args) => cmd_metrics(&config, args),
        Command::Landscape(args) => cmd_landscape(&config, args),
        Command::Demo(args) => cmd_demo(seed, args).map(|_| ()),
    }
}

fn store_path(flag: Option<PathBuf>, config: &GlobalConfig) -> Result<PathBuf, CliError> {
    flag.or_else(|| config.store.clone())
        .ok_or_else(|| CliError::config("no store given (use --store or a config file)"))
}

fn open_pool(flag: Option<&Path>, config: &GlobalConfig) -> Result<ConstraintPool, CliError> {
    match flag.or(config.pool.as_deref()) {
        Some(path) => load_pool(path).map_err(|e| CliError::config(e.to_string())),
        None => Ok(ConstraintPool::placeholder()),
    }
}

fn default_parallelism(plan: &ExperimentPlan) -> usize {
    let cores = std::thread::available_parallelism().map_or(4, |n| n.get());
    let live_limit: usize = plan
        .models
        .iter()
        .filter_map(|m| match &m.backend {
            Backend::Live(s) => Some(s.max_in_flight.max(1)),
            Backend::Synthetic { .. } => None,
        })
        .sum();
    if live_limit > 0 {
        cores.min(live_limit).max(1)
    } else {
        cores
    }
}

fn print_summary(summary: &ExecutionSummary) {
    println!("cell\tvalid\tplanned\tresumed\tnew_invalid");
    for c in &summary.cells {
        println!(
            "{}\t{}\t{}\t{}\t{}",
            c.cell,
            c.valid(),
            c.planned,
            c.resumed,
            c.new_invalid
        );
    }
    println!("elicitations: {}", summary.elicitations);
}

fn execute(
    experiment: &Experiment,
    store: &RunStore,
    parallelism: usize,
) -> Result<ExecutionSummary, CliError> {
    let summary = experiment.execute(store, parallelism)?;
    print_summary(&summary);
    if !summary.is_complete() {
        let cells: Vec<String> = summary
            .incomplete_cells()
            .iter()
            .map(|c| c.to_string())
            .collect();
        return Err(CliError::new(
            EXIT_INCOMPLETE,
            format!("incomplete cells: {}", cells.join(", ")),
        ));
    }
    Ok(summary)
}

/// `run`: executes a plan file. Already-valid replications are skipped, so
/// re-invoking after an interruption finishes the grid without duplicates.
pub fn cmd_run(config: &GlobalConfig, seed: Option<u64>, args: RunArgs) -> Result<(), CliError> {
    let mut plan = ExperimentPlan::load(&args.plan)?;
    if let Some(seed) = seed {
        plan.base_seed = seed;
    }
    if plan.pool.is_none() {
        plan.pool = config.pool.clone();
    }
    if plan.registry.is_none() {
        plan.registry = config.registry.clone();
    }
    for model in &mut plan.models {
        if let (Some(var), Backend::Live(settings)) =
            (config.credentials.get(&model.model), &mut model.backend)
        {
            settings.credential_env = var.clone();
        }
    }
    let parallelism = args
        .parallelism
        .unwrap_or_else(|| default_parallelism(&plan));
    let store = RunStore::open(store_path(args.store, config)?)?;
    let experiment = Experiment::prepare(plan)?;
    execute(&experiment, &store, parallelism).map(|_| ())
}

fn report_for(store: &RunStore, cells: &[CellKey]) -> Result<MetricsReport, CliError> {
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let records = store.cell_records(cell)?;
        let row = cell_metrics(&records).map_err(|e| CliError::missing(format!("{cell}: {e}")))?;
        rows.push(row);
    }
    Ok(MetricsReport::new(rows))
}

/// `simulate`: synthetic models from a list of concentrations.
pub fn cmd_simulate(
    config: &GlobalConfig,
    seed: Option<u64>,
    args: SimulateArgs,
) -> Result<(), CliError> {
    if let Some(bad) = args.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(CliError::config(format!(
            "concentration must be positive and finite, got {bad}"
        )));
    }
    let instructions: Vec<&str> = args.instructions.iter().map(String::as_str).collect();
    let mut plan = ExperimentPlan::synthetic(
        &args.alphas,
        &instructions,
        args.replications,
        args.budget,
        seed.unwrap_or(0),
    );
    plan.pool = args.pool.or_else(|| config.pool.clone());
    plan.registry = config.registry.clone();
    let parallelism = args
        .parallelism
        .unwrap_or_else(|| default_parallelism(&plan));
    let store = RunStore::open(store_path(args.store, config)?)?;
    let experiment = Experiment::prepare(plan)?;
    execute(&experiment, &store, parallelism)?;
    print!("{}", report_for(&store, &experiment.cells())?.to_tsv());
    Ok(())
}

fn parse_cells(raw: &[String]) -> Result<Vec<CellKey>, CliError> {
    raw.iter()
        .map(|s| {
            s.parse::<CellKey>()
                .map_err(|e| CliError::config(format!("bad cell {s:?}: {e}")))
        })
        .collect()
}

fn require_cells(store: &RunStore, cells: &[CellKey]) -> Result<(), CliError> {
    let present = store.cells();
    let missing: Vec<String> = cells
        .iter()
        .filter(|c| !present.contains(c))
        .map(ToString::to_string)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::missing(format!(
            "cells not in store: {}",
            missing.join(", ")
        )))
    }
}

/// `metrics`: the per-cell table, sorted by Jaccard descending.
pub fn cmd_metrics(config: &GlobalConfig, args: MetricsArgs) -> Result<(), CliError> {
    let store = RunStore::open_read_only(store_path(args.store, config)?)?;
    if store.is_empty() {
        return Err(CliError::missing(format!(
            "store {} holds no runs",
            store.path().display()
        )));
    }
    let cells = if args.cells.is_empty() {
        store.cells()
    } else {
        let cells = parse_cells(&args.cells)?;
        require_cells(&store, &cells)?;
        cells
    };
    let report = report_for(&store, &cells)?;
    if args.json {
        print!("{}", report.to_json());
    } else {
        print!("{}", report.to_tsv());
    }
    if args.deltas {
        print!("{}", report.deltas_to_tsv());
    }
    Ok(())
}

fn landscape_options(args: &LandscapeArgs) -> Result<LandscapeOptions, CliError> {
    let bandwidth = match args.bandwidth.as_deref() {
        None => None,
        Some([hx, hy]) => Some((*hx, *hy)),
        Some(other) => {
            return Err(CliError::config(format!(
                "--bandwidth takes hx,hy, got {} values",
                other.len()
            )))
        }
    };
    Ok(LandscapeOptions {
        grid: args.grid,
        bandwidth,
        masses: args
            .levels
            .clone()
            .unwrap_or_else(|| DEFAULT_MASSES.to_vec()),
    })
}

/// Builds a landscape for `cells`. The shared space is fit on `cells` when
/// there are two or more, otherwise on every populated cell of the store.
pub fn landscape_for_cells(
    store: &RunStore,
    pool: &ConstraintPool,
    cells: &[CellKey],
    options: &LandscapeOptions,
) -> Result<Landscape, CliError> {
    let space: Vec<CellKey> = if cells.len() >= 2 {
        cells.to_vec()
    } else {
        store
            .cells()
            .into_iter()
            .filter(|c| store.load_cell(c).is_ok_and(|r| !r.is_empty()))
            .collect()
    };
    if space.len() < 2 {
        return Err(CliError::missing(
            "a landscape needs at least two populated cells",
        ));
    }
    let matrix = build_frequency_matrix(store, pool, &space)?;
    let mut landscape = build_landscape(LandscapeProjection::fit(matrix)?, options)?;
    landscape.fields.retain(|f| cells.contains(&f.cell));
    landscape.degenerate.retain(|c| cells.contains(c));
    for cell in &landscape.degenerate {
        eprintln!(
            "warning: {cell} has no density (too few distinct selections); drawing landmarks only"
        );
    }
    Ok(landscape)
}

/// `landscape`: one figure or plot-data document for the named cells.
pub fn cmd_landscape(config: &GlobalConfig, args: LandscapeArgs) -> Result<(), CliError> {
    let options = landscape_options(&args)?;
    let style = match &args.style {
        Some(p) => RenderStyle::load(p).map_err(|e| CliError::config(e.to_string()))?,
        None => RenderStyle::default(),
    };
    let pool = open_pool(args.pool.as_deref(), config)?;
    let store = RunStore::open_read_only(store_path(args.store.clone(), config)?)?;
    let cells = if args.cells.is_empty() {
        store.cells()
    } else {
        let cells = parse_cells(&args.cells)?;
        require_cells(&store, &cells)?;
        cells
    };
    if cells.is_empty() {
        return Err(CliError::missing("store holds no cells"));
    }
    let landscape = landscape_for_cells(&store, &pool, &cells, &options)?;
    write_landscape(&landscape, &args.out, args.format.into(), &style)
        .map_err(|e| CliError::new(EXIT_RENDER, format!("{}: {e}", args.out.display())))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Files written by [`cmd_demo`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoOutputs {
    pub store: PathBuf,
    pub metrics_tsv: PathBuf,
    pub metrics_json: PathBuf,
    pub svg: PathBuf,
    pub plotdata: PathBuf,
}

impl DemoOutputs {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            store: dir.join("runs.jsonl"),
            metrics_tsv: dir.join("metrics.tsv"),
            metrics_json: dir.join("metrics.json"),
            svg: dir.join("landscape.svg"),
            plotdata: dir.join("landscape.json"),
        }
    }
}

/// The synthetic preset plan: three dispositions by three instruction types.
pub fn demo_plan(seed: u64) -> ExperimentPlan {
    ExperimentPlan::synthetic(
        &DEMO_CONCENTRATIONS,
        &DEMO_INSTRUCTIONS,
        DEMO_REPLICATIONS,
        20,
        seed,
    )
}

/// `demo`: runs [`demo_plan`] and writes every artifact into `args.out`.
pub fn cmd_demo(seed: Option<u64>, args: DemoArgs) -> Result<DemoOutputs, CliError> {
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", args.out.display())))?;
    let out = DemoOutputs::in_dir(&args.out);
    let plan = demo_plan(seed.unwrap_or(0));
    let parallelism = args
        .parallelism
        .unwrap_or_else(|| default_parallelism(&plan));
    let experiment = Experiment::prepare(plan)?;
    let store = RunStore::open(&out.store)?;
    execute(&experiment, &store, parallelism)?;

    let cells = experiment.cells();
    let report = report_for(&store, &cells)?;
    let write = |path: &Path, body: String| {
        fs::write(path, body)
            .map_err(|e| CliError::new(EXIT_RENDER, format!("{}: {e}", path.display())))
    };
    write(&out.metrics_tsv, report.to_tsv())?;
    write(&out.metrics_json, report.to_json())?;
    print!("{}", report.to_tsv());

    let landscape = landscape_for_cells(
        &store,
        &experiment.pool,
        &cells,
        &LandscapeOptions::default(),
    )?;
    let style = RenderStyle {
        title: Some("Synthetic dispositions".into()),
        ..RenderStyle::default()
    };
    for (path, format) in [
        (&out.svg, OutputFormat::Svg),
        (&out.plotdata, OutputFormat::Plotdata),
    ] {
        write_landscape(&landscape, path, format, &style)
            .map_err(|e| CliError::new(EXIT_RENDER, format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(out)
}
