//! Command-line front end. Every command resolves its options from an
//! optional TOML/JSON config file overridden by flags, and records the
//! resolved configuration in `<out-dir>/run.json`.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{
    gradient_scaling, gradient_slopes, plot_gradient_svg, reconcile_timings, scenario_timings, write_gradient_csv,
    write_reconcile_csv, write_scenario_csv, GradientBenchConfig,
};
use crate::error::Error;
use crate::gbdt::Booster;
use crate::hierarchy::{Frequency, Hierarchy, HierarchySpec};
use crate::linalg::DenseMatrix;
use crate::objective::LossKind;
use crate::pipeline::{
    evaluate, forecast_base, format_table, generate, load_m5, load_panel, m5_hierarchy_spec,
    read_reports_csv, synth_hierarchy_spec, test_origin, train_scenario, write_reports_csv, EvalReport, Measure,
    PanelDataset, RandomHierarchyConfig, Scenario, ScenarioConfig, SynthConfig, TrainedScenario, Trial,
};
use crate::reconcile::{fit_reconciler, Method, Reconciler};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("HIERCAST_GIT_DESCRIBE"), ")");

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(Error::Singular(_)) => EXIT_NUMERICAL,
            CliError::Lib(Error::InvalidArgument(_) | Error::InvalidCombination(_)) => EXIT_USAGE,
            CliError::Lib(_) => EXIT_DATA,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hiercast", version = VERSION, about = "Hierarchical forecasting with a sparse hierarchical loss")]
pub struct Cli {
    /// TOML or JSON file with defaults for any option; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic panel, metadata and hierarchy spec.
    Synth(SynthArgs),
    /// Build and export the summing matrix of a panel's hierarchy.
    BuildHierarchy(DataArgs),
    /// Train the models (and reconciler) of one scenario.
    Train(TrainArgs),
    /// Forecast with trained models.
    Forecast(ForecastArgs),
    /// Reconcile a forecast file.
    Reconcile(ReconcileArgs),
    /// Score forecast files against actuals.
    Evaluate(EvaluateArgs),
    /// Time gradients, scenarios and reconciliation.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Long-format CSV: series_id,date,target[,exogenous...].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Metadata CSV: series_id,<hierarchy columns...>; defaults to
    /// metadata.csv next to the data file.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Hierarchy spec JSON.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// Directory with M5 sales_train_evaluation.csv, calendar.csv and
    /// sell_prices.csv (uses the 12-level M5 hierarchy unless --hierarchy).
    #[arg(long)]
    pub m5_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_series: Option<usize>,
    #[arg(long)]
    pub n_days: Option<usize>,
    #[arg(long)]
    pub n_stores: Option<usize>,
    #[arg(long)]
    pub n_departments: Option<usize>,
    /// Fraction of zero-demand days.
    #[arg(long)]
    pub sparsity: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub objective: Option<LossKind>,
    #[arg(long)]
    pub metric: Option<LossKind>,
    #[arg(long)]
    pub reconciliation: Option<Method>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub n_validation_sets: Option<usize>,
    #[arg(long)]
    pub train_days: Option<usize>,
    #[arg(long)]
    pub n_estimators: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub num_leaves: Option<usize>,
    /// Temporal levels for the hierarchical loss, e.g. week,month.
    #[arg(long, value_delimiter = ',')]
    pub temporal: Option<Vec<Frequency>>,
    /// Train the hierarchical loss on random hierarchies.
    #[arg(long)]
    pub random_hierarchy: bool,
    /// Random hyperparameter draws per model on top of the configured ones.
    #[arg(long)]
    pub search_trials: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// First forecast day (0-based); defaults to holding out the last
    /// horizon days.
    #[arg(long)]
    pub origin: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Directory written by `train` (defaults to the output directory).
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    #[arg(long)]
    pub origin: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReconcileArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Forecast CSV: series_id,step,value.
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    /// Reconciler JSON written by `train`.
    #[arg(long)]
    pub reconciler: Option<PathBuf>,
    /// Structural method fitted on the spot: base, bottom-up, ols or
    /// wls-struct.
    #[arg(long)]
    pub method: Option<Method>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// One forecast CSV per seed; reports their mean and deviation.
    #[arg(long, num_args = 1..)]
    pub forecasts: Vec<PathBuf>,
    /// Run name in the report.
    #[arg(long)]
    pub name: Option<String>,
    /// Report CSV whose first run is the relative baseline.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub origin: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Bottom-level sizes of the gradient benchmark.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Series in the synthetic panel of the scenario benchmark.
    #[arg(long)]
    pub scenario_series: Option<usize>,
    #[arg(long)]
    pub skip_scenarios: bool,
    #[arg(long)]
    pub skip_reconcile: bool,
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub data: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub hierarchy: Option<PathBuf>,
    pub m5_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub gradient: GradientBenchConfig,
    pub scenario_series: usize,
    pub scenario_days: usize,
    pub scenarios: bool,
    pub reconcile: bool,
    pub reconcile_series: usize,
    pub plots: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            gradient: GradientBenchConfig::default(),
            scenario_series: 200,
            scenario_days: 730,
            scenarios: true,
            reconcile: true,
            reconcile_series: 500,
            plots: true,
        }
    }
}

/// Resolved options of one command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed list; commands that train once use the first entry.
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub paths: DataPaths,
    pub scenario: ScenarioConfig,
    pub synth: SynthConfig,
    pub bench: BenchConfig,
    pub origin: Option<usize>,
    pub model_dir: Option<PathBuf>,
    pub forecasts: Vec<PathBuf>,
    pub reconciler: Option<PathBuf>,
    pub method: Option<Method>,
    pub name: Option<String>,
    pub baseline: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn seed(&self) -> u64 {
        self.seeds.first().copied().unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn apply_data(&mut self, a: &DataArgs) {
        set(&mut self.paths.data, &a.data);
        set(&mut self.paths.metadata, &a.metadata);
        set(&mut self.paths.hierarchy, &a.hierarchy);
        set(&mut self.paths.m5_dir, &a.m5_dir);
    }

    fn apply_scenario(&mut self, a: &ScenarioArgs) {
        let s = &mut self.scenario;
        if let Some(v) = a.scenario {
            s.scenario = v;
        }
        if let Some(v) = a.objective {
            s.objective = v;
        }
        if let Some(v) = a.metric {
            s.metric = v;
        }
        if a.reconciliation.is_some() {
            s.reconciliation = a.reconciliation;
        }
        if let Some(v) = a.horizon {
            s.horizon = v;
        }
        if let Some(v) = a.n_validation_sets {
            s.n_validation_sets = v;
        }
        if a.train_days.is_some() {
            s.train_days = a.train_days;
        }
        if let Some(v) = a.n_estimators {
            s.train.n_estimators = v;
        }
        if let Some(v) = a.learning_rate {
            s.train.learning_rate = v;
        }
        if let Some(v) = a.num_leaves {
            s.train.num_leaves = v;
        }
        if let Some(v) = &a.temporal {
            s.temporal = v.clone();
        }
        if a.random_hierarchy && s.random_hierarchy.is_none() {
            s.random_hierarchy = Some(RandomHierarchyConfig::default());
        }
        if let Some(v) = a.search_trials {
            s.search_trials = v;
        }
    }
}

fn set<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
    if src.is_some() {
        dst.clone_from(src);
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolves configuration and runs one parsed command.
pub fn execute(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    set(&mut cfg.threads, &cli.threads);
    set(&mut cfg.out_dir, &cli.out_dir);
    if let Some(n) = cfg.threads {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let name = match &cli.command {
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            s.n_series = a.n_series.unwrap_or(s.n_series);
            s.n_days = a.n_days.unwrap_or(s.n_days);
            s.n_stores = a.n_stores.unwrap_or(s.n_stores);
            s.n_departments = a.n_departments.unwrap_or(s.n_departments);
            s.zero_fraction = a.sparsity.unwrap_or(s.zero_fraction);
            s.seed = cfg.seeds.first().copied().unwrap_or(s.seed);
            "synth"
        }
        Command::BuildHierarchy(a) => {
            cfg.apply_data(a);
            "build-hierarchy"
        }
        Command::Train(a) => {
            cfg.apply_data(&a.data);
            cfg.apply_scenario(&a.scenario);
            set(&mut cfg.origin, &a.origin);
            "train"
        }
        Command::Forecast(a) => {
            cfg.apply_data(&a.data);
            set(&mut cfg.model_dir, &a.model_dir);
            set(&mut cfg.origin, &a.origin);
            "forecast"
        }
        Command::Reconcile(a) => {
            cfg.apply_data(&a.data);
            if let Some(f) = &a.forecasts {
                cfg.forecasts = vec![f.clone()];
            }
            set(&mut cfg.reconciler, &a.reconciler);
            set(&mut cfg.method, &a.method);
            "reconcile"
        }
        Command::Evaluate(a) => {
            cfg.apply_data(&a.data);
            if !a.forecasts.is_empty() {
                cfg.forecasts = a.forecasts.clone();
            }
            set(&mut cfg.name, &a.name);
            set(&mut cfg.baseline, &a.baseline);
            set(&mut cfg.origin, &a.origin);
            "evaluate"
        }
        Command::Bench(a) => {
            let b = &mut cfg.bench;
            if let Some(v) = &a.sizes {
                b.gradient.sizes = v.clone();
            }
            b.gradient.levels = a.levels.unwrap_or(b.gradient.levels);
            b.gradient.reps = a.reps.unwrap_or(b.gradient.reps);
            b.scenario_series = a.scenario_series.unwrap_or(b.scenario_series);
            b.scenarios &= !a.skip_scenarios;
            b.reconcile &= !a.skip_reconcile;
            b.plots &= !a.no_plots;
            "bench"
        }
    };
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;
    write_run_json(&out, name, &cfg)?;
    match cli.command {
        Command::Synth(_) => cmd_synth(&cfg, &out),
        Command::BuildHierarchy(_) => cmd_build_hierarchy(&cfg, &out),
        Command::Train(_) => cmd_train(&cfg, &out),
        Command::Forecast(_) => cmd_forecast(&cfg, &out),
        Command::Reconcile(_) => cmd_reconcile(&cfg, &out),
        Command::Evaluate(_) => cmd_evaluate(&cfg, &out),
        Command::Bench(_) => cmd_bench(&cfg, &out),
    }
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
}

fn write_run_json(out: &Path, command: &str, cfg: &RunConfig) -> CliResult<()> {
    let record = RunRecord {
        command,
        version: VERSION,
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&record).map_err(Error::from)?;
    std::fs::write(out.join("run.json"), text)?;
    Ok(())
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} file {} not found", path.display())))
    }
}

/// Loads the panel and its hierarchy from the configured paths.
fn load_inputs(paths: &DataPaths) -> CliResult<(PanelDataset, Hierarchy)> {
    let spec_from = |path: &Path| -> CliResult<HierarchySpec> {
        require_file(path, "hierarchy")?;
        Ok(HierarchySpec::load(path)?)
    };
    if let Some(dir) = &paths.m5_dir {
        let sales = ["sales_train_evaluation.csv", "sales_train_validation.csv"]
            .iter()
            .map(|f| dir.join(f))
            .find(|p| p.is_file())
            .ok_or_else(|| CliError::Usage(format!("no sales_train_*.csv in {}", dir.display())))?;
        let (calendar, prices) = (dir.join("calendar.csv"), dir.join("sell_prices.csv"));
        require_file(&calendar, "calendar")?;
        require_file(&prices, "sell prices")?;
        let panel = load_m5(&sales, &calendar, &prices)?;
        let spec = match &paths.hierarchy {
            Some(p) => spec_from(p)?,
            None => m5_hierarchy_spec(),
        };
        let h = panel.hierarchy(&spec)?;
        return Ok((panel, h));
    }
    let data = paths
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("--data (or --m5-dir) is required".into()))?;
    require_file(data, "data")?;
    let hierarchy = paths
        .hierarchy
        .as_ref()
        .ok_or_else(|| CliError::Usage("--hierarchy is required".into()))?;
    let spec = spec_from(hierarchy)?;
    let metadata = match &paths.metadata {
        Some(m) => {
            require_file(m, "metadata")?;
            Some(m.clone())
        }
        None => Some(data.with_file_name("metadata.csv")).filter(|p| p.is_file()),
    };
    let panel = load_panel(data, metadata.as_deref())?;
    let h = panel.hierarchy(&spec)?;
    Ok((panel, h))
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let panel = generate(&cfg.synth)?;
    panel.write_long_csv(BufWriter::new(File::create(out.join("panel.csv"))?))?;
    panel.write_metadata_csv(BufWriter::new(File::create(out.join("metadata.csv"))?))?;
    let spec = serde_json::to_string_pretty(&synth_hierarchy_spec()).map_err(Error::from)?;
    std::fs::write(out.join("hierarchy.json"), spec)?;
    let zeros = panel.target().values().iter().filter(|&&v| v == 0.0).count();
    println!(
        "wrote {} series x {} days ({:.1}% zeros) to {}",
        panel.n_series(),
        panel.n_days(),
        100.0 * zeros as f64 / panel.target().values().len() as f64,
        out.display()
    );
    Ok(())
}

fn cmd_build_hierarchy(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let (_, h) = load_inputs(&cfg.paths)?;
    std::fs::write(out.join("summing_matrix.mtx"), h.s().to_matrix_market())?;
    let mut w = csv::Writer::from_path(out.join("rows.csv")).map_err(Error::from)?;
    w.write_record(["row", "level", "label"]).map_err(Error::from)?;
    for level in h.levels() {
        for row in level.rows.clone() {
            w.write_record([row.to_string(), level.name.clone(), h.row_labels()[row].clone()])
                .map_err(Error::from)?;
        }
    }
    w.flush()?;
    println!("{:<24} {:>8}", "level", "series");
    for level in h.levels() {
        println!("{:<24} {:>8}", level.name, level.rows.len());
    }
    println!(
        "n = {}, n_b = {}, nnz = {}, sparsity = {:.5}",
        h.n(),
        h.n_b(),
        h.s().nnz(),
        h.s().sparsity()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelEntry {
    file: String,
    rows: Vec<usize>,
}

/// Index of what `train` wrote, read back by `forecast`.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: ScenarioConfig,
    origin: usize,
    seed: u64,
    models: Vec<ModelEntry>,
    best_iterations: Vec<usize>,
    reconciler: Option<String>,
}

fn model_file_name(trained: &TrainedScenario, h: &Hierarchy, i: usize) -> String {
    if trained.boosters.len() == 1 {
        return "model.json".into();
    }
    let level = trained.model_rows[i]
        .first()
        .and_then(|&r| h.level_of_row(r))
        .map_or_else(|| i.to_string(), |l| l.name.replace(['/', ' '], "_"));
    format!("model_{i:02}_{level}.json")
}

fn cmd_train(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let (panel, h) = load_inputs(&cfg.paths)?;
    cfg.scenario.validate()?;
    let origin = match cfg.origin {
        Some(o) => o,
        None => test_origin(&panel, cfg.scenario.horizon)?,
    };
    let seed = cfg.seed();
    let trained = train_scenario(&panel, &h, &cfg.scenario, origin, seed)?;
    let models_dir = out.join("models");
    std::fs::create_dir_all(&models_dir)?;
    let mut models = Vec::new();
    for (i, booster) in trained.boosters.iter().enumerate() {
        let file = model_file_name(&trained, &h, i);
        booster.save(models_dir.join(&file))?;
        models.push(ModelEntry {
            file: format!("models/{file}"),
            rows: trained.model_rows[i].clone(),
        });
    }
    let reconciler = match &trained.reconciler {
        Some(r) => {
            r.save(out.join("reconciler.json"))?;
            Some("reconciler.json".to_string())
        }
        None => None,
    };
    let mut log = csv::Writer::from_path(out.join("training_log.csv")).map_err(Error::from)?;
    log.write_record(["model", "window", "iteration", "train_loss", "valid_metric"])
        .map_err(Error::from)?;
    for fit_log in &trained.logs {
        for it in &fit_log.history {
            log.write_record([
                fit_log.model.to_string(),
                fit_log.window.map_or_else(|| "final".into(), |w| w.to_string()),
                it.iteration.to_string(),
                it.train_loss.to_string(),
                it.valid_metric.map_or_else(String::new, |v| v.to_string()),
            ])
            .map_err(Error::from)?;
        }
    }
    log.flush()?;
    if !trained.trials.is_empty() {
        write_trials_csv(&out.join("search_trials.csv"), &trained.trials)?;
    }
    let manifest = Manifest {
        config: cfg.scenario.clone(),
        origin,
        seed,
        models,
        best_iterations: trained.best_iterations.clone(),
        reconciler,
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(Error::from)?,
    )?;
    println!(
        "trained {} model(s) for {} from day {origin}; written to {}",
        trained.boosters.len(),
        cfg.scenario.label(),
        out.display()
    );
    Ok(())
}

fn write_trials_csv(path: &Path, trials: &[Trial]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    w.write_record([
        "model",
        "trial",
        "score",
        "best_iterations",
        "num_leaves",
        "min_child_samples",
        "lambda_l1",
        "lambda_l2",
        "feature_fraction",
        "bagging_fraction",
        "bagging_freq",
        "hier_freq",
    ])
    .map_err(Error::from)?;
    for t in trials {
        let c = &t.train;
        let iters: Vec<String> = t.best_iterations.iter().map(|i| i.to_string()).collect();
        w.write_record([
            t.model.to_string(),
            t.trial.to_string(),
            t.score.to_string(),
            iters.join(" "),
            c.num_leaves.to_string(),
            c.min_child_samples.to_string(),
            c.lambda_l1.to_string(),
            c.lambda_l2.to_string(),
            c.feature_fraction.to_string(),
            c.bagging_fraction.to_string(),
            c.bagging_freq.to_string(),
            t.hier_freq.map_or_else(String::new, |f| f.to_string()),
        ])
        .map_err(Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn load_trained(dir: &Path) -> CliResult<TrainedScenario> {
    let path = dir.join("manifest.json");
    require_file(&path, "model manifest")?;
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&path)?).map_err(Error::from)?;
    let boosters = manifest
        .models
        .iter()
        .map(|m| Booster::load(dir.join(&m.file)))
        .collect::<crate::Result<Vec<_>>>()?;
    let reconciler = manifest
        .reconciler
        .as_ref()
        .map(|f| Reconciler::load(dir.join(f)))
        .transpose()?;
    Ok(TrainedScenario {
        config: manifest.config,
        origin: manifest.origin,
        model_rows: manifest.models.into_iter().map(|m| m.rows).collect(),
        boosters,
        reconciler,
        best_iterations: manifest.best_iterations,
        logs: Vec::new(),
        trials: Vec::new(),
    })
}

pub const FORECAST_CSV_HEADER: [&str; 3] = ["series_id", "step", "value"];

fn write_forecast_csv(path: &Path, labels: &[&str], values: &DenseMatrix) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    w.write_record(FORECAST_CSV_HEADER).map_err(Error::from)?;
    for (i, label) in labels.iter().enumerate() {
        for (k, v) in values.row(i).iter().enumerate() {
            w.write_record([label.to_string(), (k + 1).to_string(), v.to_string()])
                .map_err(Error::from)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a forecast CSV into hierarchy row order. Returns the matrix over
/// either all `n` rows or the `n_b` bottom rows, whichever the file covers.
fn read_forecast_csv(path: &Path, h: &Hierarchy) -> CliResult<DenseMatrix> {
    require_file(path, "forecast")?;
    let mut rdr = csv::Reader::from_path(path).map_err(Error::from)?;
    let headers = rdr.headers().map_err(Error::from)?.clone();
    let col = |name: &str| {
        headers.iter().position(|c| c == name).ok_or_else(|| {
            Error::Data(format!(
                "{}: missing column `{name}` (expected {})",
                path.display(),
                FORECAST_CSV_HEADER.join(",")
            ))
        })
    };
    let (c_id, c_step, c_value) = (col("series_id")?, col("step")?, col("value")?);
    let index: HashMap<&str, usize> = h.row_labels().iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let bad = |what: &str| Error::Data(format!("{} row {}: {what}", path.display(), line + 2));
        let row = *index
            .get(&rec[c_id])
            .ok_or_else(|| bad(&format!("unknown series `{}` in column `series_id`", &rec[c_id])))?;
        let step: usize = rec[c_step].parse().map_err(|_| bad("column `step` is not a positive integer"))?;
        let value: f64 = rec[c_value].parse().map_err(|_| bad("column `value` is not a number"))?;
        if step == 0 {
            return Err(bad("column `step` starts at 1").into());
        }
        cells.push((row, step - 1, value));
    }
    let horizon = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    let rows: std::collections::BTreeSet<usize> = cells.iter().map(|c| c.0).collect();
    let (first, n_rows) = if rows.len() == h.n() {
        (0, h.n())
    } else if rows.len() == h.n_b() && rows.iter().all(|&r| r >= h.n_a()) {
        (h.n_a(), h.n_b())
    } else {
        return Err(Error::Data(format!(
            "{} covers {} series; expected all {} hierarchy series or the {} bottom series",
            path.display(),
            rows.len(),
            h.n(),
            h.n_b()
        ))
        .into());
    };
    let mut m = DenseMatrix::filled(n_rows, horizon, f64::NAN);
    for (r, k, v) in cells {
        m.set(r - first, k, v);
    }
    if m.values().iter().any(|v| v.is_nan()) {
        return Err(Error::Data(format!("{} lacks some (series_id, step) pairs", path.display())).into());
    }
    Ok(m)
}

fn cmd_forecast(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let (panel, h) = load_inputs(&cfg.paths)?;
    let dir = cfg.model_dir.clone().unwrap_or_else(|| out.to_path_buf());
    let trained = load_trained(&dir)?;
    let origin = cfg.origin.unwrap_or(trained.origin);
    let base = forecast_base(&trained, &panel, &h, origin)?;
    let labels: Vec<&str> = trained.base_rows().iter().map(|&r| h.row_labels()[r].as_str()).collect();
    write_forecast_csv(&out.join("forecast.csv"), &labels, &base)?;
    println!(
        "forecast {} series x {} steps from day {origin} to {}",
        labels.len(),
        base.n_cols(),
        out.join("forecast.csv").display()
    );
    Ok(())
}

fn cmd_reconcile(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let (_, h) = load_inputs(&cfg.paths)?;
    let path = cfg
        .forecasts
        .first()
        .ok_or_else(|| CliError::Usage("--forecasts is required".into()))?;
    let base = read_forecast_csv(path, &h)?;
    let reconciler = match (&cfg.reconciler, cfg.method) {
        (Some(p), _) => {
            require_file(p, "reconciler")?;
            Reconciler::load(p)?
        }
        (None, Some(m)) if !m.needs_residuals() && m != Method::Erm => fit_reconciler(m, &h, None)?,
        (None, Some(m)) => {
            return Err(CliError::Usage(format!(
                "{m} needs in-sample residuals; pass the --reconciler written by `train`"
            )))
        }
        (None, None) => return Err(CliError::Usage("pass --reconciler or --method".into())),
    };
    if reconciler.n() != h.n() {
        return Err(Error::shape(format!("reconciler over {} series", h.n()), format!("{}", reconciler.n())).into());
    }
    let full = if base.n_rows() == h.n() {
        base
    } else {
        // bottom rows only: aggregates are unknown and ignored by bottom-up
        if reconciler.method() != Method::BottomUp {
            return Err(Error::Data(format!(
                "{} reconciliation needs forecasts for all {} series",
                reconciler.method(),
                h.n()
            ))
            .into());
        }
        let mut full = DenseMatrix::zeros(h.n(), base.n_cols());
        for b in 0..h.n_b() {
            full.row_mut(h.n_a() + b).copy_from_slice(base.row(b));
        }
        full
    };
    let reconciled = reconciler.reconcile_panel(&full)?;
    let labels: Vec<&str> = h.row_labels().iter().map(String::as_str).collect();
    write_forecast_csv(&out.join("reconciled.csv"), &labels, &reconciled)?;
    println!(
        "reconciled with {} to {}",
        reconciler.method(),
        out.join("reconciled.csv").display()
    );
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let (panel, h) = load_inputs(&cfg.paths)?;
    if cfg.forecasts.is_empty() {
        return Err(CliError::Usage("--forecasts is required".into()));
    }
    let name = cfg.name.clone().unwrap_or_else(|| "forecast".into());
    let mut runs = Vec::new();
    for path in &cfg.forecasts {
        let f = read_forecast_csv(path, &h)?;
        let horizon = f.n_cols();
        let origin = match cfg.origin {
            Some(o) => o,
            None => test_origin(&panel, horizon)?,
        };
        if origin + horizon > panel.n_days() {
            return Err(Error::Data(format!(
                "{}: steps {origin}..{} go past the data's {} days",
                path.display(),
                origin + horizon,
                panel.n_days()
            ))
            .into());
        }
        let actuals = DenseMatrix::from_fn(panel.n_series(), horizon, |s, k| panel.target().get(s, origin + k));
        runs.push(evaluate(&name, &f, &actuals, &h)?);
    }
    let mut report = EvalReport::combine(&name, &runs)?;
    let relative = match &cfg.baseline {
        Some(p) => {
            require_file(p, "baseline report")?;
            let base = read_reports_csv(File::open(p)?)?;
            let first = base
                .first()
                .ok_or_else(|| Error::Data(format!("{} holds no reports", p.display())))?;
            report.relative_to(first)?;
            true
        }
        None => {
            let own = report.clone();
            report.relative_to(&own)?;
            false
        }
    };
    write_reports_csv(BufWriter::new(File::create(out.join("report.csv"))?), std::slice::from_ref(&report))?;
    println!("RMSE\n{}", format_table(std::slice::from_ref(&report), Measure::Rmse, relative));
    println!("MAE\n{}", format_table(std::slice::from_ref(&report), Measure::Mae, relative));
    Ok(())
}

fn cmd_bench(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let b = &cfg.bench;
    let mut grad_cfg = b.gradient.clone();
    grad_cfg.seed = cfg.seed();
    let timings = gradient_scaling(&grad_cfg)?;
    write_gradient_csv(File::create(out.join("bench_gradient.csv"))?, &timings)?;
    println!("{:>6} {:>8} {:>9} {:>12} {:>12} {:>8}", "n_b", "n", "nnz", "sparse (s)", "dense (s)", "ratio");
    for t in &timings {
        println!(
            "{:>6} {:>8} {:>9} {:>12.6} {:>12.6} {:>8.1}",
            t.n_b,
            t.n,
            t.nnz,
            t.sparse_seconds,
            t.dense_seconds,
            t.speedup()
        );
    }
    if timings.len() >= 2 {
        let (sparse, dense) = gradient_slopes(&timings)?;
        println!("log-log slope: sparse {sparse:.2}, dense {dense:.2}");
    }
    if b.plots {
        plot_gradient_svg(&out.join("bench_gradient.svg"), &timings)?;
    }

    if b.scenarios {
        let panel = generate(&SynthConfig {
            n_series: b.scenario_series,
            n_days: b.scenario_days,
            seed: cfg.seed(),
            ..SynthConfig::default()
        })?;
        let h = panel.hierarchy(&synth_hierarchy_spec())?;
        let with = |scenario, objective, metric, reconciliation| ScenarioConfig {
            scenario,
            objective,
            metric,
            reconciliation,
            ..cfg.scenario.clone()
        };
        let configs = [
            with(Scenario::BottomUp, LossKind::Sl, LossKind::Sl, None),
            with(Scenario::BottomUp, LossKind::Hl, LossKind::Hl, None),
            with(Scenario::SeparateAggregations, LossKind::Sl, LossKind::Sl, Some(Method::MintShrink)),
            with(Scenario::Global, LossKind::Sl, LossKind::Sl, Some(Method::MintShrink)),
        ];
        let st = scenario_timings(&panel, &h, &configs, cfg.seed())?;
        write_scenario_csv(File::create(out.join("bench_scenarios.csv"))?, &st)?;
        println!("\n{:<40} {:>7} {:>10} {:>10}", "run", "models", "train (s)", "predict (s)");
        for t in &st {
            println!("{:<40} {:>7} {:>10.2} {:>10.2}", t.run, t.n_models, t.train_seconds, t.predict_seconds);
        }
    }

    if b.reconcile {
        let panel = generate(&SynthConfig {
            n_series: b.reconcile_series,
            n_days: 60,
            seed: cfg.seed(),
            ..SynthConfig::default()
        })?;
        let h = panel.hierarchy(&synth_hierarchy_spec())?;
        let rt = reconcile_timings(&h, 2 * h.n(), cfg.scenario.horizon, grad_cfg.reps, grad_cfg.warmup, cfg.seed())?;
        write_reconcile_csv(File::create(out.join("bench_reconcile.csv"))?, &rt)?;
        println!("\n{:<14} {:>10} {:>10}", "method", "fit (s)", "apply (s)");
        for t in &rt {
            println!("{:<14} {:>10.4} {:>10.4}", t.method.as_str(), t.fit_seconds, t.apply_seconds);
        }
    }
    Ok(())
}
