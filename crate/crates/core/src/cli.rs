//! Command-line layer: argument parsing, CSV ingestion, the persistent state
//! file and plot-data export.
//!
//! Exit codes: 0 success, 1 I/O or numerical failure, 2 malformed input
//! (schema, CSV, configuration), 3 IRLS non-convergence, 4 penalty selection
//! failure. A failed command never modifies the state file.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::logistic::sigmoid;
use crate::model::{align_batch, Batch, CoefficientVector, CovariateRegistry, EstimatorState, Family};
use crate::sim::{run_study_mixed_vs_updated, run_study_regular_vs_updated, ScenarioConfig, StudyKind, TrajectoryResult};
use crate::tuning::{log_grid, select_and_update, select_penalty, default_target_spec, FoldCount, PenaltySearchConfig, SelectionReport};

pub const STATE_SCHEMA: &str = "ridge-relay-state/1";

/// Set to `abort-before-rename` to kill the process after the new state is
/// written to its temporary file but before it replaces the old one.
pub const FAULT_ENV: &str = "RIDGE_RELAY_FAULT";

pub const THREADS_ENV: &str = "RIDGE_RELAY_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ridge-relay", version, about = "Sequential targeted ridge regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a fresh state file.
    Init(InitArgs),
    /// Select the penalty for a new batch and advance the state.
    Update(UpdateArgs),
    /// Penalty selection on a new batch without committing it.
    SelectLambda(UpdateArgs),
    /// Predictions for the rows of a CSV file.
    Predict(PredictArgs),
    /// Run a simulation study and write plot data.
    Simulate(SimulateArgs),
    /// Coefficient table of a state file.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long, conflicts_with = "loocv")]
    pub k_folds: Option<usize>,
    /// Leave-one-out cross-validation.
    #[arg(long)]
    pub loocv: bool,
    #[arg(long, conflicts_with = "unconstrained")]
    pub constrained: bool,
    #[arg(long)]
    pub unconstrained: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 1e6)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 50)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SearchArgs {
    pub fn to_config(&self, default_folds: FoldCount) -> Result<PenaltySearchConfig> {
        if !(self.grid_min > 0.0) || !(self.grid_max >= self.grid_min) || self.grid_points == 0 {
            return Err(Error::Config("grid needs 0 < grid-min <= grid-max and grid-points >= 1".into()));
        }
        let folds = match (self.k_folds, self.loocv) {
            (Some(k), _) => FoldCount::K(k),
            (None, true) => FoldCount::LeaveOneOut,
            (None, false) => default_folds,
        };
        let config = PenaltySearchConfig {
            grid: log_grid(self.grid_min, self.grid_max, self.grid_points),
            folds,
            constrained: !self.unconstrained,
            seed: self.seed,
            ..PenaltySearchConfig::default()
        };
        config.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["covariates", "target", "data"])))]
pub struct InitArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long, default_value = "linear")]
    pub family: Family,
    /// Zero target over these names.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// JSON object mapping covariate names to target values.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Batch sacrificed to a cross-validated plain ridge fit that becomes
    /// the initial target.
    #[arg(long, requires = "response")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Write the selection report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Column to ignore if present.
    #[arg(long)]
    pub response: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    /// Covariate by time CSV table.
    Table,
    /// History records with selection diagnostics as JSON.
    History,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long, value_enum, default_value_t = ExportFormat::Table)]
    pub format: ExportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Validation(_)
        | Error::UnknownCovariate(_)
        | Error::Config(_)
        | Error::Csv(_)
        | Error::State(_)
        | Error::Json(_) => 2,
        Error::Convergence { .. } => 3,
        Error::Selection(_) => 4,
        Error::Singular(_) | Error::Estimation(_) | Error::Io(_) => 1,
    }
}

/// Sizes the global thread pool from `RIDGE_RELAY_THREADS`, if set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Init(a) => cmd_init(&a),
        Command::Update(a) => cmd_update(&a, true, stdout),
        Command::SelectLambda(a) => cmd_update(&a, false, stdout),
        Command::Predict(a) => cmd_predict(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a).map(|files| {
            for f in files {
                let _ = writeln!(stdout, "{}", f.display());
            }
        }),
        Command::Export(a) => cmd_export(&a, stdout),
    }
}

// ---------------------------------------------------------------- CSV

/// Header names and numeric rows of a CSV file.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().any(String::is_empty) {
        return Err(Error::Csv("header row with non-empty names required".into()));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let row = record
            .iter()
            .zip(&headers)
            .map(|(cell, name)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Csv(format!("row {}, column `{name}`: `{cell}` is not a number", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv(format!("{}: no data rows", path.display())));
    }
    Ok((headers, rows))
}

/// Reads a batch; every column but `response` is a covariate.
pub fn read_batch_csv(path: &Path, response: &str, family: Family, t: u64) -> Result<Batch> {
    let (headers, rows) = read_numeric_csv(path)?;
    let r = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::Csv(format!("response column `{response}` not found")))?;
    let names: Vec<String> = headers.iter().enumerate().filter(|&(j, _)| j != r).map(|(_, h)| h.clone()).collect();
    let p = names.len();
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][if j < r { j } else { j + 1 }]);
    let y = DVector::from_fn(rows.len(), |i, _| rows[i][r]);
    Batch::new(t, x, y, names, family)
}

// ---------------------------------------------------------------- state file

#[derive(Serialize, Deserialize)]
struct StateDocument {
    schema: String,
    state: EstimatorState,
}

pub fn state_to_json(state: &EstimatorState) -> Result<String> {
    let doc = StateDocument {
        schema: STATE_SCHEMA.to_owned(),
        state: state.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn state_from_json(text: &str) -> Result<EstimatorState> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::State(e.to_string()))?;
    match doc.get("schema").and_then(Value::as_str) {
        Some(STATE_SCHEMA) => {}
        Some(other) => return Err(Error::State(format!("unsupported schema `{other}`"))),
        None => return Err(Error::State("missing schema field".into())),
    }
    let doc: StateDocument = serde_json::from_value(doc).map_err(|e| Error::State(e.to_string()))?;
    doc.state.validate().map_err(|e| Error::State(e.to_string()))?;
    Ok(doc.state)
}

pub fn read_state(path: &Path) -> Result<EstimatorState> {
    let text = fs::read_to_string(path).map_err(|e| Error::State(format!("{}: {e}", path.display())))?;
    state_from_json(&text)
}

/// Writes `contents` next to `path`, syncs, then renames over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Config("state path has no file name".into()))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        if std::env::var(FAULT_ENV).as_deref() == Ok("abort-before-rename") {
            std::process::abort();
        }
        fs::rename(&tmp, path)?;
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn write_state(path: &Path, state: &EstimatorState) -> Result<()> {
    write_atomic(path, state_to_json(state)?.as_bytes())
}

/// Advisory lock on `<state>.lock`, held until dropped.
pub struct StateLock {
    _file: File,
}

impl StateLock {
    pub fn acquire(state_path: &Path) -> Result<Self> {
        let mut lock_path = state_path.as_os_str().to_owned();
        lock_path.push(".lock");
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(&lock_path)?;
        match file.try_lock() {
            Ok(()) => Ok(Self { _file: file }),
            Err(TryLockError::WouldBlock) => Err(Error::Io(io::Error::new(
                io::ErrorKind::WouldBlock,
                format!("{} is locked by another process", state_path.display()),
            ))),
            Err(TryLockError::Error(e)) => Err(Error::Io(e)),
        }
    }
}

// ---------------------------------------------------------------- commands

pub fn cmd_init(args: &InitArgs) -> Result<()> {
    if args.state.exists() && !args.force {
        return Err(Error::Config(format!("{} exists; pass --force to overwrite", args.state.display())));
    }
    let _lock = StateLock::acquire(&args.state)?;
    let state = if let Some(names) = &args.covariates {
        let registry = CovariateRegistry::new(names.iter().cloned())?;
        EstimatorState::new(args.family, registry, CoefficientVector::zeros(names), "zero target")?
    } else if let Some(path) = &args.target {
        let text = fs::read_to_string(path)?;
        let target: CoefficientVector =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("target file: {e}")))?;
        if target.is_empty() {
            return Err(Error::Config("target file names no covariates".into()));
        }
        let registry = CovariateRegistry::new(target.names())?;
        EstimatorState::new(args.family, registry, target, format!("target file {}", path.display()))?
    } else {
        let path = args.data.as_ref().expect("clap enforces one init source");
        let response = args.response.as_deref().expect("clap enforces --response with --data");
        let batch = read_batch_csv(path, response, args.family, 1)?;
        let search = args.search.to_config(FoldCount::LeaveOneOut)?;
        let target = fit_first_batch(&batch, &search)?;
        let registry = CovariateRegistry::new(batch.covariates().iter().cloned())?;
        EstimatorState::new(args.family, registry, target, format!("ridge on {}", path.display()))?
    };
    write_state(&args.state, &state)
}

/// Cross-validated zero-target ridge fit of a single batch.
pub fn fit_first_batch(batch: &Batch, search: &PenaltySearchConfig) -> Result<CoefficientVector> {
    let fresh = EstimatorState::zero_init(batch.family(), batch.covariates())?;
    let (next, _) = select_and_update(&fresh, batch, search, None)?;
    Ok(next.current)
}

#[derive(Serialize)]
struct UpdateOutput<'a> {
    t: u64,
    committed: bool,
    chosen_lambda: f64,
    estimate: &'a CoefficientVector,
    report: &'a SelectionReport,
}

pub fn cmd_update(args: &UpdateArgs, commit: bool, stdout: &mut dyn Write) -> Result<()> {
    let _lock = StateLock::acquire(&args.state)?;
    let state = read_state(&args.state)?;
    let batch = read_batch_csv(&args.data, &args.response, state.family, state.t + 1)?;
    let search = args.search.to_config(FoldCount::K(5))?;
    let (estimate, report) = if commit {
        let (next, report) = select_and_update(&state, &batch, &search, None)?;
        write_state(&args.state, &next)?;
        (next.current, report)
    } else {
        let targets = default_target_spec(&state, &batch)?;
        let report = select_penalty(&state, &batch, &search, &targets)?;
        let target = targets.targets[0].clone();
        (target, report)
    };
    let out = UpdateOutput {
        t: batch.t(),
        committed: commit,
        chosen_lambda: report.chosen_lambda,
        estimate: &estimate,
        report: &report,
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// Linear predictor or probability per row; covariates absent from the file
/// count as zero.
pub fn predict(state: &EstimatorState, names: &[String], rows: &DMatrix<f64>) -> Result<DVector<f64>> {
    let y = DVector::zeros(rows.nrows());
    let batch = Batch::new(1, rows.clone(), y, names.to_vec(), Family::Linear)?;
    let x = align_batch(&batch, &state.registry)?;
    let eta = x * state.current.to_dense_strict(&state.registry)?;
    Ok(match state.family {
        Family::Linear => eta,
        Family::Logistic => eta.map(sigmoid),
    })
}

pub fn cmd_predict(args: &PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let state = read_state(&args.state)?;
    let (headers, rows) = read_numeric_csv(&args.data)?;
    let keep: Vec<usize> = (0..headers.len())
        .filter(|&j| Some(headers[j].as_str()) != args.response.as_deref())
        .collect();
    let names: Vec<String> = keep.iter().map(|&j| headers[j].clone()).collect();
    let x = DMatrix::from_fn(rows.len(), keep.len(), |i, c| rows[i][keep[c]]);
    for v in predict(&state, &names, &x)?.iter() {
        writeln!(stdout, "{v}")?;
    }
    Ok(())
}

pub fn cmd_export(args: &ExportArgs, stdout: &mut dyn Write) -> Result<()> {
    let state = read_state(&args.state)?;
    let text = match args.format {
        ExportFormat::Table => coefficient_table(&state)?,
        ExportFormat::History => {
            let mut s = serde_json::to_string_pretty(&state.history)?;
            s.push('\n');
            s
        }
    };
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// CSV with one row per covariate: initial target, each step's estimate and
/// the current value. Cells are empty where a covariate had no value.
pub fn coefficient_table(state: &EstimatorState) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["covariate".to_owned(), "init".to_owned()];
    header.extend(state.history.iter().map(|h| format!("t{}", h.t)));
    header.push("current".to_owned());
    w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    let cell = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for name in state.registry.names() {
        let mut row = vec![name.clone(), cell(state.init_target.get(name))];
        row.extend(state.history.iter().map(|h| cell(h.estimate.get(name))));
        row.push(cell(state.current.get(name)));
        w.write_record(&row).map_err(|e| Error::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

// ---------------------------------------------------------------- plot data

/// Named equal-length numeric columns plus free-form metadata. Missing
/// values are written as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotDataset {
    pub name: String,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
    pub metadata: BTreeMap<String, Value>,
}

impl PlotDataset {
    pub fn new(name: impl Into<String>, columns: Vec<(String, Vec<Option<f64>>)>, metadata: BTreeMap<String, Value>) -> Result<Self> {
        let len = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != len) {
            return Err(Error::Validation("plot columns differ in length".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if !columns.iter().all(|c| seen.insert(c.0.as_str())) {
            return Err(Error::Validation("plot column names must be unique".into()));
        }
        Ok(Self {
            name: name.into(),
            columns,
            metadata,
        })
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.0.as_str()))
            .map_err(|e| Error::Csv(e.to_string()))?;
        for i in 0..self.rows() {
            w.write_record(self.columns.iter().map(|c| c.1[i].map_or_else(String::new, |v| v.to_string())))
                .map_err(|e| Error::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<name>.csv` and `<name>.meta.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        let meta_path = dir.join(format!("{}.meta.json", self.name));
        write_atomic(&csv_path, self.to_csv()?.as_bytes())?;
        let mut meta = serde_json::to_string_pretty(&self.metadata)?;
        meta.push('\n');
        write_atomic(&meta_path, meta.as_bytes())?;
        Ok(vec![csv_path, meta_path])
    }
}

fn median_tuning(tr: &TrajectoryResult) -> Vec<Option<f64>> {
    (0..tr.summary.len())
        .map(|i| {
            let v: Vec<f64> = tr.replicates.iter().filter_map(|r| r[i].as_ref().map(|s| s.tuning)).collect();
            (!v.is_empty()).then(|| crate::sim::quantile(&v, 0.5))
        })
        .collect()
}

fn base_metadata(config: &ScenarioConfig) -> Result<BTreeMap<String, Value>> {
    let mut m = BTreeMap::new();
    m.insert("scenario".into(), serde_json::to_value(config)?);
    m.insert("seed".into(), json!(config.seed));
    Ok(m)
}

/// Long-format quantile trajectory: one row per `(t, coordinate)`.
pub fn quantile_dataset(tr: &TrajectoryResult, config: &ScenarioConfig) -> Result<PlotDataset> {
    let mut cols: [Vec<Option<f64>>; 6] = Default::default();
    for s in &tr.summary {
        for (c, &j) in tr.tracked.iter().enumerate() {
            let q = |v: &Vec<f64>| v.get(c).copied();
            let vals = [Some(s.t as f64), Some(j as f64), q(&s.q05), q(&s.q50), q(&s.q95), Some(tr.truth[c])];
            for (col, v) in cols.iter_mut().zip(vals) {
                col.push(v);
            }
        }
    }
    let names = ["t", "coordinate", "q05", "q50", "q95", "truth"];
    let mut meta = base_metadata(config)?;
    meta.insert("estimator".into(), json!(tr.label));
    meta.insert("median_lambda".into(), json!(median_tuning(tr)));
    PlotDataset::new(tr.label.clone(), names.iter().map(|n| n.to_string()).zip(cols).collect(), meta)
}

/// Mean quadratic loss per `t`, one column per estimator.
pub fn mse_dataset(series: &[&TrajectoryResult], config: &ScenarioConfig) -> Result<PlotDataset> {
    let t: Vec<Option<f64>> = (1..=config.n_batches).map(|t| Some(t as f64)).collect();
    let mut columns = vec![("t".to_owned(), t)];
    let mut meta = base_metadata(config)?;
    for tr in series {
        columns.push((tr.label.clone(), tr.summary.iter().map(|s| s.mean_loss).collect()));
        meta.insert(format!("median_tuning_{}", tr.label), json!(median_tuning(tr)));
    }
    PlotDataset::new("mse", columns, meta)
}

/// Datasets for a scenario: `regular` and `updated` quantile trajectories,
/// or the `mse` curves of the mixed-model comparison.
pub fn simulate_datasets(config: &ScenarioConfig) -> Result<Vec<PlotDataset>> {
    match config.study {
        StudyKind::RegularVsUpdated => {
            let (regular, updated) = run_study_regular_vs_updated(config)?;
            Ok(vec![quantile_dataset(&regular, config)?, quantile_dataset(&updated, config)?])
        }
        StudyKind::MixedVsUpdated => {
            let (mixed, zero, truth) = run_study_mixed_vs_updated(config)?;
            Ok(vec![mse_dataset(&[&mixed, &zero, &truth], config)?])
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    let config: ScenarioConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
    config.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(config)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let mut config = load_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let mut files = Vec::new();
    for ds in simulate_datasets(&config)? {
        files.extend(ds.write(&args.out)?);
    }
    Ok(files)
}
