//! `mlrbm`: dataset inspection, training, evaluation, sweeps and table
//! reproduction for the multi-label toolkit.
//!
//! Exit codes: 0 success, 1 internal error, 2 input or usage error,
//! 3 validation or dimension error.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use mlrbm::bundle::{load_bundle, save_bundle};
use mlrbm::data::{load_dataset, DataFormat, Dataset};
use mlrbm::eval::{
    reproduce, reproduce_csv, run_experiment, sweep_hidden_units, tune, ExperimentConfig, GridSpec,
    ReproduceOptions, RowStatus, TableId, ACCURACY_CONVENTION,
};
use mlrbm::metrics::MetricSet;
use mlrbm::pipeline::{fit_pipeline, Method, PipelineConfig};
use mlrbm::rng::derive_seed;
use mlrbm::{par, ErrorKind};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "mlrbm",
    version,
    about = "RBM features and problem transformations for multi-label data"
)]
struct Cli {
    /// More log output on stderr (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only warnings and errors on stderr.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print N, L, d and label cardinality.
    Inspect(DataArgs),
    /// Fit one method on a whole dataset and write a model bundle.
    Train(TrainArgs),
    /// Score a model bundle on a dataset.
    Eval(EvalArgs),
    /// Run the split/tune/fit/score protocol for one or more methods.
    Run(RunArgs),
    /// Accuracy against the number of hidden units.
    Sweep(SweepArgs),
    /// Re-run a published accuracy table on the datasets in a directory.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Defaults to the file extension.
    #[arg(long)]
    format: Option<DataFormat>,
    /// Label count. ARFF: as the relation's `-C` (negative means labels
    /// last); CSV: required, negative means labels last.
    #[arg(long, allow_hyphen_values = true)]
    labels: Option<i64>,
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<Dataset> {
        load_dataset(&self.dataset, self.format, self.labels)
            .with_context(|| format!("loading {}", self.dataset.display()))
    }
}

#[derive(Debug, Args)]
struct HyperArgs {
    /// Hidden units of the single RBM.
    #[arg(long)]
    hidden: Option<usize>,
    /// CD learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// CD momentum.
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    rbm_epochs: Option<usize>,
    /// Fine-tuning epochs for network heads.
    #[arg(long)]
    bp_epochs: Option<usize>,
    /// Gradient-descent epochs of each base learner.
    #[arg(long)]
    base_epochs: Option<usize>,
    /// ECC ensemble size.
    #[arg(long)]
    chains: Option<usize>,
    /// Decision threshold in (0,1).
    #[arg(long)]
    threshold: Option<f64>,
}

impl HyperArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = self.hidden {
            cfg.rbm.n_hidden = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.rbm.learning_rate = v;
        }
        if let Some(v) = self.momentum {
            cfg.rbm.momentum = v;
        }
        if let Some(v) = self.rbm_epochs {
            cfg.rbm.epochs = v;
        }
        if let Some(v) = self.bp_epochs {
            cfg.bp.epochs = v;
        }
        if let Some(v) = self.base_epochs {
            cfg.mlc.base.linear.epochs = v;
        }
        if let Some(v) = self.chains {
            cfg.mlc.n_chains = v;
        }
        if let Some(t) = self.threshold {
            cfg.set_threshold(t);
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Tune on the training data first: DEFAULT, REDUCED or a JSON/TOML file.
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Bundle directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Directory for `metrics.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment file (JSON or TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    format: Option<DataFormat>,
    #[arg(long, allow_hyphen_values = true)]
    labels: Option<i64>,
    /// Comma-separated or repeated.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory for `report.json` and `report.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// DEFAULT, REDUCED or a JSON/TOML file.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// An RBM-feature method (br_r, cc_r, ecc_r, rak_r, fw_r).
    #[arg(long)]
    method: Method,
    /// Hidden-unit counts, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "30,60,120,240")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Directory for `sweep.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rbm_epochs: Option<usize>,
    #[arg(long)]
    base_epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// 2a, 3, 4 or 5.
    #[arg(long)]
    table: TableId,
    /// Directory holding the benchmark ARFF files.
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Directory for `table_<id>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// REDUCED (default), DEFAULT or a JSON/TOML file.
    #[arg(long, default_value = "REDUCED")]
    grid: String,
    /// Restrict to these benchmarks, comma-separated.
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    /// Subsample each dataset to at most this many instances.
    #[arg(long)]
    max_instances: Option<usize>,
    #[arg(long)]
    rbm_epochs: Option<usize>,
    #[arg(long)]
    bp_epochs: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
}

fn parse_grid(spec: &str) -> anyhow::Result<GridSpec> {
    match spec.to_ascii_uppercase().as_str() {
        "DEFAULT" => Ok(GridSpec::default()),
        "REDUCED" => Ok(GridSpec::reduced()),
        _ => Ok(GridSpec::from_path(spec)?),
    }
}

fn write_out(dir: &Path, name: &str, body: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| mlrbm::Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| mlrbm::Error::io(&path, e))?;
    Ok(path)
}

fn cmd_inspect(args: &DataArgs) -> anyhow::Result<()> {
    let ds = args.load()?;
    println!("{}", ds.stats());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    let ds = args.data.load()?;
    let mut cfg = PipelineConfig::new(args.method);
    args.hyper.apply(&mut cfg);
    let grid = args.grid.as_deref().map(parse_grid).transpose()?;
    let pipeline = par::with_jobs(args.jobs, || -> mlrbm::Result<_> {
        if let Some(grid) = &grid {
            if let Some(g) = tune(&ds, &cfg, grid, derive_seed(args.seed, "grid", 0))? {
                g.chosen.apply(&mut cfg);
            }
        }
        Ok(fit_pipeline(&ds, &cfg, derive_seed(args.seed, args.method.name(), 0))?.0)
    })??;
    let manifest = save_bundle(&pipeline, &args.out)?;
    println!(
        "method={} n_features={} n_labels={} members={} out={}",
        manifest.method,
        manifest.n_features,
        manifest.n_labels,
        manifest.members.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let model = load_bundle(&args.model)
        .with_context(|| format!("loading bundle {}", args.model.display()))?;
    let ds = args.data.load()?;
    let pred = model.predict_batch(ds.features())?;
    let metrics = MetricSet::compute(ds.labels(), pred.view())?;
    let report = json!({
        "dataset": ds.name(),
        "method": model.method,
        "n_instances": ds.n_instances(),
        "accuracy_convention": ACCURACY_CONVENTION,
        "metrics": metrics,
    });
    let body = serde_json::to_string_pretty(&report)? + "\n";
    println!("{metrics}");
    print!("{body}");
    if let Some(dir) = &args.out {
        write_out(dir, "metrics.json", &body)?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let mut cfg = match (&args.config, &args.dataset) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(ds)) => ExperimentConfig::new(ds, Vec::new()),
        (None, None) => {
            return Err(mlrbm::Error::Argument("run needs --config or --dataset".into()).into());
        }
    };
    if let (Some(_), Some(ds)) = (&args.config, &args.dataset) {
        cfg.dataset = ds.clone();
    }
    if args.format.is_some() {
        cfg.format = args.format;
    }
    if args.labels.is_some() {
        cfg.label_count = args.labels;
    }
    if !args.method.is_empty() {
        cfg.methods = args.method.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    if args.out.is_some() {
        cfg.out_dir = args.out.clone();
    }
    if let Some(g) = &args.grid {
        cfg.grid = Some(parse_grid(g)?);
    }
    if args.threshold.is_some() {
        cfg.threshold = args.threshold;
    }
    let report = run_experiment(&cfg)?;
    print!("{}", report.to_csv()?);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let ds = args.data.load()?;
    let mut cfg = PipelineConfig::new(args.method);
    if let Some(e) = args.rbm_epochs {
        cfg.rbm.epochs = e;
    }
    if let Some(e) = args.base_epochs {
        cfg.mlc.base.linear.epochs = e;
    }
    let table = par::with_jobs(args.jobs, || {
        sweep_hidden_units(&ds, &cfg, &args.hidden, args.seed)
    })??;
    let csv = table.to_csv();
    print!("{csv}");
    if let Some(dir) = &args.out {
        write_out(dir, "sweep.csv", &csv)?;
    }
    Ok(())
}

fn cmd_reproduce(args: &ReproduceArgs) -> anyhow::Result<()> {
    let mut opts = ReproduceOptions {
        seed: args.seed,
        grid: parse_grid(&args.grid)?,
        max_instances: args.max_instances,
        datasets: (!args.datasets.is_empty()).then(|| args.datasets.clone()),
        ..ReproduceOptions::default()
    };
    if let Some(v) = args.rbm_epochs {
        opts.rbm_epochs = v;
    }
    if let Some(v) = args.bp_epochs {
        opts.bp_epochs = v;
    }
    if let Some(v) = args.chains {
        opts.n_chains = v;
    }
    if let Some(v) = args.threshold {
        opts.threshold = v;
    }
    let rows = par::with_jobs(args.jobs, || reproduce(args.table, &args.data_dir, &opts))??;
    let csv = reproduce_csv(&rows)?;
    print!("{csv}");
    if let Some(dir) = &args.out {
        write_out(dir, &format!("table_{}.csv", args.table), &csv)?;
    }
    let count = |s| rows.iter().filter(|r| r.status == s).count();
    log::info!(
        "reproduce table={} ok={} skipped={} failed={}",
        args.table,
        count(RowStatus::Ok),
        count(RowStatus::Skipped),
        count(RowStatus::Failed)
    );
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<mlrbm::Error>())
        .map(mlrbm::Error::kind);
    match kind {
        Some(ErrorKind::Input) => 2,
        Some(ErrorKind::Validation) => 3,
        Some(ErrorKind::Internal) => 1,
        None if err
            .chain()
            .any(|e| e.is::<serde_json::Error>() || e.is::<std::io::Error>()) =>
        {
            2
        }
        None => 1,
    }
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("MLRBM_LOG")
        .format(|buf, record| {
            writeln!(
                buf,
                "level={} target={} {}",
                record.level().as_str().to_ascii_lowercase(),
                record.target(),
                record.args()
            )
        })
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli);
    let result = match &cli.command {
        Command::Inspect(a) => cmd_inspect(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
