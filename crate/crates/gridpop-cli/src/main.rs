//! `gridpop` — reproducible pipelines over access traces: generate or
//! import a trace, extract features, train and apply the popularity
//! classifier, fit short-term forecasts, simulate the replication
//! strategy, and evaluate everything against the LRU/LFU baselines.
//!
//! Flags override config-file values which override defaults; a digest of
//! the merged configuration and the master seed are stamped on the first
//! line of every output file. Runs with identical configuration and inputs
//! produce byte-identical outputs.

mod files;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gridpop::config::RunConfig;
use gridpop::evaluate::{
    forecast_correlation, occupancy_cdf, rolling_windows, saved_space_curve, EvaluationReport,
    ForecastModel, PolicyCurve,
};
use gridpop::features::{extract_features, label_examples};
use gridpop::forest::{train, ForestModel, TrainExample};
use gridpop::smoothing::{fit_alpha_grid, forecast_horizon};
use gridpop::strategy::{run_simulation, Policy, SimResult};
use gridpop::trace::{export_trace, generate_synthetic, import_trace, Trace};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

#[derive(Parser)]
#[command(name = "gridpop", version, about = "Dataset popularity prediction and replica placement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic access trace
    Generate(GenerateArgs),
    /// Extract per-dataset features over a feature window
    Features(FeaturesArgs),
    /// Train the random-forest popularity classifier
    Train(TrainArgs),
    /// Predict access probabilities with a saved model
    Predict(PredictArgs),
    /// Fit per-dataset exponential-smoothing forecasts
    Forecast(ForecastArgs),
    /// Run the weekly replication simulation
    Simulate(SimulateArgs),
    /// Compute saved-space curves and forecast correlations
    Evaluate(EvaluateArgs),
    /// Produce the full report: curves, correlations, occupancy CDF
    Report(ReportArgs),
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Features(args) => features(args),
        Command::Train(args) => train_cmd(args),
        Command::Predict(args) => predict(args),
        Command::Forecast(args) => forecast(args),
        Command::Simulate(args) => simulate(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Report(args) => report(args),
    }
}

#[derive(Args)]
struct ConfigOpts {
    /// Key-value config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every randomized component
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigOpts {
    fn load(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct TraceOpts {
    /// Events CSV (dataset_id,week,count)
    #[arg(long)]
    events: PathBuf,
    /// Metadata CSV (dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas)
    #[arg(long)]
    metas: PathBuf,
}

impl TraceOpts {
    fn load(&self) -> Result<Trace> {
        Ok(import_trace(&self.events, &self.metas)?)
    }
}

#[derive(Args)]
struct WindowOpts {
    /// End of the training feature window (default: 3/5 of the horizon)
    #[arg(long)]
    train_end: Option<u32>,
    /// End of the validation feature window (default: 4/5 of the horizon)
    #[arg(long)]
    valid_end: Option<u32>,
    /// Label window length in weeks (default: the rest of the horizon)
    #[arg(long)]
    label_weeks: Option<u32>,
}

impl WindowOpts {
    fn apply(&self, config: &mut RunConfig) {
        if self.train_end.is_some() {
            config.train_end = self.train_end;
        }
        if self.valid_end.is_some() {
            config.valid_end = self.valid_end;
        }
        if self.label_weeks.is_some() {
            config.label_weeks = self.label_weeks;
        }
    }
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn load_model(path: &Path) -> Result<ForestModel> {
    if !path.exists() {
        bail!("model not found: {}", path.display());
    }
    ForestModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

// --- generate ---------------------------------------------------------

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    config: ConfigOpts,
    /// Number of synthetic datasets
    #[arg(long)]
    n_datasets: Option<u32>,
    /// Trace length in weeks
    #[arg(long)]
    horizon_weeks: Option<u32>,
    /// Output directory for events.csv and metas.csv
    #[arg(long)]
    out: PathBuf,
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut config = args.config.load()?;
    if let Some(n) = args.n_datasets {
        config.synth.n_datasets = n;
    }
    if let Some(h) = args.horizon_weeks {
        config.synth.horizon_weeks = h;
    }
    let trace = generate_synthetic(&config.synth, config.seed)?;
    ensure_dir(&args.out)?;
    export_trace(
        &trace,
        &args.out.join("events.csv"),
        &args.out.join("metas.csv"),
        Some(&config.output_stamp()),
    )?;
    println!(
        "generated {} datasets over {} weeks into {}",
        trace.metas().len(),
        trace.horizon_weeks(),
        args.out.display()
    );
    Ok(())
}

// --- features ---------------------------------------------------------

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    trace: TraceOpts,
    /// Feature window end (default: the training window end)
    #[arg(long)]
    window_end: Option<u32>,
    /// Also label each row over the following label window
    #[arg(long)]
    labeled: bool,
    /// Label window start (default: the feature window end)
    #[arg(long)]
    label_start: Option<u32>,
    /// Label window length (default: config label_weeks)
    #[arg(long)]
    label_weeks: Option<u32>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn features(args: FeaturesArgs) -> Result<()> {
    let config = args.config.load()?;
    let trace = args.trace.load()?;
    let horizon = trace.horizon_weeks();
    let (default_train_end, _, default_label_weeks) = config.resolve_windows(horizon);
    let window_end = args.window_end.unwrap_or(default_train_end);
    let fvs = extract_features(&trace, window_end)?;
    let body = if args.labeled || args.label_start.is_some() || args.label_weeks.is_some() {
        let label_start = args.label_start.unwrap_or(window_end);
        let label_weeks = args.label_weeks.unwrap_or(default_label_weeks);
        let labeled = label_examples(fvs, &trace, label_start, label_weeks)?;
        files::labeled_features_csv(&labeled)
    } else {
        files::features_csv(&fvs)
    };
    files::write_stamped(&args.out, &config.output_stamp(), &body)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

// --- train ------------------------------------------------------------

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    trace: TraceOpts,
    #[command(flatten)]
    windows: WindowOpts,
    /// Number of trees
    #[arg(long)]
    n_trees: Option<usize>,
    /// Maximum tree depth (0 = unlimited)
    #[arg(long)]
    max_depth: Option<u32>,
    /// Minimum samples per leaf
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    /// Features considered per split (0 = ceil(sqrt(n_features)))
    #[arg(long)]
    features_per_split: Option<usize>,
    /// Where to write the model file
    #[arg(long)]
    model_out: PathBuf,
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let mut config = args.config.load()?;
    args.windows.apply(&mut config);
    if let Some(n) = args.n_trees {
        config.n_trees = n;
    }
    if let Some(d) = args.max_depth {
        config.max_depth = if d == 0 { None } else { Some(d) };
    }
    if let Some(m) = args.min_samples_leaf {
        config.min_samples_leaf = m;
    }
    if let Some(k) = args.features_per_split {
        config.features_per_split = if k == 0 { None } else { Some(k) };
    }
    let trace = args.trace.load()?;
    let (train_end, _, label_weeks) = config.resolve_windows(trace.horizon_weeks());
    let fvs = extract_features(&trace, train_end)?;
    let labeled = label_examples(fvs, &trace, train_end, label_weeks)?;
    let examples: Vec<TrainExample> = labeled
        .iter()
        .map(|ex| TrainExample { features: ex.features.values().to_vec(), label: ex.label == 1 })
        .collect();
    let model = train(&examples, &config.forest_params(), config.seed)?;
    files::write_stamped(&args.model_out, &config.output_stamp(), &model.to_text())?;
    println!(
        "trained {} trees on {} examples (window 0..{train_end}, labels {train_end}..{}), wrote {}",
        model.params().n_trees,
        examples.len(),
        train_end + label_weeks,
        args.model_out.display()
    );
    Ok(())
}

// --- predict ----------------------------------------------------------

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    config: ConfigOpts,
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Features CSV to score
    #[arg(long)]
    features: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn predict(args: PredictArgs) -> Result<()> {
    let config = args.config.load()?;
    let model = load_model(&args.model)?;
    let fvs = files::read_features_csv(&args.features)?;
    let mut probabilities = BTreeMap::new();
    for fv in &fvs {
        let p = model.predict_proba(&fv.values())?;
        probabilities.insert(fv.dataset_id.clone(), p);
    }
    files::write_stamped(&args.out, &config.output_stamp(), &files::probabilities_csv(&probabilities))?;
    println!("scored {} datasets into {}", probabilities.len(), args.out.display());
    Ok(())
}

// --- forecast ---------------------------------------------------------

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    trace: TraceOpts,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn forecast(args: ForecastArgs) -> Result<()> {
    let config = args.config.load()?;
    let trace = args.trace.load()?;
    let horizon = trace.horizon_weeks();
    let mut rows = Vec::new();
    for meta in trace.metas() {
        let series = trace.series_from_creation(&meta.dataset_id, horizon);
        // Datasets with fewer than two observed weeks fall back to the
        // average model (alpha 0), which is just the value itself or zero.
        let (alpha, next, four) = match series.len() {
            0 => (0.0, 0.0, 0.0),
            1 => (0.0, series[0], 4.0 * series[0]),
            _ => {
                let fit = fit_alpha_grid(&series, config.alpha_grid_step)?;
                (fit.alpha, fit.next_forecast, forecast_horizon(&fit, 4))
            }
        };
        rows.push((meta.dataset_id.clone(), alpha, next, four));
    }
    files::write_stamped(&args.out, &config.output_stamp(), &files::forecast_csv(&rows))?;
    println!("forecast {} datasets into {}", rows.len(), args.out.display());
    Ok(())
}

// --- simulate ---------------------------------------------------------

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    trace: TraceOpts,
    /// Replication policy: metric_m, lru or lfu
    #[arg(long, value_parser = parse_policy)]
    policy: Option<Policy>,
    /// Disk capacity in bytes (default: auto from the trace)
    #[arg(long)]
    capacity_bytes: Option<u64>,
    /// Auto-capacity factor over the initial replica footprint
    #[arg(long)]
    capacity_factor: Option<f64>,
    /// Replica cap per dataset
    #[arg(long)]
    max_replicas: Option<u32>,
    /// Purge datasets below this predicted probability (0 disables)
    #[arg(long)]
    purge_threshold: Option<f64>,
    /// Weeks between purges
    #[arg(long)]
    purge_cadence_weeks: Option<u32>,
    /// First simulated week (default: the validation window end)
    #[arg(long)]
    start_week: Option<u32>,
    /// Trained model for the purge step
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory for actions.csv and state.csv
    #[arg(long)]
    out: PathBuf,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config = args.config.load()?;
    if let Some(p) = args.policy {
        config.policy = p;
    }
    if args.capacity_bytes.is_some() {
        config.capacity_bytes = args.capacity_bytes;
    }
    if let Some(f) = args.capacity_factor {
        config.capacity_factor = f;
    }
    if let Some(m) = args.max_replicas {
        config.max_replicas = m;
    }
    if let Some(t) = args.purge_threshold {
        config.purge_threshold = t;
    }
    if let Some(c) = args.purge_cadence_weeks {
        config.purge_cadence_weeks = c;
    }
    if args.start_week.is_some() {
        config.start_week = args.start_week;
    }
    let trace = args.trace.load()?;
    let model = match &args.model {
        Some(path) => Some(load_model(path)?),
        None => None,
    };
    let result = run_sim(&trace, &config, model.as_ref())?;
    ensure_dir(&args.out)?;
    let stamp = config.output_stamp();
    files::write_stamped(&args.out.join("actions.csv"), &stamp, &files::actions_csv(&result.log))?;
    files::write_stamped(&args.out.join("state.csv"), &stamp, &files::state_csv(&result.final_state))?;
    println!(
        "simulated weeks {}..{} under {}: {} actions, {} restores",
        config.resolve_start_week(trace.horizon_weeks()),
        trace.horizon_weeks(),
        config.policy.name(),
        result.log.len(),
        result.restores
    );
    Ok(())
}

fn run_sim(trace: &Trace, config: &RunConfig, model: Option<&ForestModel>) -> Result<SimResult> {
    let sim_config = config.sim_config(trace);
    Ok(run_simulation(trace, &sim_config, model)?)
}

// --- evaluate ---------------------------------------------------------

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    trace: TraceOpts,
    #[command(flatten)]
    windows: WindowOpts,
    /// Trained model (required for the forest policy)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated removal policies to sweep
    #[arg(long, value_delimiter = ',', default_values_t = default_policies())]
    policies: Vec<String>,
    /// Output directory for curve.csv and correlation.csv
    #[arg(long)]
    out: PathBuf,
}

fn default_policies() -> Vec<String> {
    vec!["forest".to_string(), "lru".to_string(), "lfu".to_string()]
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let mut config = args.config.load()?;
    args.windows.apply(&mut config);
    let trace = args.trace.load()?;
    for policy in &args.policies {
        if !matches!(policy.as_str(), "forest" | "lru" | "lfu") {
            bail!("unknown sweep policy {policy:?}, expected forest, lru or lfu");
        }
    }
    let model = if args.policies.iter().any(|p| p == "forest") {
        let path = args
            .model
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("model not found: --model is required for the forest policy"))?;
        Some(load_model(path)?)
    } else {
        None
    };

    let (curves, correlations, _split) =
        evaluation_curves(&trace, &config, model.as_ref(), &args.policies)?;
    ensure_dir(&args.out)?;
    let stamp = config.output_stamp();
    files::write_stamped(&args.out.join("curve.csv"), &stamp, &files::curve_csv(&curves))?;
    files::write_stamped(
        &args.out.join("correlation.csv"),
        &stamp,
        &files::correlation_csv(&correlations),
    )?;
    println!("wrote curve.csv and correlation.csv to {}", args.out.display());
    Ok(())
}

type CurvesAndCorrelations = (
    Vec<PolicyCurve>,
    Vec<(ForecastModel, f64)>,
    gridpop::evaluate::WindowSplit,
);

/// Shared by `evaluate` and `report`: removal sweeps on the validation
/// window plus walk-forward forecast correlations over it.
fn evaluation_curves(
    trace: &Trace,
    config: &RunConfig,
    model: Option<&ForestModel>,
    policies: &[String],
) -> Result<CurvesAndCorrelations> {
    let horizon = trace.horizon_weeks();
    let (train_end, valid_end, label_weeks) = config.resolve_windows(horizon);
    let split = rolling_windows(trace, train_end, valid_end, label_weeks)?;

    let mut truth = BTreeMap::new();
    let mut sizes = BTreeMap::new();
    for ex in &split.validation {
        let id = ex.features.dataset_id.clone();
        truth.insert(id.clone(), ex.label);
        sizes.insert(id, trace.meta(&ex.features.dataset_id).expect("known dataset").size_bytes);
    }

    let mut curves = Vec::new();
    for policy in policies {
        let scores: BTreeMap<String, f64> = match policy.as_str() {
            "forest" => {
                let model = model.expect("checked by caller");
                let mut scores = BTreeMap::new();
                for ex in &split.validation {
                    let p = model.predict_proba(&ex.features.values())?;
                    scores.insert(ex.features.dataset_id.clone(), p);
                }
                scores
            }
            // Ascending score = removal order: LRU removes the stalest
            // first, LFU the least frequently used first.
            "lru" => split
                .validation
                .iter()
                .map(|ex| (ex.features.dataset_id.clone(), -ex.features.recency))
                .collect(),
            _ => split
                .validation
                .iter()
                .map(|ex| (ex.features.dataset_id.clone(), ex.features.frequency))
                .collect(),
        };
        curves.push(PolicyCurve {
            policy: policy.clone(),
            points: saved_space_curve(&scores, &truth, &sizes)?,
        });
    }

    let mut correlations = Vec::new();
    for model in ForecastModel::ALL {
        let r = forecast_correlation(trace, model, valid_end..horizon)?;
        correlations.push((model, r));
    }
    Ok((curves, correlations, split))
}

// --- report -----------------------------------------------------------

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    config: ConfigOpts,
    #[command(flatten)]
    trace: TraceOpts,
    #[command(flatten)]
    windows: WindowOpts,
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Output directory for report.txt and the three CSVs
    #[arg(long)]
    out: PathBuf,
}

fn report(args: ReportArgs) -> Result<()> {
    let mut config = args.config.load()?;
    args.windows.apply(&mut config);
    let trace = args.trace.load()?;
    let model = load_model(&args.model)?;

    let policies = default_policies();
    let (curves, correlations, split) =
        evaluation_curves(&trace, &config, Some(&model), &policies)?;
    let sim = run_sim(&trace, &config, Some(&model))?;
    let cdf = occupancy_cdf(&sim.final_state)?;

    let report = EvaluationReport {
        curves,
        correlations,
        cdf,
        seed: config.seed,
        train_end: split.train_end,
        valid_end: split.valid_end,
        label_weeks: split.label_weeks,
        config_digest: config.digest(),
        restores: Some(sim.restores),
    };
    ensure_dir(&args.out)?;
    let stamp = config.output_stamp();
    files::write_stamped(&args.out.join("curve.csv"), &stamp, &files::curve_csv(&report.curves))?;
    files::write_stamped(
        &args.out.join("correlation.csv"),
        &stamp,
        &files::correlation_csv(&report.correlations),
    )?;
    files::write_stamped(&args.out.join("cdf.csv"), &stamp, &files::cdf_csv(&report.cdf))?;
    files::write_stamped(&args.out.join("report.txt"), &stamp, &report.render_text())?;
    println!("wrote report.txt to {}", args.out.display());
    Ok(())
}
