use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use wlda::experiment::{explain_command, render_report, run_experiment_on, DEFAULT_RATES, DEFAULT_SEED};
use wlda::{
    fit, load_csv, simulate_mcar, CsvOptions, ExperimentConfig, Method, MissingSpec, ReportFormat, Scenario,
    WeightScope, WldaModel,
};

/// Weighted missing LDA: classification on incomplete data without imputation.
#[derive(Parser)]
#[command(name = "wlda", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Delete cells completely at random and write the masked CSV.
    Simulate(SimulateArgs),
    /// Fit a model and save it as JSON.
    Fit(FitArgs),
    /// Predict class labels with a saved model.
    Predict(PredictArgs),
    /// Run the repeated-split accuracy benchmark.
    Experiment(ExperimentArgs),
    /// Write correlation, boundary and Shapley artifacts.
    Explain(ExperimentArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the class label column.
    #[arg(long)]
    label: Option<String>,
    /// Extra spelling of a missing cell; empty cells are always missing.
    #[arg(long, default_value = "")]
    missing_token: String,
}

impl DataArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            label_column: self.label.clone(),
            missing_token: self.missing_token.clone(),
            na_is_missing: false,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Fraction of eligible cells to delete (a single value).
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    rates: Vec<f64>,
    #[arg(long, env = "WLDA_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "train_only")]
    weight_scope: WeightScope,
    /// Model JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Predictions CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: String,
    #[arg(long, default_value = "")]
    missing_token: String,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RATES)]
    rates: Vec<f64>,
    /// `train_only` or `train_and_test`.
    #[arg(long, default_value = "train_only")]
    scenario: Scenario,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Comma-separated subset of wlda, mean, knn, soft-impute.
    #[arg(long, value_delimiter = ',', default_value = "wlda,mean,knn,soft-impute")]
    methods: Vec<Method>,
    #[arg(long, env = "WLDA_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "train_only")]
    weight_scope: WeightScope,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Neighbours for KNN imputation.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Soft-impute shrinkage; defaults to a tenth of the top singular value.
    #[arg(long)]
    lambda: Option<f64>,
    /// Report file (`experiment`) or artifact directory (`explain`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// markdown, json or csv.
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
}

impl ExperimentArgs {
    fn config(&self) -> ExperimentConfig {
        let mut config = ExperimentConfig::new(&self.data, &self.label);
        config.missing_token = self.missing_token.clone();
        config.rates = self.rates.clone();
        config.scenario = self.scenario;
        config.repeats = self.repeats;
        config.methods = self.methods.clone();
        config.seed = self.seed;
        config.weight_scope = self.weight_scope;
        config.test_fraction = self.test_fraction;
        config.knn_k = self.k;
        config.soft_lambda = self.lambda;
        config
    }
}

/// Invalid flag values, reported with exit code 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let [rate] = args.rates[..] else {
        return Err(config_err("simulate takes exactly one rate"));
    };
    let data = load_csv(&args.data.data, &args.data.options())?;
    let masked = simulate_mcar(&data, &MissingSpec::protocol(rate, args.seed))?;
    let mut buf = Vec::new();
    let label = args.data.label.as_deref().unwrap_or("label");
    masked.write_csv_with_token(&mut buf, label, &args.data.missing_token)?;
    log::info!("deleted {} of {} cells", masked.n_missing(), masked.mask().len());
    emit(args.out.as_deref(), std::str::from_utf8(&buf)?)
}

fn fit_command(args: FitArgs) -> anyhow::Result<()> {
    if args.data.label.is_none() {
        return Err(config_err("fit requires --label"));
    }
    let data = load_csv(&args.data.data, &args.data.options())?;
    let model = fit(&data, args.weight_scope, None)?;
    for w in &model.params().warnings {
        log::warn!("{w:?}");
    }
    emit(
        args.out.as_deref(),
        &(serde_json::to_string_pretty(&model.to_document())? + "\n"),
    )
}

fn predict(args: PredictArgs) -> anyhow::Result<()> {
    let model = WldaModel::load_json(&args.model)?;
    let data = load_csv(&args.data.data, &args.data.options())?;
    if data.feature_names() != model.params().feature_names.as_slice() {
        bail!(
            "features {:?} do not match the model's {:?}",
            data.feature_names(),
            model.params().feature_names
        );
    }
    let predicted = model.predict_dataset(&data)?;
    let names = &model.params().class_names;
    let mut text = String::from("row,predicted\n");
    for (i, &c) in predicted.iter().enumerate() {
        text.push_str(&format!("{i},{}\n", names[c]));
    }
    if let Some(labels) = data.labels() {
        let correct = predicted
            .iter()
            .zip(labels)
            .filter(|(&p, &t)| names[p] == data.class_names()[t])
            .count();
        eprintln!(
            "accuracy: {:.4} ({correct}/{})",
            correct as f64 / labels.len() as f64,
            labels.len()
        );
    }
    emit(args.out.as_deref(), &text)
}

fn experiment(args: ExperimentArgs) -> anyhow::Result<()> {
    let config = args.config();
    config.validate().map_err(|e| config_err(e.to_string()))?;
    let data = config.load_dataset()?;
    let report = run_experiment_on(&config, &data)?;
    emit(args.out.as_deref(), &render_report(&report, args.format)?)
}

fn explain(args: ExperimentArgs) -> anyhow::Result<()> {
    let config = args.config();
    config.validate().map_err(|e| config_err(e.to_string()))?;
    let Some(out) = args.out.as_deref() else {
        return Err(config_err("explain requires --out <directory>"));
    };
    let data = config.load_dataset()?;
    let summary = explain_command(&config, &data, out)?;
    for rate in &summary.rates {
        let parts: Vec<String> = rate
            .mean_abs_subtraction
            .iter()
            .map(|(m, v)| format!("{m}={v:.4}"))
            .collect();
        println!("rate {}: mean |truth - estimate| {}", rate.rate, parts.join(" "));
    }
    println!("artifacts written to {}", out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err.downcast_ref::<ConfigError>().is_some()
        || matches!(err.downcast_ref::<wlda::Error>(), Some(wlda::Error::InvalidSpec(_)));
    if config {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_command(a),
        Command::Predict(a) => predict(a),
        Command::Experiment(a) => experiment(a),
        Command::Explain(a) => explain(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
