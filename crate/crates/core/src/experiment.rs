//! Repeated-split benchmark harness and report rendering.
//!
//! Every repeat draws a stratified split from `seed + repeat`, deletes cells
//! under MCAR at each rate, and scores every method on the same masked data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    classical_lda_fit_predict, knn_impute, mean_impute, pooled_covariance, soft_impute, ImputedDataset,
    SoftImputeOptions,
};
use crate::dataset::{load_csv, simulate_mcar, stratified_split, CsvOptions, MaskedDataset, MissingSpec};
use crate::error::{Error, Result};
use crate::explain::{mean_abs_shapley, CorrelationReport};
use crate::model::{fit, WeightScope, WldaModel};
use crate::svg::{emit_bars, emit_heatmap, ColorRange};

pub const REPORT_SCHEMA: &str = "wlda-experiment/1";

/// Classification pipelines the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Wlda,
    Mean,
    Knn,
    SoftImpute,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Wlda, Method::Mean, Method::Knn, Method::SoftImpute];

    pub fn key(self) -> &'static str {
        match self {
            Method::Wlda => "wlda",
            Method::Mean => "mean",
            Method::Knn => "knn",
            Method::SoftImpute => "soft-impute",
        }
    }

    /// Column heading in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Method::Wlda => "WLDA",
            Method::Mean => "Mean",
            Method::Knn => "KNNI",
            Method::SoftImpute => "Soft-Impute",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wlda" => Ok(Method::Wlda),
            "mean" => Ok(Method::Mean),
            "knn" | "knni" => Ok(Method::Knn),
            "soft-impute" | "soft_impute" | "softimpute" | "soft" => Ok(Method::SoftImpute),
            other => Err(Error::InvalidSpec(format!("unknown method {other:?}"))),
        }
    }
}

/// Where MCAR deletion is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    TrainOnly,
    TrainAndTest,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train_only" | "train-only" => Ok(Scenario::TrainOnly),
            "train_and_test" | "train-and-test" | "both" => Ok(Scenario::TrainAndTest),
            other => Err(Error::InvalidSpec(format!("unknown scenario {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub label_column: String,
    pub missing_token: String,
    pub na_is_missing: bool,
    pub rates: Vec<f64>,
    pub scenario: Scenario,
    pub repeats: usize,
    pub methods: Vec<Method>,
    pub test_fraction: f64,
    pub weight_scope: WeightScope,
    pub seed: u64,
    pub knn_k: usize,
    /// `None` uses the top singular value of the mean-imputed matrix / 10.
    pub soft_lambda: Option<f64>,
    pub soft_max_iters: usize,
    pub soft_tol: f64,
}

pub const DEFAULT_RATES: [f64; 5] = [0.15, 0.30, 0.45, 0.60, 0.75];
pub const DEFAULT_SEED: u64 = 42;

impl ExperimentConfig {
    pub fn new(data: impl Into<PathBuf>, label_column: impl Into<String>) -> Self {
        Self {
            data: data.into(),
            label_column: label_column.into(),
            missing_token: String::new(),
            na_is_missing: false,
            rates: DEFAULT_RATES.to_vec(),
            scenario: Scenario::TrainOnly,
            repeats: 10,
            methods: Method::ALL.to_vec(),
            test_fraction: 0.2,
            weight_scope: WeightScope::TrainOnly,
            seed: DEFAULT_SEED,
            knn_k: 5,
            soft_lambda: None,
            soft_max_iters: 200,
            soft_tol: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(Error::InvalidSpec("at least one missing rate is required".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::InvalidSpec(format!("missing rate {r} outside [0, 1)")));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidSpec("repeats must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidSpec("at least one method is required".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "test fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidSpec("k must be at least 1".into()));
        }
        if matches!(self.soft_lambda, Some(l) if l.is_nan() || l < 0.0) {
            return Err(Error::InvalidSpec("lambda must be non-negative".into()));
        }
        Ok(())
    }

    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            label_column: Some(self.label_column.clone()),
            missing_token: self.missing_token.clone(),
            na_is_missing: self.na_is_missing,
        }
    }

    pub fn load_dataset(&self) -> Result<MaskedDataset> {
        load_csv(&self.data, &self.csv_options())
    }

    fn soft_options(&self) -> SoftImputeOptions {
        SoftImputeOptions {
            lambda: self.soft_lambda,
            max_iters: self.soft_max_iters,
            tol: self.soft_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatFailure {
    pub repeat: usize,
    pub message: String,
}

/// Accuracy over repeats for one (method, rate) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub rate: f64,
    /// One entry per repeat; `None` marks a failed repeat.
    pub accuracies: Vec<Option<f64>>,
    pub failures: Vec<RepeatFailure>,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1); 0 for a single successful repeat.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_rows: usize,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub os: String,
    pub arch: String,
    pub std_convention: String,
    pub external_methods: Vec<String>,
    pub dataset: DatasetSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub metadata: ReportMetadata,
    pub results: Vec<CellResult>,
}

impl ExperimentReport {
    pub fn cell(&self, method: Method, rate: f64) -> Option<&CellResult> {
        self.results.iter().find(|c| c.method == method && c.rate == rate)
    }
}

/// Mean and sample standard deviation of the successful repeats.
pub fn summarize(accuracies: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let ok: Vec<f64> = accuracies.iter().flatten().copied().collect();
    if ok.is_empty() {
        return (None, None);
    }
    let n = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / n;
    let std = if ok.len() < 2 {
        0.0
    } else {
        (ok.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

/// Stable per-purpose seed derivation (splitmix64 finaliser). Keyed on the
/// rate value, so a rate's masks do not depend on which other rates run.
pub fn derive_seed(base: u64, repeat: usize, rate: f64, stream: u64) -> u64 {
    let mut z = base
        ^ (repeat as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ rate.to_bits().wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ stream.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Train/test pair after deletion for one (repeat, rate).
#[derive(Debug, Clone)]
pub struct TrialData {
    pub complete_train: MaskedDataset,
    pub train: MaskedDataset,
    pub test: MaskedDataset,
}

pub fn prepare_trial(
    data: &MaskedDataset,
    config: &ExperimentConfig,
    repeat: usize,
    rate_index: usize,
) -> Result<TrialData> {
    let rate = config.rates[rate_index];
    let split_seed = config.seed.wrapping_add(repeat as u64);
    let (complete_train, complete_test) = stratified_split(data, config.test_fraction, split_seed)?;
    let train = simulate_mcar(
        &complete_train,
        &MissingSpec::protocol(rate, derive_seed(config.seed, repeat, rate, 1)),
    )?;
    let test = match config.scenario {
        Scenario::TrainOnly => complete_test,
        Scenario::TrainAndTest => simulate_mcar(
            &complete_test,
            &MissingSpec::protocol(rate, derive_seed(config.seed, repeat, rate, 2)),
        )?,
    };
    Ok(TrialData {
        complete_train,
        train,
        test,
    })
}

/// Imputes train (and, when the test set has gaps, test) with a baseline.
/// Train and test are completed together, label-blind.
pub fn impute_for(
    method: Method,
    train: &MaskedDataset,
    test: &MaskedDataset,
    config: &ExperimentConfig,
) -> Result<(ImputedDataset, ImputedDataset)> {
    let run = |d: &MaskedDataset| -> Result<ImputedDataset> {
        match method {
            Method::Mean => mean_impute(d),
            Method::Knn => knn_impute(d, config.knn_k),
            Method::SoftImpute => soft_impute(d, &config.soft_options()).map(|(imp, _)| imp),
            Method::Wlda => Err(Error::Contract("WLDA does not impute".into())),
        }
    };
    if test.is_complete() {
        let imputed = run(train)?;
        let test_values = DMatrix::from_fn(test.n_rows(), test.n_features(), |i, j| test.row(i)[j]);
        let completed_test = ImputedDataset {
            values: test_values,
            provenance: imputed.provenance.clone(),
            original_mask: test.mask().to_vec(),
            warnings: Vec::new(),
        };
        Ok((imputed, completed_test))
    } else {
        let stacked = run(&train.concat(test)?)?;
        Ok((
            stacked.slice_rows(0, train.n_rows()),
            stacked.slice_rows(train.n_rows(), test.n_rows()),
        ))
    }
}

/// Predicted test labels for one method on one trial.
pub fn run_method(method: Method, trial: &TrialData, config: &ExperimentConfig) -> Result<Vec<usize>> {
    let labels = trial.train.require_labels("training")?;
    match method {
        Method::Wlda => {
            let model = fit(&trial.train, config.weight_scope, Some(&trial.test))?;
            model.predict_dataset(&trial.test)
        }
        _ => {
            let (train, test) = impute_for(method, &trial.train, &trial.test, config)?;
            classical_lda_fit_predict(&train, labels, trial.train.n_classes(), &test)
        }
    }
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let correct = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    correct as f64 / truth.len() as f64
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let data = config.load_dataset()?;
    run_experiment_on(config, &data)
}

pub fn run_experiment_on(config: &ExperimentConfig, data: &MaskedDataset) -> Result<ExperimentReport> {
    config.validate()?;
    data.require_labels("experiment")?;
    let mut cells: Vec<CellResult> = Vec::new();
    for (rate_index, &rate) in config.rates.iter().enumerate() {
        let mut per_method: Vec<(Vec<Option<f64>>, Vec<RepeatFailure>)> =
            vec![(Vec::with_capacity(config.repeats), Vec::new()); config.methods.len()];
        for repeat in 0..config.repeats {
            let trial = prepare_trial(data, config, repeat, rate_index)?;
            let truth = trial.test.require_labels("evaluation")?;
            for (slot, &method) in per_method.iter_mut().zip(&config.methods) {
                match run_method(method, &trial, config) {
                    Ok(pred) => slot.0.push(Some(accuracy(&pred, truth))),
                    Err(e) => {
                        log::warn!("{method} failed at rate {rate}, repeat {repeat}: {e}");
                        slot.0.push(None);
                        slot.1.push(RepeatFailure {
                            repeat,
                            message: e.to_string(),
                        });
                    }
                }
            }
        }
        for ((accuracies, failures), &method) in per_method.into_iter().zip(&config.methods) {
            let (mean, std) = summarize(&accuracies);
            cells.push(CellResult {
                method,
                rate,
                accuracies,
                failures,
                mean,
                std,
            });
        }
    }
    Ok(ExperimentReport {
        schema: REPORT_SCHEMA.into(),
        config: config.clone(),
        metadata: ReportMetadata {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            std_convention: "sample standard deviation (n - 1 denominator) over successful repeats".into(),
            external_methods: vec!["MICE".into(), "DIMV".into()],
            dataset: DatasetSummary {
                n_rows: data.n_rows(),
                feature_names: data.feature_names().to_vec(),
                class_names: data.class_names().to_vec(),
                class_counts: data.class_counts().unwrap_or_default(),
            },
        },
        results: cells,
    })
}

/// Output format of [`render_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" | "markdown_table" => Ok(Self::Markdown),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidSpec(format!("unknown format {other:?}"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Markdown => "md",
            Self::Json => "json",
            Self::Csv => "csv",
        }
    }
}

pub fn format_rate(rate: f64) -> String {
    let pct = rate * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}%", pct.round() as i64)
    } else {
        format!("{pct}%")
    }
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Markdown => Ok(render_markdown(report)),
        ReportFormat::Csv => render_csv(report),
    }
}

fn render_markdown(report: &ExperimentReport) -> String {
    let methods = &report.config.methods;
    let mut s = String::new();
    let _ = write!(s, "| Missing rate |");
    for m in methods {
        let _ = write!(s, " {} |", m.title());
    }
    s.push('\n');
    s.push_str("|---|");
    for _ in methods {
        s.push_str("---|");
    }
    s.push('\n');
    for &rate in &report.config.rates {
        let cells: Vec<Option<&CellResult>> = methods.iter().map(|&m| report.cell(m, rate)).collect();
        let shown: Vec<Option<(String, String)>> = cells
            .iter()
            .map(|c| c.and_then(|c| Some((format!("{:.3}", c.mean?), format!("{:.3}", c.std.unwrap_or(0.0))))))
            .collect();
        // bold every cell whose displayed mean equals the best displayed mean
        let best = shown
            .iter()
            .flatten()
            .map(|(m, _)| m.parse::<f64>().unwrap_or(f64::NEG_INFINITY))
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = write!(s, "| {} |", format_rate(rate));
        for cell in &shown {
            match cell {
                Some((m, sd)) => {
                    let text = format!("{m} ± {sd}");
                    if m.parse::<f64>().ok() == Some(best) {
                        let _ = write!(s, " **{text}** |");
                    } else {
                        let _ = write!(s, " {text} |");
                    }
                }
                None => s.push_str(" failed |"),
            }
        }
        s.push('\n');
    }
    let failed: usize = report.results.iter().map(|c| c.failures.len()).sum();
    if failed > 0 {
        let _ = writeln!(
            s,
            "\n{failed} failed repeat(s) excluded from aggregation; see the JSON report."
        );
    }
    let _ = writeln!(
        s,
        "\nExternal methods not run: {}.",
        report.metadata.external_methods.join(", ")
    );
    s
}

fn render_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "method".to_string(),
        "rate".into(),
        "mean".into(),
        "std".into(),
        "failed".into(),
    ];
    header.extend((0..report.config.repeats).map(|r| format!("repeat_{r}")));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
    for c in &report.results {
        let mut rec = vec![
            c.method.key().to_string(),
            format!("{}", c.rate),
            opt(c.mean),
            opt(c.std),
            c.failures.len().to_string(),
        ];
        rec.extend(c.accuracies.iter().map(|&a| opt(a)));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(report, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Correlation of each method's covariance estimate against the pooled MLE
/// on the complete training data.
pub fn correlation_comparison(
    trial: &TrialData,
    methods: &[Method],
    config: &ExperimentConfig,
) -> Result<(DMatrix<f64>, BTreeMap<Method, CorrelationReport>)> {
    let labels = trial.complete_train.require_labels("correlation comparison")?;
    let g = trial.complete_train.n_classes();
    let complete = DMatrix::from_fn(
        trial.complete_train.n_rows(),
        trial.complete_train.n_features(),
        |i, j| trial.complete_train.row(i)[j],
    );
    let truth = pooled_covariance(&complete, labels, &class_means(&complete, labels, g));
    let mut out = BTreeMap::new();
    for &method in methods {
        let est = match method {
            Method::Wlda => fit(&trial.train, config.weight_scope, Some(&trial.test))?
                .params()
                .covariance
                .clone(),
            _ => {
                let (train, _) = impute_for(method, &trial.train, &trial.test, config)?;
                pooled_covariance(&train.values, labels, &class_means(&train.values, labels, g))
            }
        };
        out.insert(method, CorrelationReport::from_covariances(&est, Some(&truth))?);
    }
    Ok((truth, out))
}

fn class_means(x: &DMatrix<f64>, labels: &[usize], g: usize) -> DMatrix<f64> {
    let mut means = DMatrix::<f64>::zeros(g, x.ncols());
    let mut counts = vec![0usize; g];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut row = means.row_mut(l);
        row += x.row(i);
    }
    for (l, &c) in counts.iter().enumerate() {
        if c > 0 {
            let mut row = means.row_mut(l);
            row /= c as f64;
        }
    }
    means
}

/// One row of the normalised boundary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub rate: f64,
    pub pair: (usize, usize),
    /// `None` when the intercept is numerically zero.
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExplanation {
    pub rate: f64,
    pub mean_abs_subtraction: BTreeMap<Method, f64>,
    pub boundaries: Vec<BoundaryRow>,
    /// G×p mean |φ| per class score, row-major.
    pub mean_abs_shapley: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainSummary {
    pub schema: String,
    pub rates: Vec<RateExplanation>,
}

fn rate_dir_name(rate: f64) -> String {
    format!("rate_{}", format_rate(rate).trim_end_matches('%').replace('.', "_"))
}

fn matrix_csv(m: &DMatrix<f64>, row_labels: &[String], col_labels: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(col_labels.iter().cloned());
    w.write_record(&header)?;
    for (i, label) in row_labels.iter().enumerate().take(m.nrows()) {
        let mut rec = vec![label.clone()];
        rec.extend(m.row(i).iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Boundary rows for an all-observed sample, one per class pair.
pub fn boundary_rows(model: &WldaModel, rate: f64) -> Result<Vec<BoundaryRow>> {
    let mask = vec![true; model.n_features()];
    Ok(model
        .normalized_boundaries(&mask)?
        .into_iter()
        .map(|b| BoundaryRow {
            rate,
            pair: b.class_pair,
            coefficients: b.normalized_u,
        })
        .collect())
}

/// Writes correlation heatmaps, the normalised boundary table and Shapley
/// bar charts for every configured rate, using the first repeat's split.
pub fn explain_command(config: &ExperimentConfig, data: &MaskedDataset, out_dir: &Path) -> Result<ExplainSummary> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let features = data.feature_names().to_vec();
    let classes = data.class_names().to_vec();
    let mut summary = ExplainSummary {
        schema: "wlda-explain/1".into(),
        rates: Vec::new(),
    };
    let mut boundary_csv = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["missing_rate".to_string(), "boundary".into()];
    header.extend(features.iter().cloned());
    boundary_csv.write_record(&header)?;

    for rate_index in 0..config.rates.len() {
        let rate = config.rates[rate_index];
        let dir = out_dir.join(rate_dir_name(rate));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let trial = prepare_trial(data, config, 0, rate_index)?;

        let (truth, reports) = correlation_comparison(&trial, &config.methods, config)?;
        let truth_corr = crate::explain::corr_from_cov(&truth)?;
        emit_heatmap(
            &truth_corr,
            &features,
            "ground truth",
            ColorRange::Correlation,
            &dir.join("corr_ground_truth.svg"),
        )?;
        write_file(
            &dir.join("corr_ground_truth.csv"),
            &matrix_csv(&truth_corr, &features, &features)?,
        )?;
        let mut mean_abs = BTreeMap::new();
        for (method, report) in &reports {
            let key = method.key();
            let title = method.title();
            emit_heatmap(
                &report.estimated,
                &features,
                title,
                ColorRange::Correlation,
                &dir.join(format!("corr_{key}.svg")),
            )?;
            write_file(
                &dir.join(format!("corr_{key}.csv")),
                &matrix_csv(&report.estimated, &features, &features)?,
            )?;
            let sub = report.subtraction.as_ref().expect("truth supplied");
            let sq = report.squared_error.as_ref().expect("truth supplied");
            emit_heatmap(
                sub,
                &features,
                &format!("{title}: truth - estimate"),
                ColorRange::Symmetric,
                &dir.join(format!("sub_{key}.svg")),
            )?;
            write_file(
                &dir.join(format!("sub_{key}.csv")),
                &matrix_csv(sub, &features, &features)?,
            )?;
            emit_heatmap(
                sq,
                &features,
                &format!("{title}: squared error"),
                ColorRange::Symmetric,
                &dir.join(format!("sq_{key}.svg")),
            )?;
            write_file(
                &dir.join(format!("sq_{key}.csv")),
                &matrix_csv(sq, &features, &features)?,
            )?;
            mean_abs.insert(*method, report.mean_abs_subtraction().expect("truth supplied"));
        }

        let model = fit(&trial.train, config.weight_scope, Some(&trial.test))?;
        let rows = boundary_rows(&model, rate)?;
        for row in &rows {
            let mut rec = vec![format!("{rate}"), format!("({}, {})", row.pair.0, row.pair.1)];
            match &row.coefficients {
                Some(c) => rec.extend(c.iter().map(|v| format!("{v:.6}"))),
                None => rec.extend(features.iter().map(|_| "NA".to_string())),
            }
            boundary_csv.write_record(&rec)?;
        }

        let shap = mean_abs_shapley(&model, &trial.test)?;
        write_file(
            &dir.join("shapley_mean_abs.csv"),
            &matrix_csv(&shap, &classes, &features)?,
        )?;
        for (g, class) in classes.iter().enumerate() {
            let values: Vec<f64> = shap.row(g).iter().copied().collect();
            emit_bars(
                &values,
                &features,
                &format!("mean |Shapley|, class {class}"),
                &dir.join(format!("shapley_class_{g}.svg")),
            )?;
        }
        let overall = crate::explain::aggregate_over_classes(&shap);
        emit_bars(
            &overall,
            &features,
            "mean |Shapley|, all classes",
            &dir.join("shapley_overall.svg"),
        )?;

        summary.rates.push(RateExplanation {
            rate,
            mean_abs_subtraction: mean_abs,
            boundaries: rows,
            mean_abs_shapley: (0..shap.nrows())
                .map(|g| shap.row(g).iter().copied().collect())
                .collect(),
        });
    }
    let bytes = boundary_csv
        .into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    write_file(
        &out_dir.join("boundaries.csv"),
        &String::from_utf8(bytes).expect("UTF-8"),
    )?;
    write_file(
        &out_dir.join("explain_summary.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    Ok(summary)
}
