//! Weighted missing linear discriminant analysis.
//!
//! Fits LDA directly on data with missing entries: class means and the shared
//! covariance are estimated from observed values only, and each feature's
//! contribution to the discriminant is down-weighted by how often it was
//! missing during training.
//!
//! ```no_run
//! use std::path::Path;
//! use wlda::{load_csv, fit, CsvOptions, WeightScope};
//!
//! let data = load_csv(Path::new("iris.csv"), &CsvOptions::with_label("species"))?;
//! let model = fit(&data, WeightScope::TrainOnly, None)?;
//! let predicted = model.predict_dataset(&data)?;
//! # Ok::<(), wlda::Error>(())
//! ```

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod explain;
pub mod linalg;
pub mod model;
pub mod svg;

pub use baselines::{knn_impute, mean_impute, soft_impute, ClassicalLda, ImputedDataset, SoftImputeOptions};
pub use dataset::{load_csv, read_csv, simulate_mcar, stratified_split, CsvOptions, MaskedDataset, MissingSpec};
pub use error::{Error, Result};
pub use estimation::{estimate_diagonal, estimate_means, estimate_pair_covariance, fit_params, ModelParams};
pub use experiment::{
    render_report, run_experiment, run_experiment_on, ExperimentConfig, ExperimentReport, Method, ReportFormat,
    Scenario,
};
pub use explain::{corr_from_cov, correlation_diffs, mean_abs_shapley, shapley, CorrelationReport, ShapleyReport};
pub use linalg::repair_pd;
pub use model::{
    build_weight_profile, fit, weight_matrix, BoundarySpec, MomentReport, WeightProfile, WeightScope, WldaModel,
};
