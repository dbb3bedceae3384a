//! Two-step comparators: impute, then fit classical LDA on the completed data.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::MaskedDataset;
use crate::error::{Error, Result};
use crate::linalg::{repair_pd, spd_inverse};
use crate::model::argmax_first;

/// Method name and hyperparameters of an imputation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub params: BTreeMap<String, f64>,
}

/// A completed n×p matrix together with the mask it was completed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDataset {
    pub values: DMatrix<f64>,
    pub provenance: Provenance,
    /// Row-major, as in [`MaskedDataset::mask`].
    pub original_mask: Vec<bool>,
    pub warnings: Vec<String>,
}

impl ImputedDataset {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Rows `[start, start + len)` as a new dataset.
    pub fn slice_rows(&self, start: usize, len: usize) -> Self {
        let p = self.values.ncols();
        Self {
            values: self.values.rows(start, len).into_owned(),
            provenance: self.provenance.clone(),
            original_mask: self.original_mask[start * p..(start + len) * p].to_vec(),
            warnings: self.warnings.clone(),
        }
    }

    /// Writes the completed matrix as CSV under the given feature names.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, feature_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(feature_names)?;
        for i in 0..self.values.nrows() {
            w.write_record(self.values.row(i).iter().map(|v| format!("{v}")))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// The observed entries of `data` as a matrix plus per-feature observed means.
fn observed_matrix(data: &MaskedDataset) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (n, p) = (data.n_rows(), data.n_features());
    let mut col_means = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for i in 0..n {
        for j in 0..p {
            if let Some(v) = data.value(i, j) {
                col_means[j] += v;
                counts[j] += 1;
            }
        }
    }
    for j in 0..p {
        if counts[j] == 0 {
            return Err(Error::Schema(format!(
                "feature {:?} has no observed values",
                data.feature_names()[j]
            )));
        }
        col_means[j] /= counts[j] as f64;
    }
    let values = DMatrix::from_fn(n, p, |i, j| data.value(i, j).unwrap_or(col_means[j]));
    Ok((values, col_means))
}

/// Fills each missing entry with its feature's observed mean (label-blind).
pub fn mean_impute(data: &MaskedDataset) -> Result<ImputedDataset> {
    let (values, _) = observed_matrix(data)?;
    Ok(ImputedDataset {
        values,
        provenance: Provenance {
            method: "mean".into(),
            params: BTreeMap::new(),
        },
        original_mask: data.mask().to_vec(),
        warnings: Vec::new(),
    })
}

/// Distance over coordinates observed in both rows, rescaled by
/// `sqrt(p / shared)`. Rows sharing nothing are infinitely far apart.
fn nan_euclidean(data: &MaskedDataset, a: usize, b: usize) -> f64 {
    let p = data.n_features();
    let mut shared = 0usize;
    let mut sum = 0.0;
    for j in 0..p {
        if let (Some(x), Some(y)) = (data.value(a, j), data.value(b, j)) {
            sum += (x - y) * (x - y);
            shared += 1;
        }
    }
    if shared == 0 {
        f64::INFINITY
    } else {
        (sum * p as f64 / shared as f64).sqrt()
    }
}

/// Fills missing `(i, j)` with the mean of feature `j` over the `k` nearest
/// rows that observe it. Distance ties go to the lower row index.
pub fn knn_impute(data: &MaskedDataset, k: usize) -> Result<ImputedDataset> {
    if k == 0 {
        return Err(Error::Contract("k must be at least 1".into()));
    }
    let (mut values, col_means) = observed_matrix(data)?;
    let (n, p) = (data.n_rows(), data.n_features());
    let mut warnings = Vec::new();
    for i in 0..n {
        let holes: Vec<usize> = (0..p).filter(|&j| !data.is_observed(i, j)).collect();
        if holes.is_empty() {
            continue;
        }
        let mut neighbours: Vec<(f64, usize)> = (0..n)
            .filter(|&r| r != i)
            .map(|r| (nan_euclidean(data, i, r), r))
            .filter(|(d, _)| d.is_finite())
            .collect();
        neighbours.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for j in holes {
            let donors: Vec<f64> = neighbours
                .iter()
                .filter_map(|&(_, r)| data.value(r, j))
                .take(k)
                .collect();
            values[(i, j)] = if donors.is_empty() {
                let msg = format!("row {i} feature {j}: no donor rows, used the feature mean");
                log::warn!("{msg}");
                warnings.push(msg);
                col_means[j]
            } else {
                donors.iter().sum::<f64>() / donors.len() as f64
            };
        }
    }
    Ok(ImputedDataset {
        values,
        provenance: Provenance {
            method: "knn".into(),
            params: BTreeMap::from([("k".to_string(), k as f64)]),
        },
        original_mask: data.mask().to_vec(),
        warnings,
    })
}

/// Iteration record of a soft-impute run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoftImputeTrace {
    /// `½‖P_obs(X − Z)‖² + λ‖Z‖_*` after every iteration at the target λ.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Options for [`soft_impute`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftImputeOptions {
    /// Soft threshold; `None` picks the top singular value of the
    /// mean-imputed matrix divided by 10.
    pub lambda: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SoftImputeOptions {
    fn default() -> Self {
        Self {
            lambda: None,
            max_iters: 200,
            tol: 1e-5,
        }
    }
}

fn svt(y: &DMatrix<f64>, lambda: f64) -> (DMatrix<f64>, f64) {
    let svd = y.clone().svd(true, true);
    let shrunk = svd.singular_values.map(|s| (s - lambda).max(0.0));
    let nuclear = shrunk.sum();
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    (&u * DMatrix::from_diagonal(&shrunk) * &v_t, nuclear)
}

fn top_singular_value(y: &DMatrix<f64>) -> f64 {
    y.clone().svd(false, false).singular_values.max()
}

/// Runs `Z ← SVT_λ(P_obs(X) + P_miss(Z))` at one λ from a warm start.
fn soft_impute_stage(
    observed: &DMatrix<f64>,
    mask: &[bool],
    z: &mut DMatrix<f64>,
    lambda: f64,
    opts: &SoftImputeOptions,
    mut objective: Option<&mut Vec<f64>>,
) -> (usize, bool) {
    let p = observed.ncols();
    let is_obs = |i: usize, j: usize| mask[i * p + j];
    let fill = |z: &DMatrix<f64>| {
        DMatrix::from_fn(observed.nrows(), p, |i, j| {
            if is_obs(i, j) {
                observed[(i, j)]
            } else {
                z[(i, j)]
            }
        })
    };
    for iter in 1..=opts.max_iters {
        let (next, nuclear) = svt(&fill(z), lambda);
        let mut delta = 0.0;
        let mut norm = 0.0;
        let mut residual = 0.0;
        for i in 0..observed.nrows() {
            for j in 0..p {
                if is_obs(i, j) {
                    residual += (observed[(i, j)] - next[(i, j)]).powi(2);
                } else {
                    delta += (next[(i, j)] - z[(i, j)]).powi(2);
                    norm += z[(i, j)].powi(2);
                }
            }
        }
        if let Some(obj) = objective.as_deref_mut() {
            obj.push(0.5 * residual + lambda * nuclear);
        }
        *z = next;
        let change = if norm > 0.0 {
            delta / norm
        } else if delta == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if change < opts.tol {
            return (iter, true);
        }
    }
    (opts.max_iters, false)
}

/// Spectral-regularisation matrix completion, started from the mean-imputed
/// matrix. Observed entries are restored exactly in the output.
///
/// With `λ = 0` the thresholding step is the identity and every completion is
/// a fixed point; the result is then the limit `λ → 0⁺`, reached by
/// warm-starting down a geometric λ path.
pub fn soft_impute(data: &MaskedDataset, opts: &SoftImputeOptions) -> Result<(ImputedDataset, SoftImputeTrace)> {
    let (start, _) = observed_matrix(data)?;
    let n = data.n_rows();
    let p = data.n_features();
    for i in 0..n {
        if data.mask_row(i).iter().all(|&m| !m) {
            return Err(Error::Contract(format!("row {i} has no observed entries")));
        }
    }
    let lambda = opts.lambda.unwrap_or_else(|| top_singular_value(&start) / 10.0);
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::Contract("lambda must be non-negative".into()));
    }
    let observed = start.clone();
    let mask = data.mask();
    let mut z = start;
    let mut trace = SoftImputeTrace::default();
    let mut warnings = Vec::new();

    if lambda == 0.0 && !data.is_complete() {
        let top = top_singular_value(&z);
        let mut stage_lambda = top / 10.0;
        while stage_lambda > top * 1e-9 {
            let (iters, _) = soft_impute_stage(&observed, mask, &mut z, stage_lambda, opts, None);
            trace.iterations += iters;
            stage_lambda /= 10.0;
        }
    }
    let (iters, converged) = soft_impute_stage(&observed, mask, &mut z, lambda, opts, Some(&mut trace.objective));
    trace.iterations += iters;
    trace.converged = converged;
    if !converged {
        let msg = format!("soft-impute did not converge in {} iterations", opts.max_iters);
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let values = DMatrix::from_fn(n, p, |i, j| data.value(i, j).unwrap_or(z[(i, j)]));
    let imputed = ImputedDataset {
        values,
        provenance: Provenance {
            method: "soft-impute".into(),
            params: BTreeMap::from([
                ("lambda".to_string(), lambda),
                ("max_iters".to_string(), opts.max_iters as f64),
                ("tol".to_string(), opts.tol),
            ]),
        },
        original_mask: mask.to_vec(),
        warnings,
    };
    Ok((imputed, trace))
}

/// Classical LDA on complete data: pooled within-class MLE covariance,
/// PD-repaired, with log priors from class frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalLda {
    pub means: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub precision: DMatrix<f64>,
    pub priors: Vec<f64>,
}

/// Pooled within-class scatter divided by n.
pub fn pooled_covariance(x: &DMatrix<f64>, labels: &[usize], means: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.ncols();
    let mut s = DMatrix::<f64>::zeros(p, p);
    for (i, &g) in labels.iter().enumerate() {
        let d = (x.row(i) - means.row(g)).transpose();
        s += &d * d.transpose();
    }
    s / labels.len() as f64
}

impl ClassicalLda {
    pub fn fit(x: &DMatrix<f64>, labels: &[usize], n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Contract("LDA needs at least 2 classes".into()));
        }
        if labels.len() != x.nrows() || labels.is_empty() {
            return Err(Error::Contract("one label per row is required".into()));
        }
        let p = x.ncols();
        let mut means = DMatrix::<f64>::zeros(n_classes, p);
        let mut counts = vec![0usize; n_classes];
        for (i, &g) in labels.iter().enumerate() {
            if g >= n_classes {
                return Err(Error::InvalidClass { class: g, n_classes });
            }
            counts[g] += 1;
            let mut row = means.row_mut(g);
            row += x.row(i);
        }
        for (g, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(Error::Contract(format!("class {g} has no training rows")));
            }
            let mut row = means.row_mut(g);
            row /= count as f64;
        }
        let covariance = repair_pd(&pooled_covariance(x, labels, &means))?;
        let precision = spd_inverse(&covariance)?;
        let n = labels.len() as f64;
        let priors = counts.iter().map(|&c| (c as f64 / n).ln()).collect();
        Ok(Self {
            means,
            covariance,
            precision,
            priors,
        })
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_row_slice(x);
        (0..self.priors.len())
            .map(|g| {
                let d = &x - self.means.row(g).transpose();
                self.priors[g] - 0.5 * d.dot(&(&self.precision * &d))
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_first(&self.scores(x))
    }

    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> Vec<usize> {
        (0..x.nrows())
            .map(|i| self.predict(x.row(i).iter().copied().collect::<Vec<_>>().as_slice()))
            .collect()
    }
}

/// Fits classical LDA on an imputed training matrix and predicts the test rows.
pub fn classical_lda_fit_predict(
    train: &ImputedDataset,
    labels: &[usize],
    n_classes: usize,
    test: &ImputedDataset,
) -> Result<Vec<usize>> {
    let model = ClassicalLda::fit(&train.values, labels, n_classes)?;
    Ok(model.predict_matrix(&test.values))
}
