//! Correlation comparisons and exact Shapley attributions for WLDA scores.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::MaskedDataset;
use crate::error::{Error, Result};
use crate::model::WldaModel;

/// Largest feature count for exact coalition enumeration.
pub const SHAPLEY_MAX_FEATURES: usize = 20;

/// `R = D⁻¹ Σ D⁻¹` with `D = diag(sqrt(σ_ii))`.
pub fn corr_from_cov(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() {
        return Err(Error::Contract("covariance must be square".into()));
    }
    let sd: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    if let Some(i) = cov.diagonal().iter().position(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::Contract(format!("variance of feature {i} is not positive")));
    }
    let p = cov.nrows();
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (sd[i] * sd[j])
        }
    }))
}

/// `(truth - est, (truth - est) ∘ (truth - est))`.
pub fn correlation_diffs(truth: &DMatrix<f64>, est: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if truth.shape() != est.shape() {
        return Err(Error::Contract(format!(
            "shape mismatch: {:?} vs {:?}",
            truth.shape(),
            est.shape()
        )));
    }
    let sub = truth - est;
    let sq = sub.component_mul(&sub);
    Ok((sub, sq))
}

/// Estimated correlation, optionally compared against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub estimated: DMatrix<f64>,
    pub truth: Option<DMatrix<f64>>,
    pub subtraction: Option<DMatrix<f64>>,
    pub squared_error: Option<DMatrix<f64>>,
}

impl CorrelationReport {
    pub fn from_covariances(est: &DMatrix<f64>, truth: Option<&DMatrix<f64>>) -> Result<Self> {
        let estimated = corr_from_cov(est)?;
        let truth = truth.map(corr_from_cov).transpose()?;
        let (subtraction, squared_error) = match &truth {
            Some(t) => {
                let (s, q) = correlation_diffs(t, &estimated)?;
                (Some(s), Some(q))
            }
            None => (None, None),
        };
        Ok(Self {
            estimated,
            truth,
            subtraction,
            squared_error,
        })
    }

    /// Mean of `|ΔR|` over all entries, when a reference is present.
    pub fn mean_abs_subtraction(&self) -> Option<f64> {
        self.subtraction
            .as_ref()
            .map(|s| s.iter().map(|v| v.abs()).sum::<f64>() / s.len() as f64)
    }
}

/// Shapley attribution of one sample's class score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    pub sample_index: usize,
    pub class_id: usize,
    pub phi: Vec<f64>,
    pub v_full: f64,
    pub v_empty: f64,
}

/// Exact Shapley values of `v(S) = score(x, mask ∧ S, g)`: a feature outside
/// the coalition is treated as missing. Features already missing in `x` are
/// null players and get exactly 0.
pub fn shapley(model: &WldaModel, x: &[f64], mask: &[bool], class: usize) -> Result<ShapleyReport> {
    let p = model.n_features();
    if p > SHAPLEY_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            p,
            limit: SHAPLEY_MAX_FEATURES,
        });
    }
    // validates shapes and class once; the loop below uses the unchecked path
    let v_full = model.score(x, mask, class)?;

    // Null players do not change anyone else's value, so enumerate only the
    // observed features.
    let players: Vec<usize> = (0..p).filter(|&i| mask[i]).collect();
    let q = players.len();
    let mut values = vec![0.0; 1 << q];
    let mut coalition = vec![false; p];
    for (bits, slot) in values.iter_mut().enumerate() {
        coalition.iter_mut().for_each(|c| *c = false);
        for (k, &f) in players.iter().enumerate() {
            if bits >> k & 1 == 1 {
                coalition[f] = true;
            }
        }
        *slot = model.score_unchecked(x, &coalition, class);
    }

    // weight(|S|) = |S|! (q - |S| - 1)! / q!
    let mut fact = vec![1.0f64; q + 1];
    for i in 1..=q {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; p];
    for (k, &f) in players.iter().enumerate() {
        let bit = 1usize << k;
        let mut acc = 0.0;
        for s in 0..(1usize << q) {
            if s & bit != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let w = fact[size] * fact[q - size - 1] / fact[q];
            acc += w * (values[s | bit] - values[s]);
        }
        phi[f] = acc;
    }
    Ok(ShapleyReport {
        sample_index: 0,
        class_id: class,
        phi,
        v_full,
        v_empty: values[0],
    })
}

/// Shapley reports for every row of `data` against class `class`.
pub fn shapley_dataset(model: &WldaModel, data: &MaskedDataset, class: usize) -> Result<Vec<ShapleyReport>> {
    (0..data.n_rows())
        .map(|i| {
            let mut r = shapley(model, data.row(i), data.mask_row(i), class)?;
            r.sample_index = i;
            Ok(r)
        })
        .collect()
}

/// G×p matrix of mean `|φ|` over the samples of `data`, per class score.
pub fn mean_abs_shapley(model: &WldaModel, data: &MaskedDataset) -> Result<DMatrix<f64>> {
    if data.n_rows() == 0 {
        return Err(Error::Empty("no samples to explain".into()));
    }
    let g = model.n_classes();
    let p = model.n_features();
    let mut out = DMatrix::<f64>::zeros(g, p);
    for class in 0..g {
        for report in shapley_dataset(model, data, class)? {
            for (i, v) in report.phi.iter().enumerate() {
                out[(class, i)] += v.abs();
            }
        }
    }
    Ok(out / data.n_rows() as f64)
}

/// Per-feature mean over classes of a [`mean_abs_shapley`] matrix.
pub fn aggregate_over_classes(per_class: &DMatrix<f64>) -> Vec<f64> {
    per_class.row_mean().iter().copied().collect()
}
