//! The weighted missing LDA classifier.
//!
//! Each feature carries a weight `w_i = 1 / (1 - r_i)` where `r_i` is its
//! missing rate. For a sample with mask `m` the diagonal matrix
//! `W = diag(m ⊙ w)` zeroes unobserved coordinates and inflates the
//! observed ones, and the class-`g` score is
//!
//! ```text
//! π_g - ½ (x - μ_g)ᵀ W Σ⁻¹ W (x - μ_g)
//! ```
//!
//! With no missing data anywhere `W = I` and this is the classical LDA score.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{feature_missing_rates, MaskedDataset};
use crate::error::{Error, Result};
use crate::estimation::{fit_params, EstimationWarning, ModelParams};
use crate::linalg::{ensure_symmetric, repair_pd, spd_inverse, symmetrize};

/// Per-feature missing rates and the weights derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    rates: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightProfile {
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `w_i = 1 / (1 - r_i)`; a feature that is never observed (`r_i = 1`) gets
/// weight 0.
pub fn build_weight_profile(rates: &[f64]) -> Result<WeightProfile> {
    let weights = rates
        .iter()
        .map(|&r| {
            if !(0.0..=1.0).contains(&r) {
                Err(Error::Contract(format!("missing rate {r} outside [0, 1]")))
            } else if r < 1.0 {
                Ok(1.0 / (1.0 - r))
            } else {
                Ok(0.0)
            }
        })
        .collect::<Result<_>>()?;
    Ok(WeightProfile {
        rates: rates.to_vec(),
        weights,
    })
}

/// Diagonal of `W = diag(m ⊙ w)`.
pub fn weight_matrix(mask: &[bool], profile: &WeightProfile) -> Result<Vec<f64>> {
    if mask.len() != profile.len() {
        return Err(Error::Contract(format!(
            "mask has {} entries, profile has {}",
            mask.len(),
            profile.len()
        )));
    }
    Ok(mask
        .iter()
        .zip(&profile.weights)
        .map(|(&m, &w)| if m { w } else { 0.0 })
        .collect())
}

/// Which masks feed the missing rates behind the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScope {
    /// Rates from the training masks alone.
    #[default]
    TrainOnly,
    /// Rates over the training and test masks together.
    TrainPlusTest,
}

impl std::str::FromStr for WeightScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train_only" | "train-only" => Ok(Self::TrainOnly),
            "train_plus_test" | "train-plus-test" => Ok(Self::TrainPlusTest),
            other => Err(Error::InvalidSpec(format!("unknown weight scope {other:?}"))),
        }
    }
}

/// A fitted, immutable WLDA model.
#[derive(Debug, Clone, PartialEq)]
pub struct WldaModel {
    params: ModelParams,
    profile: WeightProfile,
    precision: DMatrix<f64>,
    scope: WeightScope,
}

/// Decision hyperplane `uᵀx + u0 = 0` between two classes for one mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub class_pair: (usize, usize),
    pub mask: Vec<bool>,
    pub u: Vec<f64>,
    pub u0: f64,
    /// `u / u0`, absent when `|u0| <= 1e-12`.
    pub normalized_u: Option<Vec<f64>>,
}

/// Expectation, variance and bias of a class score under `x ~ N(μ_g, Σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub class_id: usize,
    pub mask: Vec<bool>,
    pub expectation: f64,
    pub variance: f64,
    pub bias: f64,
}

/// Closed-form moments in terms of the mask and weights alone:
///
/// * `E = π_g - ½ Σ m_i² w_i²`
/// * `Var = ½ Σ m_i⁴ w_i⁴`
/// * `Bias = ½ (p - Σ m_i² w_i²)`
///
/// These equal the exact moments when `W Σ⁻¹ W Σ` has trace `Σ m²w²`, e.g.
/// for diagonal `Σ` or when every feature is observed with unit weight. See
/// [`WldaModel::exact_moments`] for the general case.
pub fn theoretical_moments(
    profile: &WeightProfile,
    mask: &[bool],
    class_id: usize,
    priors: &[f64],
) -> Result<MomentReport> {
    let prior = *priors.get(class_id).ok_or(Error::InvalidClass {
        class: class_id,
        n_classes: priors.len(),
    })?;
    let d = weight_matrix(mask, profile)?;
    let sum_sq: f64 = d.iter().map(|v| v * v).sum();
    let sum_4: f64 = d.iter().map(|v| v.powi(4)).sum();
    let p = mask.len() as f64;
    Ok(MomentReport {
        class_id,
        mask: mask.to_vec(),
        expectation: prior - 0.5 * sum_sq,
        variance: 0.5 * sum_4,
        bias: 0.5 * (p - sum_sq),
    })
}

/// Mean and variance of `Q = xᵀAx` for Gaussian `x` with the given mean and
/// covariance: `E[Q] = μᵀAμ + tr(AΣ)`, `Var(Q) = 4 μᵀAΣAμ + 2 tr(AΣAΣ)`.
///
/// The trace term is `tr((AΣ)²)`; it equals `tr(A²Σ²)` only when `A` and `Σ`
/// commute.
pub fn quadratic_form_moments(a: &DMatrix<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<(f64, f64)> {
    ensure_symmetric(a, "quadratic form matrix")?;
    let p = a.nrows();
    if mean.len() != p || cov.shape() != (p, p) {
        return Err(Error::Contract("quadratic form shapes disagree".into()));
    }
    let a_mu = a * mean;
    let a_sigma = a * cov;
    let expectation = mean.dot(&a_mu) + a_sigma.trace();
    let variance = 4.0 * a_mu.dot(&(cov * &a_mu)) + 2.0 * (&a_sigma * &a_sigma).trace();
    Ok((expectation, variance))
}

impl WldaModel {
    /// Assembles a model from estimated parameters. The covariance is
    /// PD-repaired and inverted here.
    pub fn from_parts(mut params: ModelParams, profile: WeightProfile, scope: WeightScope) -> Result<Self> {
        let p = params.n_features();
        if profile.len() != p || params.means.ncols() != p {
            return Err(Error::Contract(format!(
                "profile has {} features, parameters have {p}",
                profile.len()
            )));
        }
        params.covariance = repair_pd(&params.covariance)?;
        let precision = spd_inverse(&params.covariance)?;
        Ok(Self {
            params,
            profile,
            precision,
            scope,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn profile(&self) -> &WeightProfile {
        &self.profile
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn scope(&self) -> WeightScope {
        self.scope
    }

    pub fn n_classes(&self) -> usize {
        self.params.n_classes()
    }

    pub fn n_features(&self) -> usize {
        self.params.n_features()
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class < self.n_classes() {
            Ok(())
        } else {
            Err(Error::InvalidClass {
                class,
                n_classes: self.n_classes(),
            })
        }
    }

    fn check_sample(&self, x: &[f64], mask: &[bool]) -> Result<()> {
        let p = self.n_features();
        if x.len() != p || mask.len() != p {
            return Err(Error::Contract(format!(
                "sample has {} values and {} mask entries, model has {p} features",
                x.len(),
                mask.len()
            )));
        }
        if x.iter().zip(mask).any(|(v, &m)| m && !v.is_finite()) {
            return Err(Error::Contract("observed entries must be finite".into()));
        }
        Ok(())
    }

    /// `P = W Σ⁻¹ W` for a mask.
    pub fn weighted_precision(&self, mask: &[bool]) -> Result<DMatrix<f64>> {
        let d = weight_matrix(mask, &self.profile)?;
        let p = d.len();
        Ok(DMatrix::from_fn(p, p, |i, j| d[i] * self.precision[(i, j)] * d[j]))
    }

    /// `W (x - μ_g)`, with unobserved coordinates set to zero.
    fn weighted_residual(&self, x: &[f64], mask: &[bool], class: usize) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter().zip(mask).enumerate().map(|(i, (&v, &m))| {
                if m {
                    self.profile.weights[i] * (v - self.params.means[(class, i)])
                } else {
                    0.0
                }
            }),
        )
    }

    /// Class score; unobserved entries of `x` are never read.
    pub fn score(&self, x: &[f64], mask: &[bool], class: usize) -> Result<f64> {
        self.check_sample(x, mask)?;
        self.check_class(class)?;
        Ok(self.score_unchecked(x, mask, class))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64], mask: &[bool], class: usize) -> f64 {
        let v = self.weighted_residual(x, mask, class);
        self.params.priors[class] - 0.5 * v.dot(&(&self.precision * &v))
    }

    /// Scores for every class.
    pub fn scores(&self, x: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
        self.check_sample(x, mask)?;
        Ok((0..self.n_classes())
            .map(|g| self.score_unchecked(x, mask, g))
            .collect())
    }

    /// Highest-scoring class; ties go to the smallest class id.
    pub fn predict(&self, x: &[f64], mask: &[bool]) -> Result<usize> {
        Ok(argmax_first(&self.scores(x, mask)?))
    }

    pub fn predict_dataset(&self, data: &MaskedDataset) -> Result<Vec<usize>> {
        (0..data.n_rows())
            .map(|i| self.predict(data.row(i), data.mask_row(i)))
            .collect()
    }

    /// Hyperplane between classes `g` and `h` for samples with this mask.
    pub fn boundary(&self, g: usize, h: usize, mask: &[bool]) -> Result<BoundarySpec> {
        self.check_class(g)?;
        self.check_class(h)?;
        if g == h {
            return Err(Error::Contract("boundary needs two distinct classes".into()));
        }
        let p_mat = self.weighted_precision(mask)?;
        let mu_g = self.params.means.row(g).transpose();
        let mu_h = self.params.means.row(h).transpose();
        let u = &p_mat * (&mu_g - &mu_h);
        let quad_g = mu_g.dot(&(&p_mat * &mu_g));
        let quad_h = mu_h.dot(&(&p_mat * &mu_h));
        let log_ratio = self.params.priors[g] - self.params.priors[h];
        let u0 = 0.5 * (quad_h - quad_g) + log_ratio;
        let normalized_u = (u0.abs() > 1e-12).then(|| u.iter().map(|v| v / u0).collect());
        Ok(BoundarySpec {
            class_pair: (g, h),
            mask: mask.to_vec(),
            u: u.iter().copied().collect(),
            u0,
            normalized_u,
        })
    }

    /// Closed-form moments using this model's weights and priors.
    pub fn theoretical_moments(&self, mask: &[bool], class: usize) -> Result<MomentReport> {
        theoretical_moments(&self.profile, mask, class, &self.params.priors)
    }

    /// Moments of the class score for `x ~ N(μ_g, Σ)` with `Σ` the model's
    /// own covariance, valid for any covariance structure:
    /// `E = π_g - ½ tr(PΣ)`, `Var = ½ tr((PΣ)²)`, `Bias = ½ (p - tr(PΣ))`
    /// with `P = W Σ⁻¹ W`.
    pub fn exact_moments(&self, mask: &[bool], class: usize) -> Result<MomentReport> {
        self.check_class(class)?;
        let p_mat = self.weighted_precision(mask)?;
        let p = self.n_features();
        let (eq, varq) = quadratic_form_moments(&p_mat, &DVector::zeros(p), &self.params.covariance)?;
        Ok(MomentReport {
            class_id: class,
            mask: mask.to_vec(),
            expectation: self.params.priors[class] - 0.5 * eq,
            variance: 0.25 * varq,
            bias: 0.5 * (p as f64 - eq),
        })
    }

    /// Boundary coefficients normalised by the intercept, one row per class
    /// pair `(g, h)` with `g < h`.
    pub fn normalized_boundaries(&self, mask: &[bool]) -> Result<Vec<BoundarySpec>> {
        let g = self.n_classes();
        let mut out = Vec::with_capacity(g * (g - 1) / 2);
        for a in 0..g {
            for b in (a + 1)..g {
                out.push(self.boundary(a, b, mask)?);
            }
        }
        Ok(out)
    }

    pub fn to_document(&self) -> ModelDocument {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        ModelDocument {
            format: MODEL_FORMAT.into(),
            feature_names: self.params.feature_names.clone(),
            class_names: self.params.class_names.clone(),
            class_counts: self.params.class_counts.clone(),
            priors: self.params.priors.clone(),
            means: rows(&self.params.means),
            covariance: rows(&self.params.covariance),
            missing_rates: self.profile.rates.clone(),
            weights: self.profile.weights.clone(),
            weight_scope: self.scope,
            warnings: self.params.warnings.clone(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT {
            return Err(Error::Schema(format!("unsupported model format {:?}", doc.format)));
        }
        let g = doc.class_names.len();
        let p = doc.feature_names.len();
        let matrix = |rows: &[Vec<f64>], r: usize, c: usize, what: &str| -> Result<DMatrix<f64>> {
            if rows.len() != r || rows.iter().any(|row| row.len() != c) {
                return Err(Error::Schema(format!("{what} must be {r}x{c}")));
            }
            Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
        };
        let means = matrix(&doc.means, g, p, "means")?;
        let mut covariance = matrix(&doc.covariance, p, p, "covariance")?;
        ensure_symmetric(&covariance, "covariance")?;
        symmetrize(&mut covariance);
        if doc.priors.len() != g || doc.class_counts.len() != g {
            return Err(Error::Schema(
                "priors and class counts must have one entry per class".into(),
            ));
        }
        let params = ModelParams {
            means,
            covariance,
            priors: doc.priors.clone(),
            class_counts: doc.class_counts.clone(),
            class_names: doc.class_names.clone(),
            feature_names: doc.feature_names.clone(),
            warnings: doc.warnings.clone(),
        };
        let profile = build_weight_profile(&doc.missing_rates)?;
        Self::from_parts(params, profile, doc.weight_scope)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_document())?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ModelDocument = serde_json::from_str(&text)?;
        Self::from_document(&doc)
    }
}

const MODEL_FORMAT: &str = "wlda-model/1";

/// JSON form of a fitted model. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
    pub missing_rates: Vec<f64>,
    pub weights: Vec<f64>,
    pub weight_scope: WeightScope,
    pub warnings: Vec<EstimationWarning>,
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Estimates parameters, repairs and inverts the covariance, and derives the
/// weight profile from the masks selected by `scope`.
pub fn fit(train: &MaskedDataset, scope: WeightScope, test: Option<&MaskedDataset>) -> Result<WldaModel> {
    let params = fit_params(train)?;
    let rates = match (scope, test) {
        (WeightScope::TrainPlusTest, Some(test)) => feature_missing_rates(&[train, test])?,
        _ => feature_missing_rates(&[train])?,
    };
    let profile = build_weight_profile(&rates)?;
    WldaModel::from_parts(params, profile, scope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_model(weights_rates: &[f64], priors: &[f64]) -> WldaModel {
        let params = ModelParams {
            means: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]),
            covariance: DMatrix::identity(2, 2),
            priors: priors.to_vec(),
            class_counts: vec![1, 1],
            class_names: vec!["a".into(), "b".into()],
            feature_names: vec!["x".into(), "y".into()],
            warnings: vec![],
        };
        WldaModel::from_parts(
            params,
            build_weight_profile(weights_rates).unwrap(),
            WeightScope::TrainOnly,
        )
        .unwrap()
    }

    #[test]
    fn weights_follow_inverse_observed_rate() {
        assert_eq!(
            build_weight_profile(&[0.0, 0.0, 0.0]).unwrap().weights(),
            &[1.0, 1.0, 1.0]
        );
        assert_eq!(build_weight_profile(&[0.5]).unwrap().weights(), &[2.0]);
        assert_eq!(build_weight_profile(&[1.0]).unwrap().weights(), &[0.0]);
        assert!(build_weight_profile(&[1.5]).is_err());
        assert!(build_weight_profile(&[-0.1]).is_err());
    }

    #[test]
    fn weight_matrix_is_masked_weights() {
        let id = build_weight_profile(&[0.0, 0.0]).unwrap();
        assert_eq!(weight_matrix(&[true, true], &id).unwrap(), vec![1.0, 1.0]);
        let prof = build_weight_profile(&[0.0, 0.5, 0.75]).unwrap();
        assert_eq!(weight_matrix(&[true, false, true], &prof).unwrap(), vec![1.0, 0.0, 4.0]);
        assert_eq!(weight_matrix(&[false; 3], &prof).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn hand_computed_scores() {
        let half = 0.5f64.ln();
        let m = toy_model(&[0.0, 0.5], &[half, half]);
        let x = [0.5, f64::NAN];
        let mask = [true, false];
        assert_relative_eq!(m.score(&x, &mask, 0).unwrap(), half - 0.125, epsilon = 1e-15);
        assert_relative_eq!(m.score(&x, &mask, 1).unwrap(), half - 1.125, epsilon = 1e-15);
        assert_eq!(m.predict(&x, &mask).unwrap(), 0);
    }

    #[test]
    fn tie_goes_to_smallest_class() {
        let half = 0.5f64.ln();
        let m = toy_model(&[0.0, 0.5], &[half, half]);
        let s = m.scores(&[1.0, 7.0], &[true, false]).unwrap();
        assert_eq!(s[0], s[1]);
        assert_eq!(m.predict(&[1.0, 7.0], &[true, false]).unwrap(), 0);
    }

    #[test]
    fn empty_mask_scores_are_priors() {
        let priors = [0.5f64.ln(), 0.3f64.ln(), 0.2f64.ln()];
        let params = ModelParams {
            means: DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]),
            covariance: DMatrix::identity(1, 1),
            priors: priors.to_vec(),
            class_counts: vec![5, 3, 2],
            class_names: vec!["a".into(), "b".into(), "c".into()],
            feature_names: vec!["x".into()],
            warnings: vec![],
        };
        let m = WldaModel::from_parts(params, build_weight_profile(&[0.3]).unwrap(), WeightScope::TrainOnly).unwrap();
        assert_eq!(m.scores(&[f64::NAN], &[false]).unwrap(), priors.to_vec());
        assert_eq!(m.predict(&[f64::NAN], &[false]).unwrap(), 0);
    }

    #[test]
    fn invalid_class_is_rejected() {
        let m = toy_model(&[0.0, 0.0], &[0.5f64.ln(); 2]);
        assert!(matches!(
            m.score(&[0.0, 0.0], &[true, true], 2),
            Err(Error::InvalidClass { class: 2, .. })
        ));
        assert!(m.boundary(1, 1, &[true, true]).is_err());
    }

    #[test]
    fn boundary_reduces_to_lda_weights() {
        let m = toy_model(&[0.0, 0.0], &[0.5f64.ln(); 2]);
        let b = m.boundary(0, 1, &[true, true]).unwrap();
        // Σ = I so u = μ0 - μ1 and u0 = ½(|μ1|² - |μ0|²) with no prior term
        assert_eq!(b.u, vec![-2.0, 0.0]);
        assert_eq!(b.u0, 2.0);
        assert_eq!(b.normalized_u, Some(vec![-1.0, 0.0]));
    }

    #[test]
    fn zero_intercept_leaves_normalisation_undefined() {
        let params = ModelParams {
            means: DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]),
            covariance: DMatrix::identity(1, 1),
            priors: vec![0.5f64.ln(); 2],
            class_counts: vec![1, 1],
            class_names: vec!["a".into(), "b".into()],
            feature_names: vec!["x".into()],
            warnings: vec![],
        };
        let m = WldaModel::from_parts(params, build_weight_profile(&[0.0]).unwrap(), WeightScope::TrainOnly).unwrap();
        assert_eq!(m.boundary(0, 1, &[true]).unwrap().normalized_u, None);
    }

    #[test]
    fn closed_form_moments() {
        let prof = build_weight_profile(&[0.0; 4]).unwrap();
        let r = theoretical_moments(&prof, &[true; 4], 0, &[0.0]).unwrap();
        assert_eq!((r.expectation, r.variance, r.bias), (-2.0, 2.0, 0.0));

        let prof = build_weight_profile(&[0.2, 0.5, 0.75]).unwrap();
        let prior = (1.0f64 / 3.0).ln();
        let r = theoretical_moments(&prof, &[true, true, false], 0, &[prior]).unwrap();
        assert_relative_eq!(r.expectation, prior - 2.78125, epsilon = 1e-12);
        assert_relative_eq!(r.expectation, -3.879862, epsilon = 1e-6);
        assert_relative_eq!(r.variance, 0.5 * (2.44140625 + 16.0), epsilon = 1e-12);
        assert_relative_eq!(r.bias, -1.28125, epsilon = 1e-12);

        let r = theoretical_moments(&prof, &[false; 3], 0, &[prior]).unwrap();
        assert_eq!((r.expectation, r.variance, r.bias), (prior, 0.0, 1.5));
    }

    #[test]
    fn quadratic_form_examples() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_eq!(
            quadratic_form_moments(&i3, &DVector::zeros(3), &i3).unwrap(),
            (3.0, 6.0)
        );
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(quadratic_form_moments(&z, &DVector::zeros(3), &i3).unwrap(), (0.0, 0.0));
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let mu = DVector::from_vec(vec![1.0, 1.0]);
        let r = quadratic_form_moments(&a, &mu, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(r, (2.0, 6.0));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(quadratic_form_moments(&asym, &mu, &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn exact_moments_match_closed_form_for_diagonal_covariance() {
        let params = ModelParams {
            means: DMatrix::zeros(2, 3),
            covariance: DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5, 3.0])),
            priors: vec![0.5f64.ln(); 2],
            class_counts: vec![1, 1],
            class_names: vec!["a".into(), "b".into()],
            feature_names: vec!["x".into(), "y".into(), "z".into()],
            warnings: vec![],
        };
        let profile = build_weight_profile(&[0.1, 0.4, 0.7]).unwrap();
        let m = WldaModel::from_parts(params, profile, WeightScope::TrainOnly).unwrap();
        let mask = [true, false, true];
        let exact = m.exact_moments(&mask, 1).unwrap();
        let closed = m.theoretical_moments(&mask, 1).unwrap();
        assert_relative_eq!(exact.expectation, closed.expectation, epsilon = 1e-12);
        assert_relative_eq!(exact.variance, closed.variance, epsilon = 1e-12);
        assert_relative_eq!(exact.bias, closed.bias, epsilon = 1e-12);
    }

    #[test]
    fn document_round_trip() {
        let m = toy_model(&[0.1, 0.5], &[0.4f64.ln(), 0.6f64.ln()]);
        let doc = m.to_document();
        let text = serde_json::to_string(&doc).unwrap();
        let back = WldaModel::from_document(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
