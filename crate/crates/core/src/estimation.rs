//! Direct parameter estimation from incomplete data.
//!
//! Class means and marginal variances come from each feature's observed
//! values. Every off-diagonal covariance entry is the maximiser of the pooled
//! bivariate-normal log-likelihood over the rows observing both features, with
//! the means and marginal variances held at their univariate estimates.
//! Nothing is imputed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::MaskedDataset;
use crate::error::{Error, Result};

/// Class means, shared covariance, log priors and class sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// G×p.
    pub means: DMatrix<f64>,
    /// p×p, shared by all classes.
    pub covariance: DMatrix<f64>,
    /// `log(n_g / n)`.
    pub priors: Vec<f64>,
    pub class_counts: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub warnings: Vec<EstimationWarning>,
}

impl ModelParams {
    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    pub fn n_features(&self) -> usize {
        self.covariance.nrows()
    }
}

/// Non-fatal conditions met while estimating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimationWarning {
    /// Fewer than two rows observe both features; the entry was set to 0.
    SparsePair { j: usize, k: usize, overlap: usize },
    /// Root finding degenerated and the bounded search was used.
    PairFallback { j: usize, k: usize },
}

impl std::fmt::Display for EstimationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::SparsePair { j, k, overlap } => {
                write!(f, "features ({j}, {k}) overlap in {overlap} rows; covariance set to 0")
            }
            Self::PairFallback { j, k } => {
                write!(f, "features ({j}, {k}) used bounded search for covariance")
            }
        }
    }
}

/// Class-mean-centred sufficient statistics over rows observing both
/// features of a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub m: usize,
    pub s_jj: f64,
    pub s_kk: f64,
    pub s_jk: f64,
}

pub fn estimate_means(train: &MaskedDataset) -> Result<DMatrix<f64>> {
    let labels = train.require_labels("mean estimation")?;
    let g = train.n_classes();
    let p = train.n_features();
    let mut sums = DMatrix::<f64>::zeros(g, p);
    let mut counts = DMatrix::<usize>::zeros(g, p);
    for (i, &class) in labels.iter().enumerate() {
        for j in 0..p {
            if let Some(v) = train.value(i, j) {
                sums[(class, j)] += v;
                counts[(class, j)] += 1;
            }
        }
    }
    for class in 0..g {
        for feature in 0..p {
            let n = counts[(class, feature)];
            if n == 0 {
                return Err(Error::EmptyCell { class, feature });
            }
            sums[(class, feature)] /= n as f64;
        }
    }
    Ok(sums)
}

/// Pooled within-class MLE variance of every feature over its observed values.
pub fn estimate_diagonal(train: &MaskedDataset, means: &DMatrix<f64>) -> Result<Vec<f64>> {
    let labels = train.require_labels("variance estimation")?;
    let p = train.n_features();
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let mut ss = 0.0;
        let mut scale = 0.0;
        let mut count = 0usize;
        for (i, &class) in labels.iter().enumerate() {
            if let Some(v) = train.value(i, j) {
                let d = v - means[(class, j)];
                ss += d * d;
                scale += v * v;
                count += 1;
            }
        }
        if count < 2 {
            return Err(Error::TooFewObservations {
                feature: j,
                observed: count,
            });
        }
        let var = ss / count as f64;
        let scale = (scale / count as f64).max(f64::MIN_POSITIVE);
        if var.is_nan() || var <= 1e-24 * scale {
            return Err(Error::DegenerateVariance { feature: j });
        }
        out.push(var);
    }
    Ok(out)
}

pub fn pair_stats(train: &MaskedDataset, means: &DMatrix<f64>, j: usize, k: usize) -> Result<PairStats> {
    let labels = train.require_labels("pair statistics")?;
    let mut stats = PairStats {
        m: 0,
        s_jj: 0.0,
        s_kk: 0.0,
        s_jk: 0.0,
    };
    for (i, &class) in labels.iter().enumerate() {
        if let (Some(xj), Some(xk)) = (train.value(i, j), train.value(i, k)) {
            let dj = xj - means[(class, j)];
            let dk = xk - means[(class, k)];
            stats.m += 1;
            stats.s_jj += dj * dj;
            stats.s_kk += dk * dk;
            stats.s_jk += dj * dk;
        }
    }
    Ok(stats)
}

/// Outcome of a pairwise covariance fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    pub covariance: f64,
    /// True when the cubic had no usable interior root.
    pub used_fallback: bool,
}

/// Maximises
///
/// ```text
/// L(σ) = -(m/2) log(σjj σkk - σ²) - (sjj σkk - 2 sjk σ + skk σjj) / (2 (σjj σkk - σ²))
/// ```
///
/// over the open interval `|σ| < sqrt(σjj σkk)`. Ties go to the smaller |σ|.
pub fn estimate_pair_covariance(stats: &PairStats, sjj_hat: f64, skk_hat: f64) -> Result<f64> {
    fit_pair(stats, sjj_hat, skk_hat).map(|e| e.covariance)
}

pub fn fit_pair(stats: &PairStats, sjj_hat: f64, skk_hat: f64) -> Result<PairEstimate> {
    if stats.m < 2 {
        return Err(Error::InsufficientPairs { m: stats.m });
    }
    if !(sjj_hat > 0.0 && skk_hat > 0.0) {
        return Err(Error::Contract("marginal variances must be strictly positive".into()));
    }
    // Substitute σ = c t with c = sqrt(σjj σkk); the stationarity condition
    // becomes the monic cubic t³ - r t² + (q - 1) t - r = 0 on (-1, 1).
    let m = stats.m as f64;
    let c = (sjj_hat * skk_hat).sqrt();
    let r = stats.s_jk / (m * c);
    let q = stats.s_jj / (m * sjj_hat) + stats.s_kk / (m * skk_hat);
    let objective = |t: f64| scaled_log_likelihood(t, q, r);

    let mut best: Option<(f64, f64)> = None;
    for t in real_cubic_roots(-r, q - 1.0, -r) {
        let t = polish_root(t, r, q);
        if !(t > -1.0 && t < 1.0) {
            continue;
        }
        let value = objective(t);
        if !value.is_finite() {
            continue;
        }
        best = match best {
            None => Some((t, value)),
            Some((bt, bv)) => {
                let tie = (value - bv).abs() <= 1e-12 * bv.abs().max(1.0);
                if (tie && t.abs() < bt.abs()) || (!tie && value > bv) {
                    Some((t, value))
                } else {
                    Some((bt, bv))
                }
            }
        };
    }
    let (t, used_fallback) = match best {
        Some((t, _)) => (t, false),
        None => (bounded_maximise(objective), true),
    };
    Ok(PairEstimate {
        covariance: c * t,
        used_fallback,
    })
}

/// `L` up to an additive constant and the positive factor `m/2`, in the
/// scaled variable `t = σ / sqrt(σjj σkk)`.
fn scaled_log_likelihood(t: f64, q: f64, r: f64) -> f64 {
    let d = 1.0 - t * t;
    if d <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -d.ln() - (q - 2.0 * r * t) / d
}

fn polish_root(mut t: f64, r: f64, q: f64) -> f64 {
    for _ in 0..4 {
        let f = ((t - r) * t + (q - 1.0)) * t - r;
        let df = (3.0 * t - 2.0 * r) * t + (q - 1.0);
        if df == 0.0 {
            break;
        }
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        t -= step;
        if step.abs() <= 1e-16 * t.abs().max(1.0) {
            break;
        }
    }
    t
}

/// Grid scan followed by golden-section refinement on (-1, 1).
fn bounded_maximise(f: impl Fn(f64) -> f64) -> f64 {
    const N: usize = 2000;
    let lo = -1.0 + 1e-12;
    let hi = 1.0 - 1e-12;
    let h = (hi - lo) / N as f64;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=N {
        let v = f(lo + h * i as f64);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = (lo + h * best_i.saturating_sub(1) as f64).max(lo);
    let mut b = (lo + h * (best_i + 1) as f64).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
        if b - a < 1e-15 {
            break;
        }
    }
    let t = 0.5 * (a + b);
    t.clamp(lo, hi)
}

/// Real roots of `t³ + b t² + c t + d`.
pub(crate) fn real_cubic_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    // depressed cubic y³ + p y + q with t = y - b/3
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let mut roots = Vec::with_capacity(3);
    if p.abs() < 1e-300 {
        roots.push(-q.cbrt());
    } else {
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        if disc > 0.0 {
            let sq = disc.sqrt();
            // avoid cancellation: pick the larger-magnitude cube
            let u = (-q / 2.0 - q.signum() * sq).cbrt();
            let y = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
            roots.push(y);
        } else {
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            for k in 0..3 {
                roots.push(m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos());
            }
        }
    }
    roots.into_iter().map(|y| y - shift).collect()
}

/// Pairwise-MLE covariance. Pairs with fewer than two overlapping rows get 0
/// and a [`EstimationWarning::SparsePair`].
pub fn assemble_covariance(
    train: &MaskedDataset,
    means: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Vec<EstimationWarning>)> {
    let diag = estimate_diagonal(train, means)?;
    let p = diag.len();
    let mut cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
    let mut warnings = Vec::new();
    for j in 0..p {
        for k in (j + 1)..p {
            let stats = pair_stats(train, means, j, k)?;
            let value = match fit_pair(&stats, diag[j], diag[k]) {
                Ok(est) => {
                    if est.used_fallback {
                        warnings.push(EstimationWarning::PairFallback { j, k });
                    }
                    est.covariance
                }
                Err(Error::InsufficientPairs { m }) => {
                    log::warn!("features ({j}, {k}) overlap in {m} rows; covariance set to 0");
                    warnings.push(EstimationWarning::SparsePair { j, k, overlap: m });
                    0.0
                }
                Err(e) => return Err(e),
            };
            cov[(j, k)] = value;
            cov[(k, j)] = value;
        }
    }
    Ok((cov, warnings))
}

/// `log(n_g / n)` for each class.
pub fn log_priors(class_counts: &[usize]) -> Vec<f64> {
    let n: usize = class_counts.iter().sum();
    class_counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect()
}

/// Means, pairwise-MLE covariance (not yet repaired) and log priors.
pub fn fit_params(train: &MaskedDataset) -> Result<ModelParams> {
    let labels = train.require_labels("parameter estimation")?;
    if labels.is_empty() {
        return Err(Error::Empty("training set has no rows".into()));
    }
    let means = estimate_means(train)?;
    let (covariance, warnings) = assemble_covariance(train, &means)?;
    let class_counts = train.class_counts().expect("labels checked above");
    let priors = log_priors(&class_counts);
    Ok(ModelParams {
        means,
        covariance,
        priors,
        class_counts,
        class_names: train.class_names().to_vec(),
        feature_names: train.feature_names().to_vec(),
        warnings,
    })
}
