#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use wlda::{load_csv, CsvOptions, MaskedDataset};

pub fn iris_path() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv"))
}

pub fn iris() -> MaskedDataset {
    load_csv(&iris_path(), &CsvOptions::with_label("species")).expect("bundled iris loads")
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Dense SPD matrix `AAᵀ + shift·I` with standard normal `A`.
pub fn random_spd<R: Rng>(rng: &mut R, p: usize, shift: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| normal(rng));
    &a * a.transpose() + DMatrix::identity(p, p) * shift
}

pub fn random_vector<R: Rng>(rng: &mut R, p: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(p, |_, _| scale * normal(rng))
}

/// Draws from `N(mean, cov)` through a Cholesky factor.
pub struct Gaussian {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Self {
        let chol = cov.clone().cholesky().expect("covariance is SPD").l();
        Self { mean, chol }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = random_vector(rng, self.mean.len(), 1.0);
        &self.mean + &self.chol * z
    }
}

/// Sample mean, variance, and the standard errors of both.
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    Moments {
        mean,
        var,
        se_mean: (var / n).sqrt(),
        se_var: ((m4 - m2 * m2) / n).sqrt(),
    }
}
