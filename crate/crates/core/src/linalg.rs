//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry tolerance used by every symmetric-input contract.
const SYMMETRY_TOL: f64 = 1e-10;

pub fn is_symmetric(a: &DMatrix<f64>) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    (0..n).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= SYMMETRY_TOL * scale))
}

pub fn ensure_symmetric(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if is_symmetric(a) {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} must be square and symmetric")))
    }
}

/// Eigenvalue-clipping repair to a strictly positive definite matrix.
///
/// The floor is `1e-6 * trace / p` measured on the *repaired* matrix, so a
/// repaired matrix satisfies its own floor and a second pass is a no-op.
/// Inputs whose smallest eigenvalue already meets the floor are returned
/// unchanged.
pub fn repair_pd(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_symmetric(cov, "covariance")?;
    let p = cov.nrows();
    if p == 0 {
        return Ok(cov.clone());
    }
    let eig = SymmetricEigen::new(cov.clone());
    let floor = pd_floor(cov.trace(), p);
    let min = eig.eigenvalues.min();
    // slack absorbs eigensolver rounding on already-repaired matrices
    if min >= floor * (1.0 - 1e-6) && min > 0.0 {
        return Ok(cov.clone());
    }

    let target = clip_target(eig.eigenvalues.as_slice(), p);
    let clipped = eig.eigenvalues.map(|l| l.max(target));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// `1e-6 * trace / p`.
pub fn pd_floor(trace: f64, p: usize) -> f64 {
    1e-6 * trace / p as f64
}

/// Smallest eigenvalue target `t` with `t = 1e-6 * trace(clipped) / p`.
fn clip_target(eigenvalues: &[f64], p: usize) -> f64 {
    // Fixed point of t = 1e-6 (S + k t) / p, where S sums the eigenvalues
    // that survive and k counts the clipped ones. Iterate over k since the
    // survivor set depends on t.
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let c = 1e-6 / p as f64;
    for k in 1..=p {
        let kept: f64 = sorted[k..].iter().sum();
        let t = c * kept / (1.0 - c * k as f64);
        let below_ok = sorted[k - 1] < t;
        let above_ok = k == p || sorted[k] >= t;
        if below_ok && above_ok && t > 0.0 {
            return t;
        }
    }
    // nothing positive to scale against
    1e-6
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Contract("matrix is not positive definite".into()))?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

/// `xᵀ A x` for a symmetric `a`.
pub fn quad_form(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(a * x))
}
