use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::eigen::EigenSystem;
use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::stats::{Accumulator, Estimate};

/// `C_ij = (φ_i, (-Δ+m0²)^{-1} φ_j)` over the first `k` basis functions.
pub fn free_field_covariance(grid: &GridSpec, m0sq: f64, basis: &EigenSystem, k: usize) -> Result<DMatrix<f64>> {
    if !(m0sq.is_finite() && m0sq > 0.0) {
        return Err(Error::invalid(format!("m0^2 must be > 0, got {m0sq}")));
    }
    if k == 0 || k > basis.vectors.len() {
        return Err(Error::invalid(format!(
            "need {k} basis functions, eigen system carries {}",
            basis.vectors.len()
        )));
    }
    let g: Vec<Vec<f64>> = basis.vectors[..k]
        .iter()
        .map(|v| grid.apply_multiplier(v, |k2| 1.0 / (k2 + m0sq)))
        .collect::<Result<_>>()?;
    let mut c = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            c[(i, j)] = grid.inner(&basis.vectors[i], &g[j]);
        }
    }
    let c = (&c + c.transpose()) * 0.5;
    let min = SymmetricEigen::new(c.clone()).eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::numerical(format!("free-field covariance is not positive definite (min eigenvalue {min:e})")));
    }
    Ok(c)
}

/// `exp(-½ φᵀ C φ)` for basis coefficients `φ`.
pub fn gaussian_characteristic(c: &DMatrix<f64>, phi: &[f64]) -> f64 {
    let k = phi.len().min(c.nrows());
    let mut q = 0.0;
    for i in 0..k {
        for j in 0..k {
            q += phi[i] * c[(i, j)] * phi[j];
        }
    }
    (-0.5 * q).exp()
}

/// Smallest eigenvalue of the Hermitian Gram matrix `[χ(φ_i - φ_j)]`.
pub fn pd_gram_check<F>(chf: F, tests: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&[f64]) -> Complex64,
{
    let k = tests.len();
    if k == 0 {
        return Err(Error::invalid("Gram check needs at least one test function"));
    }
    // embed the k×k Hermitian matrix as the real symmetric [[Re, -Im], [Im, Re]]
    let mut m = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let diff: Vec<f64> = tests[i].iter().zip(&tests[j]).map(|(a, b)| a - b).collect();
            let z = chf(&diff);
            m[(i, j)] = z.re;
            m[(i + k, j + k)] = z.re;
            m[(i, j + k)] = -z.im;
            m[(i + k, j)] = z.im;
        }
    }
    let m = (&m + m.transpose()) * 0.5;
    Ok(SymmetricEigen::new(m).eigenvalues.min())
}

/// Slack `2|χ(φ) - 1| - |χ(ψ+φ) - χ(ψ)|²`, nonnegative for characteristic
/// functionals.
pub fn continuity_slack<F>(chf: F, psi: &[f64], phi: &[f64]) -> f64
where
    F: Fn(&[f64]) -> Complex64,
{
    let sum: Vec<f64> = psi.iter().zip(phi).map(|(a, b)| a + b).collect();
    2.0 * (chf(phi) - 1.0).norm() - (chf(&sum) - chf(psi)).norm_sqr()
}

/// Estimate of `E z⁴ - 3 (E z²)²` with a delta-method standard error.
pub fn fourth_moment_gap(z: &[f64]) -> Estimate {
    let n = z.len();
    let m2 = z.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let m4 = z.iter().map(|v| v.powi(4)).sum::<f64>() / n as f64;
    let infl: Accumulator = z.iter().map(|v| v.powi(4) - 6.0 * m2 * v * v).collect();
    Estimate {
        value: m4 - 3.0 * m2 * m2,
        stderr: infl.estimate().stderr,
        nsamples: n as u64,
    }
}
