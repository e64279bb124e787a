use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::grid::GridSpec;
use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-8;

/// Leading eigenpairs of the discretized `H^{-1}`.
///
/// Eigenvectors are grid functions normalized in `⟨f, g⟩ = h^d Σ f g`.
#[derive(Debug, Clone, Serialize)]
pub struct EigenSystem {
    pub grid: GridSpec,
    pub lambdas: Vec<f64>,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Factor the raw spectrum was divided by so that `λ_1 ≤ 1`.
    pub rescale: f64,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Partial sums `Σ_{i≤k} λ_i²`.
    pub fn partial_sums_sq(&self) -> Vec<f64> {
        self.lambdas
            .iter()
            .scan(0.0, |s, l| {
                *s += l * l;
                Some(*s)
            })
            .collect()
    }

    /// Eigenvalues only, e.g. from an exported table.
    pub fn from_table(grid: GridSpec, lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::invalid("empty eigen table"));
        }
        if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) || lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("eigenvalues must be positive and non-increasing"));
        }
        let k = lambdas.len();
        Ok(Self {
            grid,
            lambdas,
            vectors: Vec::new(),
            residuals: vec![0.0; k],
            rescale: 1.0,
        })
    }
}

/// Dense matrix of a linear grid operator, built column by column.
pub fn operator_matrix<F>(grid: &GridSpec, apply: F) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = grid.len();
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = apply(&e)?;
        a.set_column(j, &nalgebra::DVector::from_vec(col));
        e[j] = 0.0;
    }
    Ok(a)
}

/// Top-`k` eigenpairs of the discretized `H^{-1}` on `grid`.
pub fn eigensystem(grid: &GridSpec, k: usize) -> Result<EigenSystem> {
    let n = grid.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("requested {k} eigenpairs from a grid of {n} points")));
    }
    let a = operator_matrix(grid, |f| grid.apply_h_inverse(f))?;
    let sym = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numerical("symmetric eigensolver did not converge"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let top = eig.eigenvalues[order[0]];
    let rescale = top.max(1.0);
    let norm = grid.cell().sqrt().recip();
    let mut lambdas = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let lam = eig.eigenvalues[idx];
        if !(lam > 0.0) {
            return Err(Error::numerical(format!("non-positive eigenvalue {lam:e} among the top {k}")));
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().map(|x| x * norm).collect();
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * peak) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        let hv = grid.apply_h_inverse(&v)?;
        let r: Vec<f64> = hv.iter().zip(&v).map(|(a, b)| a - lam * b).collect();
        residuals.push(grid.inner(&r, &r).sqrt() / rescale);
        lambdas.push(lam / rescale);
        vectors.push(v);
    }
    if let Some(bad) = residuals.iter().position(|r| !(*r < RESIDUAL_TOL)) {
        return Err(Error::numerical(format!(
            "eigenpair {} has residual {:e} (all residuals: {:?})",
            bad + 1,
            residuals[bad],
            residuals
        )));
    }
    Ok(EigenSystem {
        grid: *grid,
        lambdas,
        vectors,
        residuals,
        rescale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_eigenpairs() {
        let g = GridSpec::new(1, 8.0, 64).unwrap();
        let e = eigensystem(&g, 20).unwrap();
        assert!(e.lambdas.iter().all(|l| *l > 0.0));
        assert!(e.lambdas.windows(2).all(|w| w[0] >= w[1]));
        assert!(e.residuals.iter().all(|r| *r < 1e-8));
        for i in 0..5 {
            for j in 0..5 {
                let ip = g.inner(&e.vectors[i], &e.vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-8);
            }
        }
        let ps = e.partial_sums_sq();
        assert!(ps.windows(2).all(|w| w[1] >= w[0]));
        assert!(e.lambdas[0] <= 1.0);
    }

    #[test]
    fn from_table_validates() {
        let g = GridSpec::new(1, 8.0, 64).unwrap();
        assert!(EigenSystem::from_table(g, vec![]).is_err());
        assert!(EigenSystem::from_table(g, vec![0.5, 0.6]).is_err());
        assert!(EigenSystem::from_table(g, vec![0.5, 0.25]).is_ok());
    }
}
