use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{form_exact_small, FormSpec};
use crate::measures::{DiscreteModel, MeasureModel};
use crate::rng::StreamRng;
use crate::seqspace::CylinderFunction;

use super::rate::coordinate_rate;

/// Exact rate matrix of the coordinate-jump chain on a finite joint law.
pub fn rate_matrix(model: &DiscreteModel, alpha: f64, delta: f64) -> DMatrix<f64> {
    let s = model.states();
    let mut q = DMatrix::zeros(s, s);
    for x in 0..s {
        let idx = model.decode(x);
        for (i, axis) in model.axes().iter().enumerate() {
            let mut j = idx.clone();
            let cond: Vec<f64> = (0..axis.len())
                .map(|a| {
                    j[i] = a;
                    model.mass(model.encode(&j))
                })
                .collect();
            let z: f64 = cond.iter().sum();
            if z == 0.0 {
                continue;
            }
            for (a, ya) in axis.iter().enumerate() {
                let t = (ya - axis[idx[i]]).abs();
                if t > delta && cond[a] > 0.0 {
                    j[i] = a;
                    q[(x, model.encode(&j))] += t.powf(-(alpha + 1.0)) * cond[a] / z;
                }
            }
        }
        let out: f64 = q.row(x).iter().sum();
        q[(x, x)] = -out;
    }
    q
}

/// Cylinder function given by its table of values on the model's states.
pub fn table_function(model: &DiscreteModel, values: Vec<f64>) -> Result<CylinderFunction<f64>> {
    if values.len() != model.states() {
        return Err(Error::invalid("table length differs from the state count"));
    }
    let m = model.clone();
    let sup = values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let base = Arc::new(move |x: &[f64]| match m.locate(x, None) {
        Ok(idx) => values[m.encode(&idx)],
        Err(_) => f64::NAN,
    });
    Ok(CylinderFunction::new("table", model.dim(), base, f64::INFINITY, sup))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversibilityReport {
    pub states: usize,
    pub alpha: f64,
    pub delta: f64,
    pub max_balance_violation: f64,
    pub max_identity_rel_error: f64,
    pub max_row_rate_error: f64,
    pub functions: usize,
    pub pass: bool,
}

/// Detailed balance of the exact rate matrix, the identity
/// `-⟨Qu, u⟩_μ = ½ E(u, u)` for random tables `u`, and agreement of row
/// sums with `coordinate_rate`.
pub fn reversibility_oracle(
    model: &DiscreteModel,
    alpha: f64,
    delta: f64,
    nfunctions: usize,
    budget: u128,
    rng: &mut StreamRng,
) -> Result<ReversibilityReport> {
    let s = model.states();
    let cost = (s as u128).pow(2);
    if cost > budget {
        return Err(Error::ResourceLimit {
            what: "rate matrix".into(),
            requested: cost,
            budget,
        });
    }
    let spec = FormSpec::new(alpha, delta, (0..model.dim()).collect(), 1, 1)?;
    let q = rate_matrix(model, alpha, delta);
    let mut balance = 0.0f64;
    for x in 0..s {
        for y in 0..s {
            let v = (model.mass(x) * q[(x, y)] - model.mass(y) * q[(y, x)]).abs();
            balance = balance.max(v);
        }
    }
    let wrapped = MeasureModel::Discrete(model.clone());
    let mut row_err = 0.0f64;
    for x in (0..s).filter(|&x| model.mass(x) > 0.0) {
        let p = model.point(x);
        let z: f64 = (0..model.dim())
            .map(|i| coordinate_rate(&wrapped, &p, i, alpha, delta))
            .sum::<Result<f64>>()?;
        row_err = row_err.max((z + q[(x, x)]).abs() / z.max(1e-300));
    }
    let mut ident = 0.0f64;
    for _ in 0..nfunctions {
        let vals: Vec<f64> = (0..s).map(|_| rng.random_range(-1.0..1.0)).collect();
        let qu = &q * nalgebra::DVector::from_column_slice(&vals);
        let lhs: f64 = -(0..s).map(|x| model.mass(x) * vals[x] * qu[x]).sum::<f64>();
        let u = table_function(model, vals)?;
        let e = form_exact_small(model, &u, &u, &spec, budget)?.value;
        let rhs = 0.5 * e;
        ident = ident.max((lhs - rhs).abs() / rhs.abs().max(1e-300));
    }
    Ok(ReversibilityReport {
        states: s,
        alpha,
        delta,
        max_balance_violation: balance,
        max_identity_rel_error: ident,
        max_row_rate_error: row_err,
        functions: nfunctions,
        pass: balance < 1e-12 && ident < 1e-10 && row_err < 1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    pub n: usize,
    pub rate: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// One-sample Kolmogorov–Smirnov test of `samples` against `Exp(rate)`,
/// passing at significance `1e-3`.
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsReport> {
    if samples.is_empty() || !(rate > 0.0) {
        return Err(Error::invalid("KS test needs samples and a positive rate"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - k as f64 / n).max((k as f64 + 1.0) / n - f)
        })
        .fold(0.0f64, f64::max);
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    let p_value = p.clamp(0.0, 1.0);
    Ok(KsReport {
        n: xs.len(),
        rate,
        statistic: d,
        p_value,
        pass: p_value >= 1e-3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Atoms;
    use crate::rng::Streams;

    #[test]
    fn three_atom_matrix_by_hand() {
        let a = Atoms::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3]).unwrap();
        let m = DiscreteModel::product(&[a]).unwrap();
        let q = rate_matrix(&m, 1.0, 0.5);
        let third = 1.0 / 3.0;
        assert!((q[(0, 1)] - third).abs() < 1e-15);
        assert!((q[(0, 2)] - third / 4.0).abs() < 1e-15);
        assert!((q[(1, 0)] - third).abs() < 1e-15);
        assert!((q[(1, 1)] + 2.0 * third).abs() < 1e-15);
        let r = reversibility_oracle(&m, 1.0, 0.5, 5, 1000, &mut Streams::new(1).stream(&[0])).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn correlated_joint_law() {
        let axes = vec![vec![-1.0, 0.5, 2.0]; 3];
        let mut rng = Streams::new(2).stream(&[0]);
        let pmf: Vec<f64> = (0..27).map(|_| rng.random_range(0.1..1.0)).collect();
        let m = DiscreteModel::new(axes, pmf).unwrap();
        let r = reversibility_oracle(&m, 1.3, 0.2, 20, 100_000, &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(reversibility_oracle(&m, 1.3, 0.2, 1, 100, &mut rng).is_err());
    }

    #[test]
    fn ks_accepts_exponential_and_rejects_shifted() {
        let mut rng = Streams::new(3).stream(&[0]);
        let xs: Vec<f64> = (0..5000).map(|_| -(1.0 - rng.random::<f64>()).ln() / 2.0).collect();
        assert!(ks_exponential(&xs, 2.0).unwrap().pass);
        assert!(!ks_exponential(&xs, 3.0).unwrap().pass);
    }
}
