use serde::Serialize;

use super::estimate::FormSpec;
use super::kernel::{coordinate_differences, kernel_term};
use crate::error::{Error, Result};
use crate::measures::{Atoms, DiscreteModel};
use crate::quad::integrate;
use crate::seqspace::CylinderFunction;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactForm {
    pub value: f64,
    /// `(1-based coordinate, E^(i))`.
    pub per_coordinate: Vec<(usize, f64)>,
}

/// Exact δ-truncated `E(u, v)` on a finite joint law by enumerating
/// `x`, `y`, `y'`.
///
/// `budget` caps the number of kernel evaluations `Σ_i states · K_i²`.
pub fn form_exact_small(
    model: &DiscreteModel,
    u: &CylinderFunction<f64>,
    v: &CylinderFunction<f64>,
    spec: &FormSpec,
    budget: u128,
) -> Result<ExactForm> {
    spec.validate()?;
    let n = model.dim();
    if u.depth() > n || v.depth() > n {
        return Err(Error::invalid("function reads more coordinates than the model has"));
    }
    if let Some(&bad) = spec.coords.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("coordinate {} out of range 1..{n}", bad + 1)));
    }
    let cost: u128 = spec
        .coords
        .iter()
        .map(|&i| model.states() as u128 * (model.axes()[i].len() as u128).pow(2))
        .sum();
    if cost > budget {
        return Err(Error::ResourceLimit {
            what: "exact form enumeration".into(),
            requested: cost,
            budget,
        });
    }
    let mut per_coordinate = Vec::with_capacity(spec.coords.len());
    for &i in &spec.coords {
        per_coordinate.push((i + 1, coordinate_exact(model, u, v, i, spec)?));
    }
    let value = per_coordinate.iter().map(|(_, e)| e).sum();
    Ok(ExactForm { value, per_coordinate })
}

fn coordinate_exact(
    model: &DiscreteModel,
    u: &CylinderFunction<f64>,
    v: &CylinderFunction<f64>,
    i: usize,
    spec: &FormSpec,
) -> Result<f64> {
    let axis = &model.axes()[i];
    let k = axis.len();
    let mut total = 0.0;
    for s in 0..model.states() {
        let w = model.mass(s);
        if w == 0.0 {
            continue;
        }
        let mut idx = model.decode(s);
        let cond: Vec<f64> = (0..k)
            .map(|a| {
                idx[i] = a;
                model.mass(model.encode(&idx))
            })
            .collect();
        let z: f64 = cond.iter().sum();
        let mut x = model.point(s);
        let mut inner = 0.0;
        for a in 0..k {
            for b in 0..k {
                let (y, yp) = (axis[a], axis[b]);
                if (y - yp).abs() <= spec.delta || cond[a] == 0.0 || cond[b] == 0.0 {
                    continue;
                }
                let (du, dv) = coordinate_differences(u, v, i, y, yp, &mut x);
                inner += cond[a] * cond[b] * kernel_term(du, dv, y, yp, spec.alpha);
            }
        }
        total += w * inner / (z * z);
    }
    Ok(total)
}

/// Standard normal discretized to `n` equal cells on `[-width, width]`, each
/// atom at its cell center carrying the cell's probability.
pub fn gaussian_grid_atoms(n: usize, width: f64) -> Result<Atoms> {
    if n < 2 || !(width > 0.0) {
        return Err(Error::invalid("grid needs n >= 2 cells and width > 0"));
    }
    let h = 2.0 * width / n as f64;
    let cdf = |t: f64| 0.5 * libm::erfc(-t / std::f64::consts::SQRT_2);
    let locs: Vec<f64> = (0..n).map(|k| -width + h * (k as f64 + 0.5)).collect();
    let masses: Vec<f64> = (0..n)
        .map(|k| {
            let a = -width + h * k as f64;
            cdf(a + h) - cdf(a)
        })
        .collect();
    Atoms::new(locs, masses)
}

/// `∫∫_{|y-y'|>δ} (g(y)-g(y'))² |y-y'|^{-(α+1)} ρ(y) ρ(y') dy dy'` by nested
/// adaptive quadrature over `[lo, hi]²`, for a single-coordinate function
/// `g` under a product law with density `rho`.
pub fn product_form_quadrature<G, D>(g: G, rho: D, alpha: f64, delta: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !(delta > 0.0) || !(lo < hi) {
        return Err(Error::invalid("quadrature oracle needs delta > 0 and lo < hi"));
    }
    // by symmetry, twice the region y' < y - δ
    let inner = |y: f64| -> f64 {
        let top = y - delta;
        if top <= lo {
            return 0.0;
        }
        let gy = g(y);
        let f = |yp: f64| {
            let d = gy - g(yp);
            d * d * (y - yp).powf(-(alpha + 1.0)) * rho(yp)
        };
        integrate(f, lo, top, tol * 1e-2, 1e-12, 4000)
            .map(|r| r.value * rho(y))
            .unwrap_or(f64::NAN)
    };
    let r = integrate(inner, lo + delta, hi, tol, 1e-12, 4000)?;
    if !r.value.is_finite() {
        return Err(Error::numerical("inner quadrature failed"));
    }
    Ok(2.0 * r.value)
}
