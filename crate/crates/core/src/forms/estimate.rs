use rayon::prelude::*;
use serde::Serialize;

use super::kernel::{coordinate_differences, kernel_term};
use crate::error::{Error, Result};
use crate::measures::MeasureModel;
use crate::rng::{partition, Streams};
use crate::seqspace::CylinderFunction;
use crate::stats::{batch_means, Accumulator, Estimate};

const MCMC_BATCHES: usize = 50;

/// The `(α, δ, I, budget)` of a truncated form. Coordinates are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormSpec {
    pub alpha: f64,
    pub delta: f64,
    pub coords: Vec<usize>,
    /// Monte-Carlo samples per coordinate.
    pub samples: usize,
    /// Number of independently seeded sample blocks per coordinate.
    pub blocks: usize,
}

impl FormSpec {
    pub fn new(alpha: f64, delta: f64, coords: Vec<usize>, samples: usize, blocks: usize) -> Result<Self> {
        let s = Self {
            alpha,
            delta,
            coords,
            samples,
            blocks,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid(format!("jump cutoff delta must be > 0, got {}", self.delta)));
        }
        if self.samples == 0 || self.blocks == 0 {
            return Err(Error::invalid("samples and blocks must be positive"));
        }
        Ok(())
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }

    pub fn with_coords(&self, coords: Vec<usize>) -> Self {
        Self { coords, ..self.clone() }
    }
}

/// One coordinate's contribution `E^(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoordinateTerm {
    /// 1-based coordinate index.
    pub coordinate: usize,
    pub value: f64,
    pub stderr: f64,
    pub nsamples: u64,
    /// Skipped because neither function depends on the coordinate.
    pub exact_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormEstimate {
    pub value: f64,
    pub stderr: f64,
    pub nsamples: u64,
    pub alpha: f64,
    pub delta: f64,
    pub per_coordinate: Vec<CoordinateTerm>,
}

impl FormEstimate {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            stderr: self.stderr,
            nsamples: self.nsamples,
        }
    }
}

/// Samples of `I_{|y-y'|>δ} Φ_α(u, v; y, y', x∖x_i)` for one block.
fn block_terms(
    model: &MeasureModel,
    u: &CylinderFunction<f64>,
    v: &CylinderFunction<f64>,
    i: usize,
    spec: &FormSpec,
    n: usize,
    rng: &mut crate::rng::StreamRng,
) -> Result<Vec<f64>> {
    let draws = model.draw(n, rng)?;
    let mut out = Vec::with_capacity(n);
    for p in draws.points {
        let mut x = p.into_inner();
        let cond = model.conditional(i, &x)?;
        let y = cond.sample(rng);
        let yp = cond.sample(rng);
        // both draws are always consumed so that the random stream does not
        // depend on δ or on the functions
        let term = if (y - yp).abs() > spec.delta {
            let (du, dv) = coordinate_differences(u, v, i, y, yp, &mut x);
            kernel_term(du, dv, y, yp, spec.alpha)
        } else {
            0.0
        };
        out.push(term);
    }
    Ok(out)
}

fn check_inputs(model: &MeasureModel, u: &CylinderFunction<f64>, v: &CylinderFunction<f64>, i: usize) -> Result<()> {
    let n = model.dim();
    if i >= n {
        return Err(Error::invalid(format!("coordinate {} out of range 1..{n}", i + 1)));
    }
    for w in [u, v] {
        if w.depth() > n {
            return Err(Error::invalid(format!(
                "function {} reads {} coordinates, model has {n}",
                w.name(),
                w.depth()
            )));
        }
    }
    Ok(())
}

/// Monte-Carlo estimate of the δ-truncated `E^(i)(u, v)` from the symmetric
/// two-conditional-draws expression.
///
/// Stream `[i, b]` of `streams` drives block `b`, so a call with the same
/// streams replays the same random numbers for any `u`, `v` and `δ`.
pub fn form_i_estimate(
    model: &MeasureModel,
    u: &CylinderFunction<f64>,
    v: &CylinderFunction<f64>,
    i: usize,
    spec: &FormSpec,
    streams: &Streams,
) -> Result<CoordinateTerm> {
    spec.validate()?;
    check_inputs(model, u, v, i)?;
    let sizes = partition(spec.samples, spec.blocks);
    let blocks: Vec<Vec<f64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &n)| {
            let mut rng = streams.stream(&[i as u64, b as u64]);
            block_terms(model, u, v, i, spec, n, &mut rng)
        })
        .collect::<Result<_>>()?;
    let n = spec.samples;
    // plain ordered sum: IEEE addition is monotone, so termwise domination
    // between two replays carries over to the totals exactly
    let value = blocks.iter().flatten().sum::<f64>() / n as f64;
    let stderr = if model.is_mcmc() {
        let series: Vec<f64> = blocks.concat();
        batch_means(&series, MCMC_BATCHES).stderr
    } else {
        let mut acc = Accumulator::new();
        for b in &blocks {
            acc.merge(&b.iter().copied().collect());
        }
        acc.estimate().stderr
    };
    Ok(CoordinateTerm {
        coordinate: i + 1,
        value,
        stderr,
        nsamples: n as u64,
        exact_zero: false,
    })
}

/// `Σ_{i ∈ I} E^(i)(u, v)`; coordinates neither function reads are exact
/// zeros.
pub fn form_estimate(
    model: &MeasureModel,
    u: &CylinderFunction<f64>,
    v: &CylinderFunction<f64>,
    spec: &FormSpec,
    streams: &Streams,
) -> Result<FormEstimate> {
    spec.validate()?;
    if spec.coords.is_empty() {
        return Err(Error::invalid("coordinate set is empty"));
    }
    let mut per_coordinate = Vec::with_capacity(spec.coords.len());
    for &i in &spec.coords {
        check_inputs(model, u, v, i)?;
        if !u.depends_on(i) || !v.depends_on(i) {
            per_coordinate.push(CoordinateTerm {
                coordinate: i + 1,
                value: 0.0,
                stderr: 0.0,
                nsamples: 0,
                exact_zero: true,
            });
        } else {
            per_coordinate.push(form_i_estimate(model, u, v, i, spec, streams)?);
        }
    }
    let value = per_coordinate.iter().map(|t| t.value).sum();
    let stderr = per_coordinate.iter().map(|t| t.stderr * t.stderr).sum::<f64>().sqrt();
    let nsamples = per_coordinate.iter().map(|t| t.nsamples).sum();
    Ok(FormEstimate {
        value,
        stderr,
        nsamples,
        alpha: spec.alpha,
        delta: spec.delta,
        per_coordinate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub nondecreasing: bool,
}

/// Replays `E(u, u)` at decreasing cutoffs with common random numbers.
pub fn truncation_monotonicity_check(
    model: &MeasureModel,
    u: &CylinderFunction<f64>,
    deltas: &[f64],
    spec: &FormSpec,
    streams: &Streams,
) -> Result<MonotonicityReport> {
    if deltas.is_empty() {
        return Err(Error::invalid("no cutoffs given"));
    }
    if deltas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("cutoffs must be given in non-increasing order"));
    }
    let mut values = Vec::with_capacity(deltas.len());
    let mut stderrs = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let e = form_estimate(model, u, u, &spec.with_delta(d), streams)?;
        values.push(e.value);
        stderrs.push(e.stderr);
    }
    let nondecreasing = values.windows(2).all(|w| w[1] >= w[0]);
    Ok(MonotonicityReport {
        deltas: deltas.to_vec(),
        values,
        stderrs,
        nondecreasing,
    })
}

/// `C_α = 6·2^{1-α}`.
pub fn damping_constant(alpha: f64) -> f64 {
    6.0 * 2f64.powf(1.0 - alpha)
}

/// Upper bound `C_α a^{-(α+1)} ‖f‖∞² μ(|X_i| > a)` on `E^(i)(f_{M,k})` for a
/// coordinate damped by a cutoff of scale `a`. Derived with
/// `|Δη|² ≤ 2^{1-α}|Δη|^{α+1}`, which needs `α ≤ 1`.
pub fn damping_bound(alpha: f64, a: f64, sup_f: f64, tail: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Unsupported(format!("cutoff damping bound holds for 0 < alpha <= 1, got {alpha}")));
    }
    if !(a > 0.0) || !(sup_f >= 0.0) || !(0.0..=1.0).contains(&tail) {
        return Err(Error::invalid("damping bound needs a > 0, sup >= 0 and a tail probability"));
    }
    Ok(damping_constant(alpha) * a.powf(-(alpha + 1.0)) * sup_f * sup_f * tail)
}

/// `L_{K,i}·∫_K |t|^{1-α} dt`, the quantity that keeps the untruncated
/// coordinate form finite for `1 < α < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YoungDiagnostic {
    pub density_bound: f64,
    pub kernel_l1: f64,
    pub value: f64,
}

pub fn young_diagnostic(
    model: &MeasureModel,
    i: usize,
    rest: &[f64],
    k: (f64, f64),
    alpha: f64,
) -> Result<YoungDiagnostic> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    let (a, b) = k;
    let l = model.cond_density_bound(i, rest, a, b)?;
    let e = 2.0 - alpha;
    // antiderivative of |t|^{1-α} is sign(t)|t|^{2-α}/(2-α)
    let anti = |t: f64| t.signum() * t.abs().powf(e) / e;
    let kernel_l1 = anti(b) - anti(a);
    Ok(YoungDiagnostic {
        density_bound: l,
        kernel_l1,
        value: l * kernel_l1,
    })
}
