use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::scheme::{SchemeKind, WeightScheme};
use crate::error::{Error, Result};
use crate::measures::{sample_mean, series_mean, Draws, MeasureModel};
use crate::rng::Streams;
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ConditionId {
    #[serde(rename = "4.3")]
    C4_3,
    #[serde(rename = "4.4")]
    C4_4,
    #[serde(rename = "4.5")]
    C4_5,
    #[serde(rename = "4.6")]
    C4_6,
    #[serde(rename = "4.8")]
    C4_8,
    #[serde(rename = "4.9")]
    C4_9,
    #[serde(rename = "4.52")]
    C4_52,
    #[serde(rename = "4.53")]
    C4_53,
    #[serde(rename = "4.54")]
    C4_54,
    #[serde(rename = "4.55")]
    C4_55,
    #[serde(rename = "4.56")]
    C4_56,
}

impl ConditionId {
    pub const ALL: [ConditionId; 11] = [
        ConditionId::C4_3,
        ConditionId::C4_4,
        ConditionId::C4_5,
        ConditionId::C4_6,
        ConditionId::C4_8,
        ConditionId::C4_9,
        ConditionId::C4_52,
        ConditionId::C4_53,
        ConditionId::C4_54,
        ConditionId::C4_55,
        ConditionId::C4_56,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ConditionId::C4_3 => "4.3",
            ConditionId::C4_4 => "4.4",
            ConditionId::C4_5 => "4.5",
            ConditionId::C4_6 => "4.6",
            ConditionId::C4_8 => "4.8",
            ConditionId::C4_9 => "4.9",
            ConditionId::C4_52 => "4.52",
            ConditionId::C4_53 => "4.53",
            ConditionId::C4_54 => "4.54",
            ConditionId::C4_55 => "4.55",
            ConditionId::C4_56 => "4.56",
        }
    }

    fn required_kind(&self) -> &'static str {
        use ConditionId::*;
        match self {
            C4_3 | C4_4 | C4_8 | C4_52 | C4_53 => "lp",
            C4_5 | C4_6 | C4_9 | C4_54 | C4_55 => "linf",
            C4_56 => "rn",
        }
    }

    fn code(&self) -> u64 {
        Self::ALL.iter().position(|c| c == self).expect("listed") as u64
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|c| c.label() == s.trim())
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown condition id '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentWithFinite,
    Inconclusive,
    Diverging,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ConsistentWithFinite => "consistent-with-finite",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Diverging => "diverging",
        })
    }
}

/// Verdict from the increments of a nondecreasing sequence of partial sums.
///
/// Consistent-with-finite when every last-quarter increment is below
/// `threshold`; diverging when the last-quarter mean increment is at least
/// the first-quarter one; inconclusive otherwise.
pub fn verdict(partial_sums: &[f64], threshold: f64) -> Verdict {
    let n = partial_sums.len();
    if n == 0 {
        return Verdict::ConsistentWithFinite;
    }
    let inc: Vec<f64> = (0..n)
        .map(|k| partial_sums[k] - if k == 0 { 0.0 } else { partial_sums[k - 1] })
        .collect();
    let q = (n / 4).max(1);
    let last = &inc[n - q..];
    if last.iter().all(|d| *d < threshold) {
        return Verdict::ConsistentWithFinite;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    if mean(last) >= mean(&inc[..q]) {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QrOptions {
    /// Monte-Carlo draws for tails and moments without closed forms.
    pub nsamples: usize,
    /// Increment threshold of the verdict rule.
    pub threshold: f64,
    /// Candidate `M₀` values; empty means the scheme's own `M₀`.
    pub m0_grid: Vec<f64>,
    /// Draws of the rest configuration used to bound `L_{M,i}`.
    pub density_draws: usize,
}

impl Default for QrOptions {
    fn default() -> Self {
        Self {
            nsamples: 10_000,
            threshold: 1e-6,
            m0_grid: Vec::new(),
            density_draws: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QrReport {
    pub condition: ConditionId,
    pub scheme: &'static str,
    pub alpha: f64,
    pub m0: f64,
    pub n_terms: usize,
    pub partial_sums: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub verdict: Verdict,
    pub threshold: f64,
    pub nsamples: usize,
    pub notes: Vec<String>,
}

impl QrReport {
    pub fn last(&self) -> Estimate {
        Estimate {
            value: *self.partial_sums.last().unwrap_or(&0.0),
            stderr: *self.stderrs.last().unwrap_or(&0.0),
            nsamples: self.nsamples as u64,
        }
    }
}

/// Per-coordinate quantities either in closed form or from one shared set
/// of draws.
struct Engine<'a> {
    model: &'a MeasureModel,
    n: usize,
    nsamples: usize,
    draws: OnceCell<Result<Draws>>,
    streams: Streams,
}

impl<'a> Engine<'a> {
    fn draws(&self) -> Result<&Draws> {
        self.draws
            .get_or_init(|| self.model.draw(self.nsamples, &mut self.streams.stream(&[0])))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Partial sums of `Σ_{i≤N} w_i g_i` with `g_i = exact(i)` when every
    /// coordinate has a closed form, else the sample mean of `sample(i, x)`.
    fn partial_sums<E, S>(&self, weights: &[f64], exact: E, sample: S) -> Result<(Vec<f64>, Vec<f64>)>
    where
        E: Fn(usize) -> Option<f64>,
        S: Fn(usize, &[f64]) -> f64,
    {
        let closed: Option<Vec<f64>> = (0..self.n).map(&exact).collect();
        if let Some(g) = closed {
            let mut s = 0.0;
            let sums = (0..self.n)
                .map(|i| {
                    s += weights[i] * g[i];
                    s
                })
                .collect();
            return Ok((sums, vec![0.0; self.n]));
        }
        let draws = self.draws()?;
        let per_sample: Vec<Vec<f64>> = draws
            .points
            .iter()
            .map(|x| {
                let mut s = 0.0;
                (0..self.n)
                    .map(|i| {
                        s += weights[i] * sample(i, x);
                        s
                    })
                    .collect()
            })
            .collect();
        let mut sums = Vec::with_capacity(self.n);
        let mut ses = Vec::with_capacity(self.n);
        for k in 0..self.n {
            let series: Vec<f64> = per_sample.iter().map(|c| c[k]).collect();
            // ordered plain sums keep the sequence nondecreasing
            sums.push(series.iter().sum::<f64>() / series.len() as f64);
            ses.push(series_mean(self.model, &series).stderr);
        }
        Ok((sums, ses))
    }

    fn tail_sums(&self, weights: &[f64], thresholds: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.partial_sums(
            weights,
            |i| self.model.exact_tail(i, thresholds[i]),
            |i, x| f64::from(u8::from(x[i].abs() > thresholds[i])),
        )
    }
}

fn check_kind(scheme: &WeightScheme, id: ConditionId) -> Result<()> {
    let kind = match scheme.kind {
        SchemeKind::Lp { .. } => "lp",
        SchemeKind::Linf => "linf",
        SchemeKind::Rn => "rn",
    };
    if kind != id.required_kind() {
        return Err(Error::invalid(format!(
            "condition {id} needs a {} scheme, got {kind}",
            id.required_kind()
        )));
    }
    Ok(())
}

fn m0_candidates(scheme: &WeightScheme, opts: &QrOptions) -> Result<Vec<f64>> {
    let grid = if opts.m0_grid.is_empty() { vec![scheme.m0] } else { opts.m0_grid.clone() };
    if grid.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::invalid("M0 grid entries must be > 0"));
    }
    Ok(grid)
}

/// `M ≥ M₀` levels scanned for the `sup_M` conditions.
fn m_levels(m0: f64) -> Vec<f64> {
    (0..=12).map(|k| m0 * 2f64.powf(0.5 * k as f64)).collect()
}

/// Partial sums of the named series for coordinates `1..=n_terms`.
pub fn check_condition(
    model: &MeasureModel,
    scheme: &WeightScheme,
    id: ConditionId,
    n_terms: usize,
    opts: &QrOptions,
    streams: &Streams,
) -> Result<QrReport> {
    check_kind(scheme, id)?;
    if n_terms == 0 || n_terms > model.dim() || n_terms > scheme.len() {
        return Err(Error::invalid(format!(
            "n_terms must lie in 1..={} (model {} coordinates, scheme {} weights)",
            model.dim().min(scheme.len()),
            model.dim(),
            scheme.len()
        )));
    }
    if opts.nsamples == 0 {
        return Err(Error::invalid("nsamples must be positive"));
    }
    let streams = streams.derive(id.code());
    let engine = Engine {
        model,
        n: n_terms,
        nsamples: opts.nsamples,
        draws: OnceCell::new(),
        streams,
    };
    let alpha = scheme.alpha;
    let base: Vec<f64> = (0..n_terms).map(|i| scheme.base(i)).collect();
    let scale: Vec<f64> = (0..n_terms).map(|i| scheme.scale(i)).collect();
    let mut notes = Vec::new();
    use ConditionId::*;
    let theorem2 = matches!(id, C4_3 | C4_4 | C4_5 | C4_6 | C4_8 | C4_9);
    if theorem2 && alpha > 1.0 {
        notes.push(format!("alpha = {alpha} lies outside 0 < alpha <= 1"));
    }
    if !theorem2 && id != C4_56 && !(alpha > 1.0) {
        notes.push(format!("alpha = {alpha} lies outside 1 < alpha < 2"));
    }
    if scheme.kind == SchemeKind::Linf && !scheme.gamma_growing {
        notes.push("gamma does not grow over the table".into());
    }
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for m0 in m0_candidates(scheme, opts)? {
        let (sums, ses) = match id {
            C4_3 | C4_5 | C4_52 | C4_54 => {
                let w: Vec<f64> = base.iter().map(|b| b.powf(alpha + 1.0)).collect();
                let t: Vec<f64> = scale.iter().map(|s| m0 * s).collect();
                engine.tail_sums(&w, &t)?
            }
            C4_8 | C4_9 => {
                let w: Vec<f64> = base.iter().map(|b| b.powf(2.0 * (alpha + 1.0))).collect();
                engine.partial_sums(&w, |i| model.exact_moment2(i), |i, x| x[i] * x[i])?
            }
            C4_4 | C4_6 => support_complement(&engine, &scale, m0)?,
            C4_53 | C4_55 | C4_56 => {
                let half_width = if id == C4_56 { 6.0 } else { 3.0 };
                sup_condition(&engine, &base, &scale, alpha, m0, half_width, opts, &mut notes)?
            }
        };
        let better = best.as_ref().is_none_or(|(_, b, _)| sums[n_terms - 1] < b[n_terms - 1]);
        if better {
            best = Some((m0, sums, ses));
        }
    }
    let (m0, partial_sums, stderrs) = best.expect("non-empty M0 grid");
    if matches!(id, C4_53 | C4_55 | C4_56) {
        notes.dedup();
    }
    Ok(QrReport {
        condition: id,
        scheme: scheme.source.tag(),
        alpha,
        m0,
        n_terms,
        verdict: verdict(&partial_sums, opts.threshold),
        partial_sums,
        stderrs,
        threshold: opts.threshold,
        nsamples: opts.nsamples,
        notes,
    })
}

/// `μ(∃ i ≤ N: |X_i| > M₀ s_i)`, nondecreasing in `N`.
fn support_complement(engine: &Engine<'_>, scale: &[f64], m0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = engine.n;
    if engine.model.is_product() {
        let mut inside = 1.0;
        let sums = (0..n)
            .map(|i| {
                let t = engine.model.exact_tail(i, m0 * scale[i]).expect("product tails are exact");
                inside *= 1.0 - t;
                1.0 - inside
            })
            .collect();
        return Ok((sums, vec![0.0; n]));
    }
    let draws = engine.draws()?;
    let first_exit: Vec<usize> = draws
        .points
        .iter()
        .map(|x| (0..n).find(|&i| x[i].abs() > m0 * scale[i]).unwrap_or(n))
        .collect();
    let mut sums = Vec::with_capacity(n);
    let mut ses = Vec::with_capacity(n);
    for k in 0..n {
        let series: Vec<f64> = first_exit.iter().map(|&e| f64::from(u8::from(e <= k))).collect();
        sums.push(series.iter().sum::<f64>() / series.len() as f64);
        ses.push(series_mean(engine.model, &series).stderr);
    }
    Ok((sums, ses))
}

/// `L_{M,i}` on `[-w, w]`: the maximum over a reference configuration and
/// sampled rest configurations.
fn density_bound(engine: &Engine<'_>, i: usize, w: f64, opts: &QrOptions) -> Result<f64> {
    let model = engine.model;
    if model.is_product() {
        let zero = vec![0.0; model.dim()];
        return model.cond_density_bound(i, &zero, -w, w);
    }
    let draws = engine.draws()?;
    let mut l = 0.0f64;
    for x in draws.points.iter().take(opts.density_draws.max(1)) {
        l = l.max(model.cond_density_bound(i, x, -w, w)?);
    }
    if let Ok(v) = model.cond_density_bound(i, &vec![0.0; model.dim()], -w, w) {
        l = l.max(v);
    }
    Ok(l)
}

#[allow(clippy::too_many_arguments)]
fn sup_condition(
    engine: &Engine<'_>,
    base: &[f64],
    scale: &[f64],
    alpha: f64,
    m0: f64,
    half_width: f64,
    opts: &QrOptions,
    notes: &mut Vec<String>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = engine.n;
    let mut sums = vec![0.0; n];
    let mut ses = vec![0.0; n];
    if !engine.model.is_product() {
        notes.push(format!(
            "L_(M,i) is the sampled maximum over {} rest configurations",
            opts.density_draws.max(1)
        ));
    }
    for m in m_levels(m0) {
        let t: Vec<f64> = scale.iter().map(|s| m * s).collect();
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            let tail = engine.model.exact_tail(i, t[i]);
            let l = if tail == Some(0.0) {
                0.0
            } else {
                density_bound(engine, i, half_width * t[i], opts)?
            };
            w.push(m.powf(-alpha) * l * base[i].powf(alpha));
        }
        let (s, e) = engine.tail_sums(&w, &t)?;
        for k in 0..n {
            if s[k] > sums[k] {
                sums[k] = s[k];
                ses[k] = e[k];
            }
        }
    }
    Ok((sums, ses))
}

/// The Chebyshev-type sufficient series (4.8) for lp or (4.9) for linf.
pub fn chebyshev_sufficient(
    model: &MeasureModel,
    scheme: &WeightScheme,
    n_terms: usize,
    opts: &QrOptions,
    streams: &Streams,
) -> Result<QrReport> {
    let id = match scheme.kind {
        SchemeKind::Lp { .. } => ConditionId::C4_8,
        SchemeKind::Linf => ConditionId::C4_9,
        SchemeKind::Rn => return Err(Error::invalid("no Chebyshev condition for RN schemes")),
    };
    check_condition(model, scheme, id, n_terms, opts, streams)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportRow {
    pub m: f64,
    pub estimate: Estimate,
}

/// `μ(|X_i| ≤ M s_i for all i ≤ N)` for each `M` in the grid.
pub fn support_estimate(
    model: &MeasureModel,
    scheme: &WeightScheme,
    m_grid: &[f64],
    n_terms: usize,
    nsamples: usize,
    streams: &Streams,
) -> Result<Vec<SupportRow>> {
    if nsamples == 0 {
        return Err(Error::invalid("nsamples must be >= 1"));
    }
    if n_terms == 0 || n_terms > model.dim() || n_terms > scheme.len() {
        return Err(Error::invalid("n_terms out of range"));
    }
    let draws = model.draw(nsamples, &mut streams.stream(&[u64::MAX]))?;
    m_grid
        .iter()
        .map(|&m| {
            if !(m >= 0.0) {
                return Err(Error::invalid(format!("M must be >= 0, got {m}")));
            }
            let estimate = sample_mean(model, &draws, |x| {
                f64::from(u8::from((0..n_terms).all(|i| x[i].abs() <= m * scheme.scale(i))))
            });
            Ok(SupportRow { m, estimate })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atoms, Marginal};
    use crate::qr_check::SchemeSource;

    fn power_scheme(n: usize, kind: SchemeKind, alpha: f64) -> WeightScheme {
        // β_iγ_i = i^{-2}
        let beta = (1..=n).map(|i| (i as f64).powi(-4)).collect();
        let gamma = (1..=n).map(|i| (i as f64).powi(2)).collect();
        WeightScheme::new(kind, beta, gamma, 1.0, alpha, SchemeSource::Manual).unwrap()
    }

    fn lp_scheme(n: usize, alpha: f64) -> WeightScheme {
        // p = 2 and β_iγ_i = i^{-2}
        power_scheme(n, SchemeKind::Lp { p: 2.0 }, alpha)
    }

    #[test]
    fn verdict_rule() {
        let conv: Vec<f64> = (1..=40).map(|k| 1.0 - 0.5f64.powi(k)).collect();
        assert_eq!(verdict(&conv, 1e-6), Verdict::ConsistentWithFinite);
        let lin: Vec<f64> = (1..=40).map(|k| k as f64).collect();
        assert_eq!(verdict(&lin, 1e-6), Verdict::Diverging);
        let slow: Vec<f64> = (1..=40).map(|k| (k as f64).ln()).collect();
        assert_eq!(verdict(&slow, 1e-6), Verdict::Inconclusive);
    }

    #[test]
    fn chebyshev_series_value() {
        let m = MeasureModel::standard_normal(400).unwrap();
        let r = chebyshev_sufficient(&m, &lp_scheme(400, 1.0), 400, &QrOptions::default(), &Streams::new(1)).unwrap();
        // Σ i^{-4} truncated at 400
        let want: f64 = (1..=400).map(|i| (i as f64).powi(-4)).sum();
        assert!((r.last().value - want).abs() < 1e-12);
        assert!((want - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-7);
        assert_eq!(r.verdict, Verdict::ConsistentWithFinite);
    }

    #[test]
    fn trivial_model_is_zero() {
        let z = Atoms::new(vec![0.0], vec![1.0]).unwrap();
        let m = MeasureModel::product(vec![Marginal::Atoms(z); 8]).unwrap();
        for id in [ConditionId::C4_3, ConditionId::C4_4, ConditionId::C4_8, ConditionId::C4_53] {
            let s = lp_scheme(8, if id == ConditionId::C4_53 { 1.5 } else { 1.0 });
            let r = check_condition(&m, &s, id, 8, &QrOptions::default(), &Streams::new(2)).unwrap();
            assert!(r.partial_sums.iter().all(|v| *v == 0.0), "{id}");
            assert_eq!(r.verdict, Verdict::ConsistentWithFinite);
        }
    }

    #[test]
    fn kind_mismatch() {
        let m = MeasureModel::standard_normal(4).unwrap();
        let e = check_condition(&m, &lp_scheme(4, 1.0), ConditionId::C4_5, 4, &QrOptions::default(), &Streams::new(3));
        assert!(matches!(e, Err(Error::InvalidInput(_))));
        assert!("4.7".parse::<ConditionId>().is_err());
        assert_eq!("4.55".parse::<ConditionId>().unwrap(), ConditionId::C4_55);
    }

    #[test]
    fn chebyshev_dominates_tail_series() {
        let m = MeasureModel::standard_normal(50).unwrap();
        let s = lp_scheme(50, 1.0);
        let o = QrOptions::default();
        let a = check_condition(&m, &s, ConditionId::C4_3, 50, &o, &Streams::new(4)).unwrap();
        let b = chebyshev_sufficient(&m, &s, 50, &o, &Streams::new(4)).unwrap();
        for k in 0..50 {
            assert!(a.partial_sums[k] <= b.partial_sums[k] + 3.0 * a.stderrs[k].hypot(b.stderrs[k]));
        }
    }

    #[test]
    fn linf_and_rn_conditions_run() {
        let m = MeasureModel::standard_normal(20).unwrap();
        let s = power_scheme(20, SchemeKind::Linf, 1.5);
        for id in [ConditionId::C4_5, ConditionId::C4_6, ConditionId::C4_9, ConditionId::C4_54, ConditionId::C4_55] {
            let r = check_condition(&m, &s, id, 20, &QrOptions::default(), &Streams::new(5)).unwrap();
            assert!(r.partial_sums.windows(2).all(|w| w[1] >= w[0]), "{id}");
        }
        let g: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let rn = WeightScheme::new(SchemeKind::Rn, vec![1.0; 20], g, 1.0, 1.5, SchemeSource::Manual).unwrap();
        let r = check_condition(&m, &rn, ConditionId::C4_56, 20, &QrOptions::default(), &Streams::new(5)).unwrap();
        assert!(r.partial_sums.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn support_extremes() {
        let m = MeasureModel::standard_normal(5).unwrap();
        let s = lp_scheme(5, 1.0);
        let rows = support_estimate(&m, &s, &[0.0, 1.0, 1e6], 5, 2000, &Streams::new(6)).unwrap();
        assert_eq!(rows[0].estimate.value, 0.0);
        assert_eq!(rows[2].estimate.value, 1.0);
        assert!(rows[1].estimate.value > 0.0 && rows[1].estimate.value < 1.0);
    }

    #[test]
    fn m0_grid_picks_smallest() {
        let m = MeasureModel::standard_normal(10).unwrap();
        let s = lp_scheme(10, 1.0);
        let o = QrOptions {
            m0_grid: vec![0.5, 2.0, 1.0],
            ..QrOptions::default()
        };
        let r = check_condition(&m, &s, ConditionId::C4_3, 10, &o, &Streams::new(7)).unwrap();
        assert_eq!(r.m0, 2.0);
    }
}
