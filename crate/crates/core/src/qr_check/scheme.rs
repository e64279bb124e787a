use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert_scale::EigenSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchemeKind {
    Lp { p: f64 },
    Linf,
    Rn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeSource {
    Manual,
    FreeFieldM2,
    FreeFieldM3,
}

impl SchemeSource {
    pub fn tag(&self) -> &'static str {
        match self {
            SchemeSource::Manual => "manual",
            SchemeSource::FreeFieldM2 => "free-field-m(-2)",
            SchemeSource::FreeFieldM3 => "free-field-m(-3)",
        }
    }
}

/// Weights `β_i`, auxiliary sequence `γ_i` and level `M₀` of a
/// quasi-regularity condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightScheme {
    pub kind: SchemeKind,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub m0: f64,
    pub alpha: f64,
    pub source: SchemeSource,
    /// Partial sums of `γ_i^{-1}` (lp) as a summability witness.
    pub witness: Vec<f64>,
    /// For linf: whether `γ` increases over the table (a finite stand-in for
    /// `γ_i → ∞`).
    pub gamma_growing: bool,
}

impl WeightScheme {
    pub fn new(kind: SchemeKind, beta: Vec<f64>, gamma: Vec<f64>, m0: f64, alpha: f64, source: SchemeSource) -> Result<Self> {
        if beta.len() != gamma.len() || gamma.is_empty() {
            return Err(Error::invalid("beta and gamma must be non-empty and of equal length"));
        }
        if gamma.iter().chain(&beta).any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::invalid("beta and gamma entries must be finite and > 0"));
        }
        if !(m0.is_finite() && m0 > 0.0) {
            return Err(Error::invalid(format!("M0 must be > 0, got {m0}")));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        if let SchemeKind::Lp { p } = kind {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::invalid(format!("p must lie in [1, inf), got {p}")));
            }
        }
        if kind == SchemeKind::Linf && gamma.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("linf schemes need a nondecreasing gamma"));
        }
        let witness = gamma
            .iter()
            .scan(0.0, |s, g| {
                *s += 1.0 / g;
                Some(*s)
            })
            .collect();
        let gamma_growing = gamma[gamma.len() - 1] > gamma[0];
        Ok(Self {
            kind,
            beta,
            gamma,
            m0,
            alpha,
            source,
            witness,
            gamma_growing,
        })
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// The scale `s_i` with `μ(|X_i| > M s_i)` in the conditions:
    /// `(β_iγ_i)^{-1/p}`, `(β_iγ_i)^{-1}` or `γ_i`.
    pub fn scale(&self, i: usize) -> f64 {
        let bg = self.beta[i] * self.gamma[i];
        match self.kind {
            SchemeKind::Lp { p } => bg.powf(-1.0 / p),
            SchemeKind::Linf => 1.0 / bg,
            SchemeKind::Rn => self.gamma[i],
        }
    }

    /// `(β_iγ_i)^{1/p}`, `β_iγ_i`, or `γ_i^{-1}` for RN.
    pub fn base(&self, i: usize) -> f64 {
        1.0 / self.scale(i)
    }
}

/// Scheme of the free-field example at Hilbert-scale level `m ∈ {-2, -3}`:
/// `β_i = λ_i^{-2m}`, `γ_i = λ_i^{-2}`, `p = 2`.
pub fn free_field_scheme(eig: &EigenSystem, m: i32, alpha: f64, m0: f64) -> Result<WeightScheme> {
    if eig.is_empty() {
        return Err(Error::invalid("empty eigen table"));
    }
    let source = match m {
        -2 => SchemeSource::FreeFieldM2,
        -3 => SchemeSource::FreeFieldM3,
        _ => return Err(Error::invalid(format!("free-field schemes exist for m = -2, -3, got {m}"))),
    };
    let beta = eig.lambdas.iter().map(|l| l.powi(-2 * m)).collect();
    let gamma = eig.lambdas.iter().map(|l| l.powi(-2)).collect();
    WeightScheme::new(SchemeKind::Lp { p: 2.0 }, beta, gamma, m0, alpha, source)
}
