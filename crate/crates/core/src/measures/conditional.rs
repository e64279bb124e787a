use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A one-dimensional law: the full conditional of one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Conditional1D {
    Gaussian { mean: f64, var: f64 },
    Uniform { lo: f64, hi: f64 },
    Grid(GridDensity),
    Atoms(Atoms),
}

impl Conditional1D {
    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        if !(mean.is_finite() && var.is_finite() && var > 0.0) {
            return Err(Error::invalid(format!("gaussian({mean}, {var}) is not a valid law")));
        }
        Ok(Conditional1D::Gaussian { mean, var })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("uniform({lo}, {hi}) is not a valid law")));
        }
        Ok(Conditional1D::Uniform { lo, hi })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Conditional1D::Gaussian { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            }
            Conditional1D::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Conditional1D::Grid(g) => g.inverse_cdf(rng.random()),
            Conditional1D::Atoms(a) => a.locs[a.index_for(rng.random())],
        }
    }

    pub fn density(&self, y: f64) -> Result<f64> {
        Ok(match self {
            Conditional1D::Gaussian { .. } | Conditional1D::Uniform { .. } => {
                let l = self.log_density(y)?;
                l.exp()
            }
            Conditional1D::Grid(g) => g.density(y),
            Conditional1D::Atoms(_) => return Err(atoms_unsupported()),
        })
    }

    pub fn log_density(&self, y: f64) -> Result<f64> {
        Ok(match self {
            Conditional1D::Gaussian { mean, var } => {
                let z = (y - mean) / var.sqrt();
                -0.5 * z * z - LN_SQRT_2PI - 0.5 * var.ln()
            }
            Conditional1D::Uniform { lo, hi } => {
                if (*lo..=*hi).contains(&y) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Conditional1D::Grid(g) => g.density(y).ln(),
            Conditional1D::Atoms(_) => return Err(atoms_unsupported()),
        })
    }

    /// `L_K = sup_{y ∈ [a, b]} ρ(y)`.
    pub fn bound_on(&self, a: f64, b: f64) -> Result<f64> {
        if !(a <= b) {
            return Err(Error::invalid(format!("empty interval [{a}, {b}]")));
        }
        match self {
            Conditional1D::Gaussian { mean, .. } => {
                let y = mean.clamp(a, b);
                self.density(y)
            }
            Conditional1D::Uniform { lo, hi } => Ok(if b < *lo || a > *hi { 0.0 } else { 1.0 / (hi - lo) }),
            Conditional1D::Grid(g) => Ok(g.bound_on(a, b)),
            Conditional1D::Atoms(_) => Err(atoms_unsupported()),
        }
    }

    /// Interval outside of which the law has negligible (or no) mass.
    pub fn effective_support(&self) -> (f64, f64) {
        match self {
            Conditional1D::Gaussian { mean, var } => {
                let w = 40.0 * var.sqrt();
                (mean - w, mean + w)
            }
            Conditional1D::Uniform { lo, hi } => (*lo, *hi),
            Conditional1D::Grid(g) => g.support(),
            Conditional1D::Atoms(a) => (a.locs[0], a.locs[a.locs.len() - 1]),
        }
    }

    /// Length scale on which the density varies.
    pub fn scale(&self) -> f64 {
        match self {
            Conditional1D::Gaussian { var, .. } => var.sqrt(),
            Conditional1D::Uniform { lo, hi } => hi - lo,
            Conditional1D::Grid(g) => g.h,
            Conditional1D::Atoms(_) => f64::INFINITY,
        }
    }

    /// Points where the density is not smooth (support ends, grid nodes).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Conditional1D::Gaussian { .. } => Vec::new(),
            Conditional1D::Uniform { lo, hi } => vec![*lo, *hi],
            Conditional1D::Grid(g) => (0..g.pdf.len()).map(|k| g.node(k)).collect(),
            Conditional1D::Atoms(a) => a.locs.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Conditional1D::Gaussian { mean, .. } => *mean,
            Conditional1D::Uniform { lo, hi } => 0.5 * (lo + hi),
            Conditional1D::Grid(g) => g.mean(),
            Conditional1D::Atoms(a) => a.locs.iter().zip(&a.masses).map(|(x, m)| x * m).sum(),
        }
    }
}

fn atoms_unsupported() -> Error {
    Error::Unsupported("finite-atom conditional has no density".into())
}

/// Piecewise-linear density on an equally spaced grid, normalized so that
/// the trapezoid integral is exactly one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDensity {
    lo: f64,
    h: f64,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridDensity {
    /// Tabulates `exp(logf)` at `nodes` equally spaced points of `[lo, hi]`.
    pub fn from_log_density<F: Fn(f64) -> f64>(lo: f64, hi: f64, nodes: usize, logf: F) -> Result<Self> {
        if !(lo < hi) || nodes < 2 {
            return Err(Error::invalid("grid density needs lo < hi and at least two nodes"));
        }
        let h = (hi - lo) / (nodes - 1) as f64;
        let logs: Vec<f64> = (0..nodes).map(|k| logf(lo + h * k as f64)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::numerical("log-density not finite on the grid"));
        }
        let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        Self::from_values(lo, hi, raw)
    }

    /// Normalizes nonnegative node values.
    pub fn from_values(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 || !(lo < hi) {
            return Err(Error::invalid("grid density needs lo < hi and at least two nodes"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::numerical("grid density values must be finite and >= 0"));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let mut cdf = vec![0.0; n];
        for k in 1..n {
            cdf[k] = cdf[k - 1] + 0.5 * h * (values[k - 1] + values[k]);
        }
        let z = cdf[n - 1];
        if !(z > 0.0) {
            return Err(Error::numerical("grid density has zero mass"));
        }
        let pdf = values.iter().map(|v| v / z).collect();
        cdf.iter_mut().for_each(|c| *c /= z);
        cdf[n - 1] = 1.0;
        Ok(Self { lo, h, pdf, cdf })
    }

    fn node(&self, k: usize) -> f64 {
        self.lo + self.h * k as f64
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.node(self.pdf.len() - 1))
    }

    pub fn nodes(&self) -> usize {
        self.pdf.len()
    }

    pub fn density(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(lo..=hi).contains(&y) {
            return 0.0;
        }
        let s = (y - lo) / self.h;
        let k = (s.floor() as usize).min(self.pdf.len() - 2);
        let w = s - k as f64;
        self.pdf[k] * (1.0 - w) + self.pdf[k + 1] * w
    }

    /// Trapezoid integral of the stored density; one by construction.
    pub fn mass(&self) -> f64 {
        self.pdf.windows(2).map(|w| 0.5 * self.h * (w[0] + w[1])).sum()
    }

    pub fn mean(&self) -> f64 {
        // exact for the piecewise-linear density
        self.pdf
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let a = self.node(k);
                self.h * (w[0] * (a / 2.0 + self.h / 6.0) + w[1] * (a / 2.0 + self.h / 3.0))
            })
            .sum()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y <= lo {
            return 0.0;
        }
        if y >= hi {
            return 1.0;
        }
        let k = (((y - lo) / self.h).floor() as usize).min(self.pdf.len() - 2);
        let s = y - self.node(k);
        let (p0, p1) = (self.pdf[k], self.pdf[k + 1]);
        self.cdf[k] + p0 * s + 0.5 * (p1 - p0) / self.h * s * s
    }

    /// Inverse of the piecewise-quadratic CDF.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let n = self.pdf.len();
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, n - 1) - 1;
        let r = (u - self.cdf[k]).max(0.0);
        let (p0, p1) = (self.pdf[k], self.pdf[k + 1]);
        let slope = (p1 - p0) / self.h;
        let disc = (p0 * p0 + 2.0 * slope * r).max(0.0);
        let denom = p0 + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        self.node(k) + s.clamp(0.0, self.h)
    }

    /// Sup of the interpolated density over `[a, b]`.
    pub fn bound_on(&self, a: f64, b: f64) -> f64 {
        let mut best = self.density(a).max(self.density(b));
        for k in 0..self.pdf.len() {
            let x = self.node(k);
            if x >= a && x <= b {
                best = best.max(self.pdf[k]);
            }
        }
        best
    }
}

/// Finitely many atoms with positive masses summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atoms {
    pub locs: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Atoms {
    /// Sorts by location, drops zero masses, normalizes.
    pub fn new(locs: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if locs.len() != masses.len() || locs.is_empty() {
            return Err(Error::invalid("atoms need equal, nonzero numbers of locations and masses"));
        }
        if locs.iter().chain(&masses).any(|v| !v.is_finite()) || masses.iter().any(|&m| m < 0.0) {
            return Err(Error::invalid("atom locations and masses must be finite, masses >= 0"));
        }
        let mut pairs: Vec<(f64, f64)> = locs.into_iter().zip(masses).filter(|p| p.1 > 0.0).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("atoms have zero total mass"));
        }
        Ok(Self {
            locs: pairs.iter().map(|p| p.0).collect(),
            masses: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    fn index_for(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, m) in self.masses.iter().enumerate() {
            acc += m;
            if u < acc {
                return k;
            }
        }
        self.masses.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use crate::stats::Accumulator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_bounds() {
        let g = Conditional1D::gaussian(0.0, 1.0).unwrap();
        let peak = g.bound_on(-1.0, 1.0).unwrap();
        assert!((peak - 0.398_942_280_401_432_7).abs() < 1e-15);
        let tail = g.bound_on(2.0, 3.0).unwrap();
        assert!((tail - 0.053_990_966_513_188_06).abs() < 1e-15);
        assert!(g.bound_on(2.0, 2.5).unwrap() <= g.bound_on(1.5, 3.0).unwrap());
    }

    #[test]
    fn atoms_have_no_density() {
        let a = Conditional1D::Atoms(Atoms::new(vec![1.0, 0.0], vec![1.0, 1.0]).unwrap());
        assert!(matches!(a.bound_on(0.0, 1.0), Err(Error::Unsupported(_))));
        assert!(matches!(a.density(0.0), Err(Error::Unsupported(_))));
        assert_eq!(a.mean(), 0.5);
    }

    #[test]
    fn grid_is_normalized_and_matches_quadrature() {
        let g = GridDensity::from_log_density(-8.0, 8.0, 1025, |t| -0.5 * t * t - 0.1 * t.powi(4)).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-12);
        let q = quad::integrate(|t| g.density(t), -8.0, 8.0, 1e-12, 0.0, 10_000).unwrap();
        assert!((q.value - 1.0).abs() < 1e-8, "{}", q.value);
    }

    #[test]
    fn grid_inverse_cdf_is_monotone_and_consistent() {
        let g = GridDensity::from_values(0.0, 2.0, vec![0.0, 1.0, 3.0, 0.5, 0.0]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let u = k as f64 / 1000.0;
            let x = g.inverse_cdf(u);
            assert!(x >= prev - 1e-12);
            prev = x;
        }
        // CDF at inverse(u) returns u
        for &u in &[0.1, 0.37, 0.5, 0.9] {
            let x = g.inverse_cdf(u);
            assert!((g.cdf(x) - u).abs() < 1e-14, "{u} {}", g.cdf(x));
        }
    }

    #[test]
    fn uniform_grid_sampling_mean() {
        let g = Conditional1D::Grid(GridDensity::from_values(0.0, 1.0, vec![1.0; 11]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let acc: Accumulator = (0..100_000).map(|_| g.sample(&mut rng)).collect();
        let e = acc.estimate();
        assert!((e.value - 0.5).abs() < 3.0 * e.stderr);
        assert!((g.mean() - 0.5).abs() < 1e-14);
    }
}
