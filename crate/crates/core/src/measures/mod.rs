//! Probability laws on truncated spaces with exact single-coordinate
//! conditional kernels.

mod conditional;
mod phi4;

pub use conditional::{Atoms, Conditional1D, GridDensity};
pub use phi4::{Phi4Model, Phi4Params};

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::seqspace::Point;
use crate::stats::{batch_means, Accumulator, Estimate};

/// A one-dimensional factor of a product law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Marginal {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Atoms(Atoms),
}

impl Marginal {
    pub fn standard_normal() -> Self {
        Marginal::Normal { mean: 0.0, sd: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        self.law().map(|_| ())
    }

    fn law(&self) -> Result<Conditional1D> {
        match self {
            Marginal::Normal { mean, sd } => Conditional1D::gaussian(*mean, sd * sd),
            Marginal::Uniform { lo, hi } => Conditional1D::uniform(*lo, *hi),
            Marginal::Atoms(a) => Ok(Conditional1D::Atoms(a.clone())),
        }
    }

    fn tail(&self, t: f64) -> f64 {
        match self {
            Marginal::Normal { mean, sd } => gaussian_abs_tail(*mean, *sd, t),
            Marginal::Uniform { lo, hi } => {
                let inside = (hi.min(t) - lo.max(-t)).max(0.0);
                1.0 - inside / (hi - lo)
            }
            Marginal::Atoms(a) => a
                .locs
                .iter()
                .zip(&a.masses)
                .filter(|(x, _)| x.abs() > t)
                .map(|(_, m)| m)
                .sum(),
        }
    }

    fn moment2(&self) -> f64 {
        match self {
            Marginal::Normal { mean, sd } => mean * mean + sd * sd,
            Marginal::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
            Marginal::Atoms(a) => a.locs.iter().zip(&a.masses).map(|(x, m)| m * x * x).sum(),
        }
    }
}

/// `P(|X| > t)` for `X ~ N(mean, sd²)`.
fn gaussian_abs_tail(mean: f64, sd: f64, t: f64) -> f64 {
    if t < 0.0 {
        return 1.0;
    }
    let s = sd * std::f64::consts::SQRT_2;
    0.5 * libm::erfc((t - mean) / s) + 0.5 * libm::erfc((t + mean) / s)
}

/// Centered Gaussian with a dense covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedGaussian {
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl CorrelatedGaussian {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || cov.ncols() != n {
            return Err(Error::invalid("covariance must be a non-empty square matrix"));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::invalid(format!("covariance is not symmetric (max asymmetry {asym:e})")));
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::invalid("covariance is not positive definite"))?;
        let precision = chol.inverse();
        Ok(Self {
            chol: chol.l(),
            cov,
            precision,
        })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.cov.nrows();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (0..n)
            .map(|i| (0..=i).map(|j| self.chol[(i, j)] * z[j]).sum())
            .collect()
    }

    fn conditional(&self, i: usize, x: &[f64]) -> Result<Conditional1D> {
        let p = &self.precision;
        let pii = p[(i, i)];
        let s: f64 = (0..x.len()).filter(|&j| j != i).map(|j| p[(i, j)] * x[j]).sum();
        Conditional1D::gaussian(-s / pii, 1.0 / pii)
    }
}

/// Finite joint law on a product grid of atoms, stored row-major with the
/// first coordinate varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteModel {
    axes: Vec<Vec<f64>>,
    pmf: Vec<f64>,
}

impl DiscreteModel {
    pub fn new(axes: Vec<Vec<f64>>, pmf: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
            return Err(Error::invalid("discrete model needs non-empty atom axes"));
        }
        let states: usize = axes.iter().map(Vec::len).product();
        if pmf.len() != states {
            return Err(Error::invalid(format!("pmf has {} entries, grid has {states} states", pmf.len())));
        }
        if pmf.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::invalid("pmf entries must be finite and >= 0"));
        }
        let total: f64 = pmf.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("pmf has zero mass"));
        }
        Ok(Self {
            axes,
            pmf: pmf.into_iter().map(|m| m / total).collect(),
        })
    }

    /// Independent coordinates with the given atom laws.
    pub fn product(factors: &[Atoms]) -> Result<Self> {
        let axes: Vec<Vec<f64>> = factors.iter().map(|a| a.locs.clone()).collect();
        let mut pmf = vec![1.0];
        for a in factors {
            pmf = pmf.iter().flat_map(|p| a.masses.iter().map(move |m| p * m)).collect();
        }
        Self::new(axes, pmf)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn states(&self) -> usize {
        self.pmf.len()
    }

    pub fn mass(&self, state: usize) -> f64 {
        self.pmf[state]
    }

    /// Per-coordinate atom indices of a flat state index.
    pub fn decode(&self, mut state: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (k, ax) in self.axes.iter().enumerate().rev() {
            idx[k] = state % ax.len();
            state /= ax.len();
        }
        idx
    }

    pub fn encode(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, ax)| acc * ax.len() + i)
    }

    pub fn point(&self, state: usize) -> Vec<f64> {
        self.decode(state)
            .iter()
            .zip(&self.axes)
            .map(|(&i, ax)| ax[i])
            .collect()
    }

    /// Atom indices of a point that lies on the grid.
    pub fn locate(&self, x: &[f64], skip: Option<usize>) -> Result<Vec<usize>> {
        x.iter()
            .zip(&self.axes)
            .enumerate()
            .map(|(k, (v, ax))| {
                if Some(k) == skip {
                    return Ok(0);
                }
                ax.iter()
                    .position(|a| (a - v).abs() <= 1e-12 * (1.0 + a.abs()))
                    .ok_or_else(|| Error::invalid(format!("coordinate {} value {v} is not an atom", k + 1)))
            })
            .collect()
    }

    fn conditional(&self, i: usize, x: &[f64]) -> Result<Conditional1D> {
        let mut idx = self.locate(x, Some(i))?;
        let masses: Vec<f64> = (0..self.axes[i].len())
            .map(|k| {
                idx[i] = k;
                self.pmf[self.encode(&idx)]
            })
            .collect();
        let atoms = Atoms::new(self.axes[i].clone(), masses)
            .map_err(|_| Error::invalid("conditioning on a configuration of zero mass"))?;
        Ok(Conditional1D::Atoms(atoms))
    }

    fn marginal(&self, i: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.axes[i].len()];
        for s in 0..self.states() {
            m[self.decode(s)[i]] += self.pmf[s];
        }
        m
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut state = self.states() - 1;
        for (s, m) in self.pmf.iter().enumerate() {
            acc += m;
            if u < acc {
                state = s;
                break;
            }
        }
        self.point(state)
    }
}

/// Draws together with the MCMC sweep count that produced them (zero for
/// exact samplers).
#[derive(Debug, Clone)]
pub struct Draws {
    pub points: Vec<Point<f64>>,
    pub sweeps: u64,
}

#[derive(Debug, Clone)]
pub enum MeasureModel {
    Product(Vec<Marginal>),
    Correlated(CorrelatedGaussian),
    Phi4(Phi4Model),
    Discrete(DiscreteModel),
}

impl MeasureModel {
    pub fn product(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::invalid("product model needs at least one coordinate"));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(MeasureModel::Product(marginals))
    }

    pub fn standard_normal(n: usize) -> Result<Self> {
        Self::product(vec![Marginal::standard_normal(); n])
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasureModel::Product(m) => m.len(),
            MeasureModel::Correlated(g) => g.cov.nrows(),
            MeasureModel::Phi4(p) => p.sites(),
            MeasureModel::Discrete(d) => d.dim(),
        }
    }

    pub fn variant(&self) -> &'static str {
        match self {
            MeasureModel::Product(_) => "product-1d",
            MeasureModel::Correlated(_) => "correlated-gaussian",
            MeasureModel::Phi4(_) => "lattice-phi4",
            MeasureModel::Discrete(_) => "discrete-test",
        }
    }

    /// Whether each conditional ignores the other coordinates.
    pub fn is_product(&self) -> bool {
        matches!(self, MeasureModel::Product(_))
    }

    /// Whether draws come from a Markov chain (correlated in sequence).
    pub fn is_mcmc(&self) -> bool {
        matches!(self, MeasureModel::Phi4(_))
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Result<Point<f64>> {
        let mut d = self.draw(1, rng)?;
        Ok(d.points.pop().expect("one draw"))
    }

    /// `n` draws; for MCMC models a single thinned chain after burn-in.
    pub fn draw(&self, n: usize, rng: &mut StreamRng) -> Result<Draws> {
        let exact = |f: &dyn Fn(&mut StreamRng) -> Vec<f64>, rng: &mut StreamRng| -> Result<Draws> {
            let points = (0..n).map(|_| Point::new(f(rng))).collect::<Result<_>>()?;
            Ok(Draws { points, sweeps: 0 })
        };
        match self {
            MeasureModel::Product(ms) => {
                let laws: Vec<Conditional1D> = ms.iter().map(|m| m.law()).collect::<Result<_>>()?;
                exact(&|r| laws.iter().map(|l| l.sample(r)).collect(), rng)
            }
            MeasureModel::Correlated(g) => exact(&|r| g.sample(r), rng),
            MeasureModel::Discrete(d) => exact(&|r| d.sample(r), rng),
            MeasureModel::Phi4(p) => {
                let (points, sweeps) = p.run_chain(n, rng)?;
                Ok(Draws { points, sweeps })
            }
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dim() {
            return Err(Error::invalid(format!("coordinate {} out of range 1..{}", i + 1, self.dim())));
        }
        Ok(())
    }

    /// Exact full conditional of coordinate `i` given the other entries of
    /// `x` (entry `i` is ignored).
    pub fn conditional(&self, i: usize, x: &[f64]) -> Result<Conditional1D> {
        self.check_index(i)?;
        if x.len() != self.dim() {
            return Err(Error::invalid(format!("point has {} coordinates, model has {}", x.len(), self.dim())));
        }
        match self {
            MeasureModel::Product(ms) => ms[i].law(),
            MeasureModel::Correlated(g) => g.conditional(i, x),
            MeasureModel::Phi4(p) => p.conditional(i, x),
            MeasureModel::Discrete(d) => d.conditional(i, x),
        }
    }

    /// `L_{K,i}` for `K = [a, b]` at the given rest configuration.
    pub fn cond_density_bound(&self, i: usize, x: &[f64], a: f64, b: f64) -> Result<f64> {
        self.conditional(i, x)?.bound_on(a, b)
    }

    /// Exact `μ(|X_i| > t)` when available in closed form.
    pub fn exact_tail(&self, i: usize, t: f64) -> Option<f64> {
        match self {
            MeasureModel::Product(ms) => Some(ms[i].tail(t)),
            MeasureModel::Correlated(g) => Some(gaussian_abs_tail(0.0, g.cov[(i, i)].sqrt(), t)),
            MeasureModel::Discrete(d) => Some(
                d.marginal(i)
                    .iter()
                    .zip(&d.axes[i])
                    .filter(|(_, x)| x.abs() > t)
                    .map(|(m, _)| m)
                    .sum(),
            ),
            MeasureModel::Phi4(_) => None,
        }
    }

    /// Exact `E|X_i|²` when available in closed form.
    pub fn exact_moment2(&self, i: usize) -> Option<f64> {
        match self {
            MeasureModel::Product(ms) => Some(ms[i].moment2()),
            MeasureModel::Correlated(g) => Some(g.cov[(i, i)]),
            MeasureModel::Discrete(d) => Some(d.marginal(i).iter().zip(&d.axes[i]).map(|(m, x)| m * x * x).sum()),
            MeasureModel::Phi4(_) => None,
        }
    }

    /// `μ(|X_i| > t)`: closed form where possible, else Monte Carlo.
    pub fn estimate_tail(&self, i: usize, t: f64, nsamples: usize, rng: &mut StreamRng) -> Result<Estimate> {
        self.check_index(i)?;
        if nsamples == 0 {
            return Err(Error::invalid("nsamples must be positive"));
        }
        if t.is_nan() || t < 0.0 {
            return Err(Error::invalid(format!("threshold must be >= 0, got {t}")));
        }
        if let Some(p) = self.exact_tail(i, t) {
            return Ok(Estimate::exact(p));
        }
        let draws = self.draw(nsamples, rng)?;
        Ok(sample_mean(self, &draws, |x| f64::from(u8::from(x[i].abs() > t))))
    }

    /// `E|X_i|²`: closed form where possible, else Monte Carlo.
    pub fn moment2(&self, i: usize, nsamples: usize, rng: &mut StreamRng) -> Result<Estimate> {
        self.check_index(i)?;
        if nsamples == 0 {
            return Err(Error::invalid("nsamples must be positive"));
        }
        if let Some(m) = self.exact_moment2(i) {
            return Ok(Estimate::exact(m));
        }
        let draws = self.draw(nsamples, rng)?;
        Ok(sample_mean(self, &draws, |x| x[i] * x[i]))
    }
}

const BATCHES: usize = 50;

/// Mean of `f` over draws; batch-means stderr for chain output.
pub fn sample_mean<F: Fn(&[f64]) -> f64>(model: &MeasureModel, draws: &Draws, f: F) -> Estimate {
    let series: Vec<f64> = draws.points.iter().map(|p| f(p)).collect();
    series_mean(model, &series)
}

/// Mean of a per-draw series in draw order.
pub fn series_mean(model: &MeasureModel, series: &[f64]) -> Estimate {
    if model.is_mcmc() {
        batch_means(series, BATCHES)
    } else {
        series.iter().copied().collect::<Accumulator>().estimate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    #[test]
    fn product_conditional_ignores_rest() {
        let m = MeasureModel::standard_normal(3).unwrap();
        let a = m.conditional(1, &[0.0, 0.0, 0.0]).unwrap();
        let b = m.conditional(1, &[5.0, 9.0, -2.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bivariate_conditioning() {
        let rho = 0.6;
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let m = MeasureModel::Correlated(CorrelatedGaussian::new(cov).unwrap());
        match m.conditional(0, &[0.0, 1.0]).unwrap() {
            Conditional1D::Gaussian { mean, var } => {
                assert!((mean - rho).abs() < 1e-14);
                assert!((var - (1.0 - rho * rho)).abs() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(CorrelatedGaussian::new(cov), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn exact_tails_and_moments() {
        let m = MeasureModel::standard_normal(2).unwrap();
        let mut rng = Streams::new(1).stream(&[0]);
        let p = m.estimate_tail(0, 1.959_963_984_540_054, 1, &mut rng).unwrap();
        assert!((p.value - 0.05).abs() < 1e-15 && p.stderr == 0.0);
        assert_eq!(m.estimate_tail(0, 0.0, 1, &mut rng).unwrap().value, 1.0);
        assert!(m.estimate_tail(0, 40.0, 1, &mut rng).unwrap().value < 1e-300);
        assert!(m.estimate_tail(0, 1.0, 0, &mut rng).is_err());
        let g = MeasureModel::product(vec![Marginal::Normal { mean: 0.0, sd: 3.0 }]).unwrap();
        assert_eq!(g.moment2(0, 1, &mut rng).unwrap().value, 9.0);
    }

    #[test]
    fn discrete_encoding_and_conditionals() {
        let a = Atoms::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3]).unwrap();
        let d = DiscreteModel::product(&[a.clone(), a]).unwrap();
        assert_eq!(d.states(), 9);
        for s in 0..9 {
            assert_eq!(d.encode(&d.decode(s)), s);
        }
        let m = MeasureModel::Discrete(d);
        match m.conditional(1, &[1.0, 0.0]).unwrap() {
            Conditional1D::Atoms(at) => assert!(at.masses.iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-15)),
            other => panic!("{other:?}"),
        }
        assert!(m.conditional(1, &[0.5, 0.0]).is_err());
        assert!((m.exact_moment2(0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
