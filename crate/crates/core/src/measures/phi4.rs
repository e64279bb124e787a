//! Lattice Φ⁴ Gibbs measure on a periodic box `(εℤ/εLℤ)^d`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::conditional::{Conditional1D, GridDensity};
use crate::error::{Error, Result};
use crate::seqspace::Point;

const GRID_NODES: usize = 1025;
const TAIL_TOL: f64 = 1e-10;
const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phi4Params {
    pub d: usize,
    pub l: usize,
    pub eps: f64,
    pub m0sq: f64,
    pub lambda: f64,
    pub a_eps: f64,
}

impl Phi4Params {
    /// `a_eps` defaults to `m0sq`.
    pub fn new(d: usize, l: usize, eps: f64, m0sq: f64, lambda: f64, a_eps: Option<f64>) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::invalid(format!("lattice dimension must be 1 or 2, got {d}")));
        }
        if l < 2 {
            return Err(Error::invalid("need at least 2 sites per axis"));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid(format!("lattice spacing must be > 0, got {eps}")));
        }
        if !(m0sq.is_finite() && m0sq > 0.0) {
            return Err(Error::invalid(format!("m0^2 must be > 0, got {m0sq}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("coupling must be >= 0, got {lambda}")));
        }
        let a_eps = a_eps.unwrap_or(m0sq);
        if !a_eps.is_finite() {
            return Err(Error::invalid("counter term must be finite"));
        }
        Ok(Self { d, l, eps, m0sq, lambda, a_eps })
    }

    pub fn sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Row-major index of lattice coordinates `(n_1, …, n_d)`.
    pub fn site_index(&self, coords: &[usize]) -> usize {
        coords.iter().rev().fold(0, |acc, &c| acc * self.l + c % self.l)
    }

    pub fn site_coords(&self, mut idx: usize) -> Vec<usize> {
        (0..self.d)
            .map(|_| {
                let c = idx % self.l;
                idx /= self.l;
                c
            })
            .collect()
    }

    /// Forward neighbor of `idx` along axis `mu` (periodic).
    fn forward(&self, idx: usize, mu: usize, back: bool) -> usize {
        let mut c = self.site_coords(idx);
        c[mu] = if back { (c[mu] + self.l - 1) % self.l } else { (c[mu] + 1) % self.l };
        self.site_index(&c)
    }

    /// The `2d` neighbor slots of a site, with multiplicity.
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        (0..self.d)
            .flat_map(|mu| [self.forward(idx, mu, false), self.forward(idx, mu, true)])
            .collect()
    }

    /// Lattice action with bonds `(x, x + e_μ)`, each counted once.
    pub fn action(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.sites() {
            return Err(Error::invalid(format!(
                "configuration has {} entries, lattice has {} sites",
                phi.len(),
                self.sites()
            )));
        }
        let d = self.d as i32;
        let kin = self.eps.powi(d - 2);
        let vol = self.eps.powi(d);
        let mut s = 0.0;
        for (x, &p) in phi.iter().enumerate() {
            for mu in 0..self.d {
                let y = self.forward(x, mu, false);
                s += 0.5 * kin * (p - phi[y]).powi(2);
            }
            s += 0.5 * self.a_eps * vol * p * p + 0.5 * self.lambda * vol * p.powi(4);
        }
        Ok(s)
    }

    /// `(A, ε^{d-2}, C)` of the single-site exponent `-(A t² - ε^{d-2} t Σ + C t⁴)`.
    fn site_coeffs(&self) -> (f64, f64, f64) {
        let d = self.d as i32;
        let kin = self.eps.powi(d - 2);
        let vol = self.eps.powi(d);
        (self.d as f64 * kin + 0.5 * self.a_eps * vol, kin, 0.5 * self.lambda * vol)
    }
}

/// Single-site conditional exponent: `l(t) = B t - A t² - C t⁴`.
#[derive(Debug, Clone, Copy)]
struct SiteLaw {
    a: f64,
    b: f64,
    c: f64,
}

impl SiteLaw {
    fn log(&self, t: f64) -> f64 {
        self.b * t - self.a * t * t - self.c * t.powi(4)
    }

    fn dlog(&self, t: f64) -> f64 {
        self.b - 2.0 * self.a * t - 4.0 * self.c * t.powi(3)
    }

    /// Unique root of the strictly decreasing `l'`.
    fn mode(&self) -> f64 {
        let mut t = self.b / (2.0 * self.a);
        if self.c == 0.0 {
            return t;
        }
        // l' is concave for t > 0 and convex for t < 0, so Newton from the
        // gaussian mean moves monotonically toward the root
        for _ in 0..200 {
            let g = self.dlog(t);
            let dg = -2.0 * self.a - 12.0 * self.c * t * t;
            let step = g / dg;
            t -= step;
            if step.abs() <= 1e-15 * (1.0 + t.abs()) {
                break;
            }
        }
        t
    }

    fn grid(&self) -> Result<GridDensity> {
        let t0 = self.mode();
        let kappa = 2.0 * self.a + 12.0 * self.c * t0 * t0;
        let mut w = 10.0 / kappa.sqrt();
        let l0 = self.log(t0);
        for _ in 0..60 {
            let (lo, hi) = (t0 - w, t0 + w);
            let g = GridDensity::from_log_density(lo, hi, GRID_NODES, |t| self.log(t) - l0)?;
            // log-concave tails: ∫_b^∞ e^l ≤ e^{l(b)} / |l'(b)|
            let h = 2.0 * w / (GRID_NODES - 1) as f64;
            let z: f64 = (0..GRID_NODES)
                .map(|k| {
                    let wt = if k == 0 || k == GRID_NODES - 1 { 0.5 } else { 1.0 };
                    wt * (self.log(lo + h * k as f64) - l0).exp()
                })
                .sum::<f64>()
                * h;
            let tail = (self.log(hi) - l0).exp() / self.dlog(hi).abs()
                + (self.log(lo) - l0).exp() / self.dlog(lo).abs();
            if tail <= TAIL_TOL * z {
                return Ok(g);
            }
            w *= 1.5;
        }
        Err(Error::numerical("conditional density not normalizable: captured mass < 1 - 1e-8"))
    }

    /// Exact draw by rejection from `N(t0, 1/(2A))`, which dominates
    /// `e^{l(t) - l(t0)}` because `t⁴` lies above its tangent at `t0`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let sd = (0.5 / self.a).sqrt();
        if self.c == 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            return Ok(self.b / (2.0 * self.a) + sd * z);
        }
        let t0 = self.mode();
        let t03 = t0.powi(3);
        let t04 = t0.powi(4);
        for _ in 0..MAX_REJECTIONS {
            let z: f64 = rng.sample(StandardNormal);
            let t = t0 + sd * z;
            let excess = self.c * (t.powi(4) - t04 - 4.0 * t03 * (t - t0));
            if rng.random::<f64>() < (-excess).exp() {
                return Ok(t);
            }
        }
        // pathological acceptance rates: fall back to the tabulated law
        Ok(self.grid()?.inverse_cdf(rng.random()))
    }
}

/// Φ⁴ measure plus heat-bath sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phi4Model {
    pub params: Phi4Params,
    pub burn_in: usize,
    pub thin: usize,
    pub guard: f64,
    #[serde(skip)]
    nbrs: Vec<usize>,
}

impl Phi4Model {
    pub fn new(params: Phi4Params, burn_in: usize, thin: usize, guard: f64) -> Result<Self> {
        if thin == 0 {
            return Err(Error::invalid("thinning must be >= 1"));
        }
        if !(guard > 0.0) {
            return Err(Error::invalid("divergence guard must be > 0"));
        }
        let nbrs = (0..params.sites()).flat_map(|x| params.neighbors(x)).collect();
        Ok(Self { params, burn_in, thin, guard, nbrs })
    }

    pub fn sites(&self) -> usize {
        self.params.sites()
    }

    fn site_law(&self, i: usize, phi: &[f64]) -> SiteLaw {
        let (a, kin, c) = self.params.site_coeffs();
        let k = 2 * self.params.d;
        let sum: f64 = self.nbrs[i * k..(i + 1) * k].iter().map(|&j| phi[j]).sum();
        SiteLaw { a, b: kin * sum, c }
    }

    /// Exact full conditional of site `i`.
    pub fn conditional(&self, i: usize, phi: &[f64]) -> Result<Conditional1D> {
        if i >= self.sites() || phi.len() != self.sites() {
            return Err(Error::invalid("site index or configuration size out of range"));
        }
        let law = self.site_law(i, phi);
        if law.c == 0.0 {
            return Conditional1D::gaussian(law.b / (2.0 * law.a), 0.5 / law.a);
        }
        Ok(Conditional1D::Grid(law.grid()?))
    }

    /// One systematic heat-bath sweep.
    pub fn sweep<R: Rng + ?Sized>(&self, phi: &mut [f64], rng: &mut R) -> Result<()> {
        for i in 0..phi.len() {
            phi[i] = self.site_law(i, phi).sample(rng)?;
        }
        if let Some(k) = phi.iter().position(|v| !(v.abs() <= self.guard)) {
            return Err(Error::Diagnostics(format!(
                "heat-bath chain diverged: |phi[{k}]| = {} exceeds guard {}",
                phi[k].abs(),
                self.guard
            )));
        }
        Ok(())
    }

    /// `n` thinned draws from a chain started at zero; returns the draws and
    /// the number of sweeps used.
    pub fn run_chain<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<Point<f64>>, u64)> {
        let mut phi = vec![0.0; self.sites()];
        for _ in 0..self.burn_in {
            self.sweep(&mut phi, rng)?;
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..self.thin {
                self.sweep(&mut phi, rng)?;
            }
            out.push(Point::new(phi.clone())?);
        }
        Ok((out, (self.burn_in + n * self.thin) as u64))
    }
}
