//! Truncated weighted sequence spaces.
//!
//! A [`SpaceSpec`] carries `N` live coordinates; coordinates beyond `N` are
//! frozen at zero. All indices in the public API are 0-based (coordinate
//! `i` here is coordinate `i + 1` in the usual 1-based notation), but weight
//! generators are evaluated at the 1-based position so that `power(a)` means
//! `β_i = i^{-a}` with `i ≥ 1`.

mod cutoff;
mod cylinder;
mod net;

pub use cutoff::CutoffProfile;
pub use cylinder::{build_fmk, BaseFn, CylinderFunction};
pub use net::epsilon_net;

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A positive sequence generator, evaluated at 1-based positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sequence<T> {
    /// `c` for every position.
    Constant(T),
    /// `i^{-a}`.
    Power(T),
    /// Explicit values; position `i` reads `values[i - 1]`.
    Table(Vec<T>),
}

impl<T: Real> Sequence<T> {
    /// Weights `λ_i^{-2m}` from an eigenvalue table.
    pub fn eigen(lambdas: &[T], m: i32) -> Self {
        Sequence::Table(lambdas.iter().map(|&l| l.powi(-2 * m)).collect())
    }

    /// Value at 0-based coordinate `i`, or `None` if a table is too short.
    pub fn at(&self, i: usize) -> Option<T> {
        match self {
            Sequence::Constant(c) => Some(*c),
            Sequence::Power(a) => Some(T::from_usize(i + 1)?.powf(-*a)),
            Sequence::Table(v) => v.get(i).copied(),
        }
    }

    pub fn take(&self, n: usize) -> Option<Vec<T>> {
        (0..n).map(|i| self.at(i)).collect()
    }

    /// Checks strict positivity and finiteness on the first `n` positions.
    pub fn validate_positive(&self, n: usize, what: &str) -> Result<Vec<T>> {
        let vals = self
            .take(n)
            .ok_or_else(|| Error::invalid(format!("{what}: table shorter than {n}")))?;
        for (i, v) in vals.iter().enumerate() {
            if !(v.is_finite() && *v > T::zero()) {
                return Err(Error::invalid(format!(
                    "{what}: entry {} is {v}, must be finite and > 0",
                    i + 1
                )));
            }
        }
        Ok(vals)
    }
}

/// Which of the three state spaces a truncation realizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpaceKind<T> {
    WeightedLp { p: T },
    WeightedLinf,
    ProductRN,
}

/// A truncated weighted sequence space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec<T> {
    kind: SpaceKind<T>,
    weights: Vec<T>,
}

impl<T: Real> SpaceSpec<T> {
    pub fn new(kind: SpaceKind<T>, weights: &Sequence<T>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("truncation N must be positive"));
        }
        if let SpaceKind::WeightedLp { p } = kind {
            if !(p.is_finite() && p >= T::one()) {
                return Err(Error::invalid(format!("p must be >= 1, got {p}")));
            }
        }
        let weights = match kind {
            // the metric of the product space does not use weights
            SpaceKind::ProductRN => vec![T::one(); n],
            _ => weights.validate_positive(n, "weights")?,
        };
        Ok(Self { kind, weights })
    }

    pub fn lp(p: T, weights: &Sequence<T>, n: usize) -> Result<Self> {
        Self::new(SpaceKind::WeightedLp { p }, weights, n)
    }

    pub fn linf(weights: &Sequence<T>, n: usize) -> Result<Self> {
        Self::new(SpaceKind::WeightedLinf, weights, n)
    }

    pub fn product(n: usize) -> Self {
        Self {
            kind: SpaceKind::ProductRN,
            weights: vec![T::one(); n],
        }
    }

    pub fn kind(&self) -> SpaceKind<T> {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    fn check(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, space has {}",
                x.len(),
                self.dim()
            )));
        }
        check_finite(x)
    }

    /// Space norm; for the product space, the metric distance to the origin.
    pub fn norm(&self, x: &[T]) -> Result<T> {
        self.check(x)?;
        Ok(match self.kind {
            SpaceKind::WeightedLp { p } => x
                .iter()
                .zip(&self.weights)
                .fold(T::zero(), |s, (&xi, &b)| s + b * xi.abs().powf(p))
                .powf(p.recip()),
            SpaceKind::WeightedLinf => x
                .iter()
                .zip(&self.weights)
                .fold(T::zero(), |s, (&xi, &b)| s.max(b * xi.abs())),
            SpaceKind::ProductRN => {
                let zero = vec![T::zero(); x.len()];
                metric_rn(x, &zero)?
            }
        })
    }

    /// Distance induced by the norm (or the product metric).
    pub fn distance(&self, x: &[T], y: &[T]) -> Result<T> {
        match self.kind {
            SpaceKind::ProductRN => metric_rn(x, y),
            _ => {
                if x.len() != y.len() {
                    return Err(Error::invalid("length mismatch"));
                }
                let d: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
                self.norm(&d)
            }
        }
    }

    /// Per-coordinate box bound `a_{M,i}` (plateau radius of `η_{M,i}`).
    pub fn box_bound(&self, bx: &BoxSpec<T>, i: usize) -> T {
        let g = bx.gammas[i];
        match self.kind {
            SpaceKind::WeightedLp { p } => {
                let r = p.recip();
                bx.m * g.powf(-r) * self.weights[i].powf(-r)
            }
            SpaceKind::WeightedLinf => bx.m / (g * self.weights[i]),
            SpaceKind::ProductRN => bx.m * g,
        }
    }

    /// Support radius `b_{M,i} = 3 a_{M,i}`.
    pub fn box_outer_bound(&self, bx: &BoxSpec<T>, i: usize) -> T {
        T::lit(3.0) * self.box_bound(bx, i)
    }

    /// Whether `x` lies in the compact box `D_M`.
    pub fn box_contains(&self, bx: &BoxSpec<T>, x: &[T]) -> Result<bool> {
        self.check(x)?;
        bx.check_dim(self.dim())?;
        Ok(x
            .iter()
            .enumerate()
            .all(|(i, xi)| xi.abs() <= self.box_bound(bx, i)))
    }

    /// Cutoff `η_{M,i}(x) = η(x / a_{M,i})`.
    pub fn eta_scaled(&self, profile: &CutoffProfile, bx: &BoxSpec<T>, i: usize, x: T) -> T {
        profile.eval(x / self.box_bound(bx, i))
    }
}

fn check_finite<T: Real>(x: &[T]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::invalid(format!("coordinate {} is not finite", i + 1))),
        None => Ok(()),
    }
}

/// Metric of the product space `ℝ^ℕ`, exact for vectors supported on the
/// first `N` coordinates: for `k ≥ N` the partial norms are constant, so the
/// weight tail `Σ_{k≥N} 2^{-k} = 2^{-(N-1)}` is folded into the last term.
pub fn metric_rn<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::invalid("length mismatch"));
    }
    check_finite(x)?;
    check_finite(y)?;
    let n = x.len();
    let half = T::lit(0.5);
    let mut sq = T::zero();
    let mut w = T::one();
    let mut d = T::zero();
    for k in 0..n {
        let diff = x[k] - y[k];
        sq = sq + diff * diff;
        let nk = sq.sqrt();
        let weight = if k + 1 == n { w } else { w * half };
        d = d + weight * nk / (T::one() + nk);
        w = w * half;
    }
    Ok(d)
}

/// A state vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point<T>(Vec<T>);

impl<T: Real> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        check_finite(&coords)?;
        Ok(Self(coords))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T> Deref for Point<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// The compact box `D_M` described by a level `M` and a sequence `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpec<T> {
    m: T,
    gammas: Vec<T>,
}

impl<T: Real> BoxSpec<T> {
    pub fn new(m: T, gammas: &Sequence<T>, n: usize) -> Result<Self> {
        if !(m.is_finite() && m > T::zero()) {
            return Err(Error::invalid(format!("box level M must be > 0, got {m}")));
        }
        let gammas = gammas.validate_positive(n, "gammas")?;
        Ok(Self { m, gammas })
    }

    pub fn level(&self) -> T {
        self.m
    }

    pub fn gammas(&self) -> &[T] {
        &self.gammas
    }

    /// Same `γ`, different level.
    pub fn with_level(&self, m: T) -> Self {
        Self {
            m,
            gammas: self.gammas.clone(),
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.gammas.len() < n {
            return Err(Error::invalid("box gamma table shorter than space"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp2(n: usize) -> SpaceSpec<f64> {
        SpaceSpec::lp(2.0, &Sequence::Constant(1.0), n).unwrap()
    }

    #[test]
    fn lp_norm_of_3_4() {
        assert_eq!(lp2(2).norm(&[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn zero_has_zero_norm_in_every_kind() {
        let z = [0.0; 3];
        assert_eq!(lp2(3).norm(&z).unwrap(), 0.0);
        assert_eq!(SpaceSpec::linf(&Sequence::Power(1.0), 3).unwrap().norm(&z).unwrap(), 0.0);
        assert_eq!(SpaceSpec::<f64>::product(3).norm(&z).unwrap(), 0.0);
    }

    #[test]
    fn linf_weighted_max() {
        let s = SpaceSpec::linf(&Sequence::Table(vec![1.0, 0.5]), 2).unwrap();
        assert_eq!(s.norm(&[1.0, 4.0]).unwrap(), 2.0);
    }

    #[test]
    fn nan_is_rejected() {
        assert!(matches!(lp2(2).norm(&[f64::NAN, 1.0]), Err(Error::InvalidInput(_))));
        assert!(Point::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn invalid_spaces_are_rejected() {
        assert!(SpaceSpec::lp(0.5, &Sequence::Constant(1.0), 2).is_err());
        assert!(SpaceSpec::lp(2.0, &Sequence::Table(vec![1.0, 0.0]), 2).is_err());
        assert!(SpaceSpec::lp(2.0, &Sequence::Table(vec![1.0]), 2).is_err());
        assert!(SpaceSpec::lp(2.0, &Sequence::Constant(1.0), 0).is_err());
    }

    #[test]
    fn metric_identity_and_unit_shift() {
        let x = [0.3, -1.0, 2.0, 0.0];
        assert_eq!(metric_rn(&x, &x).unwrap(), 0.0);
        // oracle: explicit partial sums over a long truncation of the infinite series
        let oracle: f64 = (1..=60).map(|k| 0.5f64.powi(k) * 0.5).sum();
        let d: f64 = metric_rn(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4]).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!((d - oracle).abs() < 1e-15);
    }

    #[test]
    fn metric_tail_folding_matches_explicit_zero_padding() {
        let x = [0.7, -0.2, 1.5];
        let y = [0.1, 0.4, -0.3];
        let mut xp = x.to_vec();
        let mut yp = y.to_vec();
        xp.resize(64, 0.0);
        yp.resize(64, 0.0);
        let exact: f64 = metric_rn(&x, &y).unwrap();
        let padded = metric_rn(&xp, &yp).unwrap();
        assert!((exact - padded).abs() < 1e-15);
    }

    #[test]
    fn metric_tends_to_one_monotonically() {
        let vals: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&c| metric_rn(&[c, 0.0], &[0.0, 0.0]).unwrap())
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2] && vals[2] < 1.0);
        assert!((vals[2] - 1000.0 / 1001.0).abs() < 1e-12);
    }

    #[test]
    fn box_membership() {
        let n = 6;
        let s = lp2(n);
        let gam = Sequence::Table((1..=n).map(|i| (i * i) as f64).collect());
        let bx = BoxSpec::new(1.0, &gam, n).unwrap();
        assert!(s.box_contains(&bx, &[0.0; 6]).unwrap());
        let x: Vec<f64> = (1..=n).map(|i| 1.0 / i as f64).collect();
        assert!(s.box_contains(&bx, &x).unwrap());
        let mut y = x.clone();
        y[0] = 2.0;
        assert!(!s.box_contains(&bx, &y).unwrap());
    }

    #[test]
    fn box_bounds_per_kind() {
        let bx = BoxSpec::<f64>::new(2.0, &Sequence::Constant(4.0), 1).unwrap();
        let b = Sequence::Constant(0.25);
        let lp = SpaceSpec::lp(2.0, &b, 1).unwrap();
        let li = SpaceSpec::linf(&b, 1).unwrap();
        let rn = SpaceSpec::<f64>::product(1);
        assert!((lp.box_bound(&bx, 0) - 2.0).abs() < 1e-15);
        assert!((li.box_bound(&bx, 0) - 2.0).abs() < 1e-15);
        assert!((rn.box_bound(&bx, 0) - 8.0).abs() < 1e-15);
        assert_eq!(lp.box_outer_bound(&bx, 0), 3.0 * lp.box_bound(&bx, 0));
    }

    #[test]
    fn eigen_weights() {
        let s = Sequence::eigen(&[0.5f64, 0.25], -2);
        assert_eq!(s.take(2).unwrap(), vec![0.0625, 0.25f64.powi(4)]);
    }

    #[test]
    fn generic_over_f32() {
        let s = SpaceSpec::<f32>::lp(2.0, &Sequence::Constant(1.0), 2).unwrap();
        assert_eq!(s.norm(&[3.0, 4.0]).unwrap(), 5.0f32);
    }
}
