use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seqspace::{Sequence, SpaceSpec};

/// The isometry `τ_m` from level-`m` coefficients `(a_i)` (orthonormal
/// basis `λ_i^m φ_i`) onto the weighted space `ℓ²_(λ^{-2m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleMap<T> {
    m: i32,
    lambdas: Vec<T>,
}

impl<T: Real> ScaleMap<T> {
    pub fn new(m: i32, lambdas: Vec<T>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::invalid("empty eigenvalue table"));
        }
        if lambdas.iter().any(|l| !(l.is_finite() && *l > T::zero())) {
            return Err(Error::invalid("eigenvalues must be finite and > 0"));
        }
        Ok(Self { m, lambdas })
    }

    pub fn level(&self) -> i32 {
        self.m
    }

    fn check(&self, len: usize) -> Result<()> {
        if len > self.lambdas.len() {
            return Err(Error::invalid(format!(
                "{len} coefficients exceed the {} available eigenvalues",
                self.lambdas.len()
            )));
        }
        Ok(())
    }

    /// `a_i ↦ λ_i^m a_i`.
    pub fn tau(&self, a: &[T]) -> Result<Vec<T>> {
        self.check(a.len())?;
        Ok(a.iter().zip(&self.lambdas).map(|(&x, &l)| l.powi(self.m) * x).collect())
    }

    /// `b_i ↦ λ_i^{-m} b_i`.
    pub fn tau_inverse(&self, b: &[T]) -> Result<Vec<T>> {
        self.check(b.len())?;
        Ok(b.iter().zip(&self.lambdas).map(|(&x, &l)| l.powi(-self.m) * x).collect())
    }

    /// `‖f‖_m = (Σ a_i²)^{1/2}`.
    pub fn level_norm(&self, a: &[T]) -> T {
        a.iter().fold(T::zero(), |s, &x| s + x * x).sqrt()
    }

    /// The target space `ℓ²_(λ^{-2m})` truncated to `len` coordinates.
    pub fn target_space(&self, len: usize) -> Result<SpaceSpec<T>> {
        self.check(len)?;
        SpaceSpec::lp(T::lit(2.0), &Sequence::eigen(&self.lambdas, self.m), len)
    }
}
