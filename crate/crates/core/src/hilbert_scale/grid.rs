use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// Periodic grid on `[-R, R)^d` with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub d: usize,
    pub r: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(d: usize, r: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::invalid(format!("grid dimension must be 1, 2 or 3, got {d}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("half-extent must be > 0, got {r}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!("points per axis must be even and >= 8, got {n}")));
        }
        Ok(Self { d, r, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.r / self.n as f64
    }

    /// Total number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `h^d`.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    fn axis_index(&self, mut idx: usize) -> Vec<usize> {
        (0..self.d)
            .map(|_| {
                let c = idx % self.n;
                idx /= self.n;
                c
            })
            .collect()
    }

    /// Coordinates of grid point `idx` (first axis fastest).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        self.axis_index(idx).iter().map(|&c| -self.r + h * c as f64).collect()
    }

    /// `|x|²` at each grid point.
    pub fn radius_sq(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i).iter().map(|x| x * x).sum()).collect()
    }

    /// Angular wavenumber `2πm/(2R)` of FFT bin `j`.
    fn wavenumber(&self, j: usize) -> f64 {
        let m = if j <= self.n / 2 { j as f64 } else { j as f64 - self.n as f64 };
        PI * m / self.r
    }

    /// `|k|²` at each FFT bin.
    pub fn k_sq(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.axis_index(i).iter().map(|&j| self.wavenumber(j).powi(2)).sum())
            .collect()
    }

    /// `⟨f, g⟩ = h^d Σ f g`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.cell() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::invalid(format!("grid function has {} values, grid has {}", f.len(), self.len())));
        }
        Ok(())
    }

    /// Applies the Fourier multiplier `mult(|k|²)` on the periodic grid.
    pub fn apply_multiplier<M: Fn(f64) -> f64>(&self, f: &[f64], mult: M) -> Result<Vec<f64>> {
        self.check(f)?;
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_all_axes(&mut buf, false);
        for (b, k2) in buf.iter_mut().zip(self.k_sq()) {
            *b *= mult(k2);
        }
        self.fft_all_axes(&mut buf, true);
        let norm = 1.0 / self.len() as f64;
        Ok(buf.iter().map(|c| c.re * norm).collect())
    }

    fn fft_all_axes(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let mut planner = FftPlanner::new();
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.d {
            let stride = n.pow(axis as u32);
            for start in 0..self.len() {
                // visit each line once: its first element has axis index 0
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for (k, l) in line.iter_mut().enumerate() {
                    *l = buf[start + k * stride];
                }
                fft.process(&mut line);
                for (k, l) in line.iter().enumerate() {
                    buf[start + k * stride] = *l;
                }
            }
        }
    }

    /// `(|x|²+1)^{-(d+1)/2} (-Δ+1)^{-(d+1)/2} (|x|²+1)^{-(d+1)/2} f`.
    pub fn apply_h_inverse(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        let s = 0.5 * (self.d as f64 + 1.0);
        let w: Vec<f64> = self.radius_sq().iter().map(|r2| (r2 + 1.0).powf(-s)).collect();
        let g: Vec<f64> = f.iter().zip(&w).map(|(a, b)| a * b).collect();
        let g = self.apply_multiplier(&g, |k2| (k2 + 1.0).powf(-s))?;
        Ok(g.iter().zip(&w).map(|(a, b)| a * b).collect())
    }
}
