//! Mean/stderr accumulation for Monte-Carlo estimates.

use serde::{Deserialize, Serialize};

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub nsamples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            nsamples: 0,
        }
    }

    /// `|self - other| <= k * sqrt(se1^2 + se2^2)`.
    pub fn agrees_with(&self, other: f64, other_se: f64, k: f64) -> bool {
        (self.value - other).abs() <= k * self.stderr.hypot(other_se)
    }
}

/// Welford accumulator; merges by sample-weighted mean and pooled variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean,
            stderr: if self.n == 0 {
                0.0
            } else {
                (self.variance() / self.n as f64).sqrt()
            },
            nsamples: self.n,
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Batch-means estimate for a correlated series (e.g. an MCMC chain).
pub fn batch_means(series: &[f64], batches: usize) -> Estimate {
    let n = series.len();
    let b = batches.clamp(2, n.max(2));
    if n < b {
        let acc: Accumulator = series.iter().copied().collect();
        return acc.estimate();
    }
    let size = n / b;
    let acc: Accumulator = (0..b)
        .map(|k| series[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let total = series[..b * size].iter().sum::<f64>() / (b * size) as f64;
    Estimate {
        value: total,
        stderr: (acc.variance() / b as f64).sqrt(),
        nsamples: n as u64,
    }
}

/// Delete-one-batch jackknife for a smooth statistic of batch-level inputs.
///
/// `stat` receives the index range of batches to *include* via a mask and
/// returns the statistic computed on those batches.
pub fn jackknife<F>(batches: usize, stat: F) -> (f64, f64)
where
    F: Fn(&[bool]) -> f64,
{
    let all = vec![true; batches];
    let full = stat(&all);
    let mut mask = all.clone();
    let loo: Vec<f64> = (0..batches)
        .map(|k| {
            mask[k] = false;
            let v = stat(&mask);
            mask[k] = true;
            v
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / batches as f64;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (batches as f64 - 1.0)
        / batches as f64;
    (full, var.sqrt())
}

/// Two-sided standard-normal tail `P(|Z| > z)`.
pub fn normal_two_sided_tail(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 17) as f64 * 0.3 - 1.0).collect();
        let whole: Accumulator = xs.iter().copied().collect();
        let mut a: Accumulator = xs[..33].iter().copied().collect();
        let b: Accumulator = xs[33..].iter().copied().collect();
        a.merge(&b);
        assert!((a.mean() - whole.mean()).abs() < 1e-12);
        assert!((a.variance() - whole.variance()).abs() < 1e-12);
        assert_eq!(a.count(), 100);
    }

    #[test]
    fn two_sided_tail_at_1_96() {
        let p = normal_two_sided_tail(1.959_963_984_540_054);
        assert!((p - 0.05).abs() < 1e-12, "{p:e}");
        assert_eq!(normal_two_sided_tail(0.0), 1.0);
    }

    #[test]
    fn jackknife_of_mean_matches_batch_means() {
        let series: Vec<f64> = (0..400).map(|i| ((i * 7919) % 101) as f64).collect();
        let b = 20;
        let size = series.len() / b;
        let means: Vec<f64> = series.chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
        let (v, se) = jackknife(b, |mask| {
            let (s, c) = means
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .fold((0.0, 0.0), |(s, c), (x, _)| (s + x, c + 1.0));
            s / c
        });
        let bm = batch_means(&series, b);
        assert!((v - bm.value).abs() < 1e-9);
        assert!((se - bm.stderr).abs() < 1e-9);
    }
}
