use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad;

const ABS_TOL: f64 = 1e-10;
const MAX_SEGMENTS: usize = 20_000;

fn validate(d: usize, eps: f64, m0sq: f64, n: &[i64]) -> Result<()> {
    if !(1..=3).contains(&d) || n.len() != d {
        return Err(Error::invalid(format!("lattice vector of length {} for dimension {d}", n.len())));
    }
    if !(eps.is_finite() && eps > 0.0 && m0sq.is_finite() && m0sq > 0.0) {
        return Err(Error::invalid("lattice spacing and m0^2 must be > 0"));
    }
    Ok(())
}

/// `(2π)^{-1} ∫_{-π}^{π} cos(nθ) / (b + 2(1 - cos θ)) dθ = r^{|n|} / √(b(b+4))`
/// with `r = 2 / (b + 2 + √(b(b+4)))`.
fn chain_green(b: f64, n: i64) -> f64 {
    let s = (b * (b + 4.0)).sqrt();
    let r = 2.0 / (b + 2.0 + s);
    r.powi(n.unsigned_abs() as i32) / s
}

/// Closed form on `εℤ`: `D(x) = 1/(m0 √(ε²m0²+4)) · r^{|x|/ε}`.
pub fn lattice_propagator_1d_exact(eps: f64, m0sq: f64, n: i64) -> f64 {
    eps * chain_green(eps * eps * m0sq, n)
}

/// Infinite-volume lattice free propagator `D^{(ε)}(εn)` by quadrature over
/// the Brillouin zone.
///
/// In `d ≥ 2` the last axis is integrated in closed form (the `d = 1`
/// identity, itself checked against plain quadrature) and the remaining
/// axes by nested adaptive Gauss–Kronrod.
pub fn lattice_propagator(d: usize, eps: f64, m0sq: f64, n: &[i64]) -> Result<f64> {
    validate(d, eps, m0sq, n)?;
    let c0 = eps * eps * m0sq;
    let pref = eps.powi(2 - d as i32);
    let hump = |t: f64| 4.0 * (0.5 * t).sin().powi(2);
    let v = match d {
        1 => {
            let f = |t: f64| (n[0] as f64 * t).cos() / (c0 + hump(t));
            quad::integrate(f, 0.0, PI, ABS_TOL, 0.0, MAX_SEGMENTS)?.value / PI
        }
        2 => {
            let f = |t: f64| (n[0] as f64 * t).cos() * chain_green(c0 + hump(t), n[1]);
            quad::integrate(f, 0.0, PI, ABS_TOL, 0.0, MAX_SEGMENTS)?.value / PI
        }
        _ => {
            let outer = |t1: f64| -> f64 {
                let inner = |t2: f64| (n[1] as f64 * t2).cos() * chain_green(c0 + hump(t1) + hump(t2), n[2]);
                match quad::integrate(inner, 0.0, PI, ABS_TOL, 0.0, MAX_SEGMENTS) {
                    Ok(r) => (n[0] as f64 * t1).cos() * r.value / PI,
                    Err(_) => f64::NAN,
                }
            };
            let r = quad::integrate(outer, 0.0, PI, ABS_TOL, 0.0, MAX_SEGMENTS)?;
            if !r.value.is_finite() {
                return Err(Error::numerical("inner propagator quadrature did not converge"));
            }
            r.value / PI
        }
    };
    Ok(pref * v)
}

/// Covariance of the Gaussian lattice field on the periodic box of `L`
/// sites per axis with mass term `mass_sq`: the momentum sum
/// `(εL)^{-d} Σ_k e^{ik·x} / (2ε^{-2} Σ(1 - cos εk_i) + mass_sq)`.
pub fn periodic_lattice_propagator(d: usize, l: usize, eps: f64, mass_sq: f64, n: &[i64]) -> Result<f64> {
    validate(d, eps, mass_sq, n)?;
    if l == 0 {
        return Err(Error::invalid("box must have at least one site per axis"));
    }
    let c0 = eps * eps * mass_sq;
    let total = l.pow(d as u32);
    let mut sum = 0.0;
    for j in 0..total {
        let mut rem = j;
        let mut phase = 0.0;
        let mut den = c0;
        for &ni in n.iter().take(d) {
            let ja = rem % l;
            rem /= l;
            let t = 2.0 * PI * ja as f64 / l as f64;
            phase += t * ni as f64;
            den += 4.0 * (0.5 * t).sin().powi(2);
        }
        sum += phase.cos() / den;
    }
    Ok(eps.powi(2 - d as i32) * sum / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert!((lattice_propagator_1d_exact(1.0, 1.0, 0) - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((lattice_propagator_1d_exact(1.0, 100.0, 0) - 1.0 / 10400f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for &(eps, m2) in &[(1.0, 1.0), (1.0, 100.0), (0.5, 0.3)] {
            for n in [-3i64, 0, 1, 4] {
                let q = lattice_propagator(1, eps, m2, &[n]).unwrap();
                let e = lattice_propagator_1d_exact(eps, m2, n);
                assert!((q - e).abs() < 1e-8, "{eps} {m2} {n}: {q} vs {e}");
            }
        }
    }

    #[test]
    fn parity_is_exact() {
        let a = lattice_propagator(2, 1.0, 0.5, &[2, -1]).unwrap();
        let b = lattice_propagator(2, 1.0, 0.5, &[-2, 1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn higher_dimensions_reduce_consistently() {
        // the d=2 value at large mass is dominated by the on-site term 1/(ε²m²+4)
        let v = lattice_propagator(2, 1.0, 1e4, &[0, 0]).unwrap();
        assert!((v - 1.0 / (1e4 + 4.0)).abs() < 1e-7);
        let w = lattice_propagator(3, 1.0, 1.0, &[0, 0, 0]).unwrap();
        let w_periodic = periodic_lattice_propagator(3, 24, 1.0, 1.0, &[0, 0, 0]).unwrap();
        assert!((w - w_periodic).abs() < 1e-6, "{w} {w_periodic}");
    }

    #[test]
    fn periodic_tends_to_infinite_volume() {
        let inf = lattice_propagator_1d_exact(1.0, 1.0, 2);
        let p8 = periodic_lattice_propagator(1, 8, 1.0, 1.0, &[2]).unwrap();
        let p64 = periodic_lattice_propagator(1, 64, 1.0, 1.0, &[2]).unwrap();
        assert!((p64 - inf).abs() < 1e-14);
        assert!((p8 - inf).abs() < 1e-2);
    }

    #[test]
    fn l1_sum_stabilizes() {
        let sums: Vec<f64> = [5, 10, 20, 40]
            .iter()
            .map(|&r| (-r..=r).map(|n| lattice_propagator_1d_exact(1.0, 1.0, n).abs()).sum())
            .collect();
        let incs: Vec<f64> = sums.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(incs.windows(2).all(|w| w[1] <= w[0]));
        assert!(incs[2] < 1e-8);
        // ℓ¹ norm of the lattice Green function is 1/m0²
        assert!((sums[3] - 1.0).abs() < 1e-12);
    }
}
