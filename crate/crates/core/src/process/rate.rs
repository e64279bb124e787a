use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::{Conditional1D, MeasureModel};
use crate::quad::integrate;

const ABS_TOL: f64 = 1e-13;
const REL_TOL: f64 = 1e-10;
const MAX_SEGMENTS: usize = 20_000;
/// Below this acceptance probability the rejection sampler is replaced by
/// bisection on the cumulative rate.
const MIN_ACCEPTANCE: f64 = 1e-4;

/// Integral of `t^{-(α+1)} ρ(x ± t)` over `t ∈ [a, b]` on one side.
fn side_integral(cond: &Conditional1D, x: f64, sign: f64, alpha: f64, a: f64, b: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let f = |t: f64| t.powf(-(alpha + 1.0)) * cond.density(x + sign * t).unwrap_or(0.0);
    // split at kinks of the density and geometrically away from t = a
    let mut cuts: Vec<f64> = cond
        .breakpoints()
        .iter()
        .map(|p| sign * (p - x))
        .filter(|t| *t > a && *t < b)
        .collect();
    let mut t = 2.0 * a;
    while t < b {
        cuts.push(t);
        t *= 2.0;
    }
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(f, w[0], w[1], ABS_TOL, REL_TOL, MAX_SEGMENTS)?.value;
    }
    Ok(total)
}

/// Largest distance from `x` to the support on each side.
fn reach(cond: &Conditional1D, x: f64) -> (f64, f64) {
    let (lo, hi) = cond.effective_support();
    ((x - lo).max(0.0), (hi - x).max(0.0))
}

/// Rates to the left and right of `x`.
pub(crate) fn side_rates(cond: &Conditional1D, x: f64, alpha: f64, delta: f64) -> Result<(f64, f64)> {
    match cond {
        Conditional1D::Atoms(a) => {
            let mut l = 0.0;
            let mut r = 0.0;
            for (y, m) in a.locs.iter().zip(&a.masses) {
                let t = (y - x).abs();
                if t > delta {
                    let k = m * t.powf(-(alpha + 1.0));
                    if *y < x {
                        l += k;
                    } else {
                        r += k;
                    }
                }
            }
            Ok((l, r))
        }
        _ => {
            let (left, right) = reach(cond, x);
            Ok((
                side_integral(cond, x, -1.0, alpha, delta, left)?,
                side_integral(cond, x, 1.0, alpha, delta, right)?,
            ))
        }
    }
}

fn check(alpha: f64, delta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("jump cutoff delta must be > 0, got {delta}")));
    }
    Ok(())
}

/// `Z_i(x) = ∫_{|y-x_i|>δ} |y-x_i|^{-(α+1)} μ(dy | x∖x_i)`.
pub fn coordinate_rate(model: &MeasureModel, x: &[f64], i: usize, alpha: f64, delta: f64) -> Result<f64> {
    check(alpha, delta)?;
    let cond = model.conditional(i, x)?;
    let (l, r) = side_rates(&cond, x[i], alpha, delta)?;
    Ok(l + r)
}

/// Draw from the normalized jump law of coordinate `i` at `x`.
pub fn sample_jump<R: Rng + ?Sized>(
    model: &MeasureModel,
    x: &[f64],
    i: usize,
    alpha: f64,
    delta: f64,
    rng: &mut R,
) -> Result<f64> {
    check(alpha, delta)?;
    let cond = model.conditional(i, x)?;
    let xi = x[i];
    let (l, r) = side_rates(&cond, xi, alpha, delta)?;
    if !(l + r > 0.0) {
        return Err(Error::NoJump(format!("coordinate {} has zero jump rate at {xi}", i + 1)));
    }
    jump_from(&cond, xi, (l, r), alpha, delta, rng)
}

/// Jump draw given the already computed side rates.
pub(crate) fn jump_from<R: Rng + ?Sized>(
    cond: &Conditional1D,
    xi: f64,
    (l, r): (f64, f64),
    alpha: f64,
    delta: f64,
    rng: &mut R,
) -> Result<f64> {
    let z = l + r;
    if let Conditional1D::Atoms(a) = &cond {
        let target = rng.random::<f64>() * z;
        let mut acc = 0.0;
        let mut last = None;
        for (y, m) in a.locs.iter().zip(&a.masses) {
            let t = (y - xi).abs();
            if t > delta {
                acc += m * t.powf(-(alpha + 1.0));
                last = Some(*y);
                if target < acc {
                    return Ok(*y);
                }
            }
        }
        return Ok(last.expect("positive rate has an eligible atom"));
    }
    // ρ-proposal accepted with probability (δ/t)^{α+1}; overall acceptance
    // is Z δ^{α+1}
    let acceptance = z * delta.powf(alpha + 1.0);
    if acceptance >= MIN_ACCEPTANCE {
        loop {
            let y = cond.sample(rng);
            let t = (y - xi).abs();
            if t > delta && rng.random::<f64>() < (delta / t).powf(alpha + 1.0) {
                return Ok(y);
            }
        }
    }
    let u: f64 = rng.random::<f64>() * z;
    let (sign, target) = if u < l { (-1.0, u) } else { (1.0, u - l) };
    let (left, right) = reach(cond, xi);
    let far = if sign < 0.0 { left } else { right };
    let (mut a, mut b) = (delta, far);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if side_integral(cond, xi, sign, alpha, delta, m)? < target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-12 * b {
            break;
        }
    }
    Ok(xi + sign * 0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atoms, Marginal};
    use crate::rng::Streams;

    fn uniform() -> MeasureModel {
        MeasureModel::product(vec![Marginal::Uniform { lo: 0.0, hi: 1.0 }]).unwrap()
    }

    #[test]
    fn uniform_closed_form() {
        let z = coordinate_rate(&uniform(), &[0.5], 0, 1.0, 0.25).unwrap();
        assert!((z - 4.0).abs() < 1e-9, "{z}");
        assert_eq!(coordinate_rate(&uniform(), &[0.5], 0, 1.0, 0.6).unwrap(), 0.0);
        let mut rng = Streams::new(1).stream(&[0]);
        assert!(matches!(sample_jump(&uniform(), &[0.5], 0, 1.0, 0.6, &mut rng), Err(Error::NoJump(_))));
    }

    #[test]
    fn rate_decreases_in_delta() {
        let m = MeasureModel::standard_normal(1).unwrap();
        let rates: Vec<f64> = [0.05, 0.1, 0.2, 0.4, 0.8]
            .iter()
            .map(|&d| coordinate_rate(&m, &[0.3], 0, 1.2, d).unwrap())
            .collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
    }

    #[test]
    fn gaussian_rate_against_series() {
        // α=1, x=0: 2∫_δ^∞ t^{-2} φ(t) dt, checked against a fine midpoint sum
        let m = MeasureModel::standard_normal(1).unwrap();
        let z = coordinate_rate(&m, &[0.0], 0, 1.0, 0.5).unwrap();
        let h = 1e-4f64;
        let mut s = 0.0;
        let mut t = 0.5 + 0.5 * h;
        while t < 40.0 {
            s += h * t.powi(-2) * (-0.5 * t * t).exp();
            t += h;
        }
        let want = 2.0 * s / (2.0 * std::f64::consts::PI).sqrt();
        assert!((z - want).abs() < 1e-7, "{z} {want}");
    }

    #[test]
    fn atoms_rate_and_jump() {
        let a = Atoms::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3]).unwrap();
        let m = MeasureModel::product(vec![Marginal::Atoms(a)]).unwrap();
        let z = coordinate_rate(&m, &[0.0], 0, 1.0, 0.5).unwrap();
        assert!((z - 2.0 / 3.0).abs() < 1e-15);
        let mut rng = Streams::new(2).stream(&[0]);
        for _ in 0..100 {
            let y = sample_jump(&m, &[0.0], 0, 1.0, 0.5, &mut rng).unwrap();
            assert!(y == -1.0 || y == 1.0);
        }
    }

    #[test]
    fn uniform_jump_is_symmetric() {
        let mut rng = Streams::new(3).stream(&[0]);
        let n = 20_000;
        let mut right = 0usize;
        for _ in 0..n {
            let y = sample_jump(&uniform(), &[0.5], 0, 1.0, 0.25, &mut rng).unwrap();
            assert!((y - 0.5).abs() > 0.25 && (0.0..=1.0).contains(&y));
            right += usize::from(y > 0.5);
        }
        let p = right as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{p}");
    }

    #[test]
    fn bisection_fallback_near_cutoff() {
        // tiny δ with α near 2: proposals almost never land close enough
        let m = MeasureModel::standard_normal(1).unwrap();
        let (alpha, delta) = (1.9, 1e-4);
        let z = coordinate_rate(&m, &[0.0], 0, alpha, delta).unwrap();
        assert!(z * delta.powf(alpha + 1.0) < MIN_ACCEPTANCE);
        let mut rng = Streams::new(4).stream(&[0]);
        let ys: Vec<f64> = (0..400).map(|_| sample_jump(&m, &[0.0], 0, alpha, delta, &mut rng).unwrap()).collect();
        assert!(ys.iter().all(|y| y.abs() > delta));
        // P(t < 2δ) ≈ 1 - 2^{-α} since the density is ∝ t^{-(α+1)} near δ
        let near = ys.iter().filter(|y| y.abs() < 2.0 * delta).count() as f64 / ys.len() as f64;
        let want = 1.0 - 2f64.powf(-alpha);
        assert!((near - want).abs() < 0.08, "{near} {want}");
        let right = ys.iter().filter(|y| **y > 0.0).count() as f64 / ys.len() as f64;
        assert!((right - 0.5).abs() < 0.1);
    }
}
