use super::{BoxSpec, Point, SpaceKind, SpaceSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Finite ε-net of the box `D_M` in a weighted `ℓ^p` truncation.
///
/// Coordinates past `N_eff` (the first index at which the box tail
/// `Σ_{i>n} M^p γ_i^{-1}` drops below `(ε/3)^p`) are frozen at zero. On the
/// rest, each rescaled coordinate `β_i^{1/p} x_i ∈ [-b_i, b_i]` with
/// `b_i = M γ_i^{-1/p}` is gridded at `-b_i + j ε'`, `j = 0..=⌊2b_i/ε'⌋+1`,
/// `ε' = (ε/3) N_eff^{-1/p}`, clamped to the box. Duplicates from clamping
/// are kept so the count matches the index range.
pub fn epsilon_net<T: Real>(space: &SpaceSpec<T>, bx: &BoxSpec<T>, eps: T, budget: u128) -> Result<Vec<Point<T>>> {
    let p = match space.kind() {
        SpaceKind::WeightedLp { p } => p,
        _ => return Err(Error::invalid("epsilon_net requires a weighted-lp space")),
    };
    if !(eps.is_finite() && eps > T::zero()) {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    let n = space.dim();
    if bx.gammas().len() < n {
        return Err(Error::invalid("box gamma table shorter than space"));
    }
    let m = bx.level();
    let mp = m.powf(p);
    let tails: Vec<T> = {
        // tails[k] = Σ_{i≥k} M^p γ_i^{-1}
        let mut t = vec![T::zero(); n + 1];
        for i in (0..n).rev() {
            t[i] = t[i + 1] + mp / bx.gammas()[i];
        }
        t
    };
    if tails[0].powf(p.recip()) < eps {
        return Ok(vec![Point::zeros(n)]);
    }
    let target = (eps / T::lit(3.0)).powf(p);
    let n_eff = (0..=n).find(|&k| tails[k] <= target).unwrap_or(n).max(1);
    let eps_prime = eps / T::lit(3.0) * T::from_usize(n_eff).unwrap().powf(-p.recip());

    let mut axes: Vec<Vec<T>> = Vec::with_capacity(n_eff);
    let mut size: u128 = 1;
    for i in 0..n_eff {
        let b = m * bx.gammas()[i].powf(-p.recip());
        let last = (T::lit(2.0) * b / eps_prime)
            .floor()
            .to_u128()
            .ok_or_else(|| Error::numerical("net index overflow"))?
            + 1;
        size = size.saturating_mul(last + 1);
        if size > budget {
            // report the full size, not the partial product
            let full = (i..n_eff).fold(1u128, |acc, j| {
                let bj = m * bx.gammas()[j].powf(-p.recip());
                let c = (T::lit(2.0) * bj / eps_prime).floor().to_u128().unwrap_or(u128::MAX) + 2;
                acc.saturating_mul(c)
            });
            let before = size / (last + 1);
            return Err(Error::ResourceLimit {
                what: "epsilon-net size".into(),
                requested: before.saturating_mul(full),
                budget,
            });
        }
        let scale = space.weight(i).powf(-p.recip());
        let axis = (0..=last)
            .map(|j| {
                let y = (-b + T::from_u128(j).unwrap() * eps_prime).min(b);
                y * scale
            })
            .collect();
        axes.push(axis);
    }

    let mut out = Vec::with_capacity(size as usize);
    let mut idx = vec![0usize; n_eff];
    loop {
        let mut x = vec![T::zero(); n];
        for (i, &j) in idx.iter().enumerate() {
            x[i] = axes[i][j];
        }
        out.push(Point::new(x)?);
        let mut c = 0;
        loop {
            if c == n_eff {
                return Ok(out);
            }
            idx[c] += 1;
            if idx[c] < axes[c].len() {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::Sequence;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_example_has_ten_points() {
        let s = SpaceSpec::lp(2.0, &Sequence::Constant(1.0), 1).unwrap();
        let b = BoxSpec::new(1.0, &Sequence::Constant(1.0), 1).unwrap();
        let net = epsilon_net(&s, &b, 0.75, 1000).unwrap();
        assert_eq!(net.len(), 10);
        assert_eq!(net[0][0], -1.0);
        assert_eq!(net[1][0], -0.75);
        assert_eq!(net[9][0], 1.0);
    }

    #[test]
    fn large_eps_gives_single_point() {
        let s = SpaceSpec::lp(2.0, &Sequence::Constant(1.0), 3).unwrap();
        let b = BoxSpec::new(1.0, &Sequence::Constant(1.0), 3).unwrap();
        let net = epsilon_net(&s, &b, 5.0, 10).unwrap();
        assert_eq!(net.len(), 1);
        let x = [1.0, -1.0, 1.0];
        assert!(s.distance(&x, &net[0]).unwrap() < 5.0);
    }

    #[test]
    fn rejects_bad_eps_and_budget() {
        let s = SpaceSpec::lp(2.0, &Sequence::Constant(1.0), 4).unwrap();
        let b = BoxSpec::new(1.0, &Sequence::Constant(1.0), 4).unwrap();
        assert!(matches!(epsilon_net(&s, &b, 0.0, 10), Err(Error::InvalidInput(_))));
        match epsilon_net(&s, &b, 0.1, 1000) {
            Err(Error::ResourceLimit { requested, .. }) => assert!(requested > 1000),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_probes_are_covered() {
        let n = 6;
        let s = SpaceSpec::lp(2.0, &Sequence::Power(1.0), n).unwrap();
        let b = BoxSpec::new(1.0, &Sequence::Power(-4.0), n).unwrap();
        let eps = 0.9;
        let net = epsilon_net(&s, &b, eps, 1_000_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let a = s.box_bound(&b, i);
                    rng.random_range(-a..=a)
                })
                .collect();
            let d = net
                .iter()
                .map(|q| s.distance(&x, q).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(d < eps, "uncovered point at distance {d}");
        }
    }
}
