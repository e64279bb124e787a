use crate::scalar::Real;

/// The bump `η`: 1 on `|x| ≤ 1`, 0 on `|x| ≥ 3`, quintic smoothstep ramp in
/// between. The ramp is C² with maximal slope 15/16, so `|η'| ≤ 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CutoffProfile;

impl CutoffProfile {
    pub const PLATEAU: f64 = 1.0;
    pub const SUPPORT: f64 = 3.0;

    pub fn eval<T: Real>(&self, x: T) -> T {
        let ax = x.abs();
        if ax <= T::one() {
            return T::one();
        }
        if ax >= T::lit(3.0) {
            return T::zero();
        }
        let s = (ax - T::one()) * T::lit(0.5);
        let step = s * s * s * (s * (s * T::lit(6.0) - T::lit(15.0)) + T::lit(10.0));
        T::one() - step
    }

    pub fn derivative<T: Real>(&self, x: T) -> T {
        let ax = x.abs();
        if ax <= T::one() || ax >= T::lit(3.0) {
            return T::zero();
        }
        let s = (ax - T::one()) * T::lit(0.5);
        let dstep = T::lit(30.0) * s * s * (s - T::one()) * (s - T::one()) * T::lit(0.5);
        -dstep * x.signum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plateau_and_support() {
        let eta = CutoffProfile;
        assert_eq!(eta.eval(0.5), 1.0);
        assert_eq!(eta.eval(-1.0), 1.0);
        assert_eq!(eta.eval(4.0), 0.0);
        assert_eq!(eta.eval(-3.0), 0.0);
        assert!((eta.eval(2.0f64) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn slope_bounded_by_one() {
        let eta = CutoffProfile;
        let max = (0..=20_000)
            .map(|k| eta.derivative(1.0 + 2.0 * k as f64 / 20_000.0).abs())
            .fold(0.0, f64::max);
        assert!(max <= 1.0 && (max - 0.9375).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn lipschitz_one(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let eta = CutoffProfile;
            let v = eta.eval(x);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((eta.eval(x) - eta.eval(y)).abs() <= (x - y).abs() + 1e-15);
        }
    }
}
