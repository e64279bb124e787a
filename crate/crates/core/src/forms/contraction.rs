use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seqspace::CylinderFunction;

/// Unit contraction `φ_ε`: identity on `[-ε/2, 1+ε/2]`, constant `-ε` below
/// `-3ε/2` and `1+ε` above `1+3ε/2`, joined by C¹ ramps with slope
/// `3z² - 2z³ ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionProfile<T> {
    eps: T,
}

impl<T: Real> ContractionProfile<T> {
    pub fn new(eps: T) -> Result<Self> {
        if !(eps.is_finite() && eps > T::zero()) {
            return Err(Error::invalid(format!("contraction epsilon must be > 0, got {eps}")));
        }
        Ok(Self { eps })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    /// `P(z) = z³ - z⁴/2`, the antiderivative of the ramp slope.
    fn ramp(z: T) -> T {
        z * z * z * (T::one() - T::lit(0.5) * z)
    }

    pub fn eval(&self, t: T) -> T {
        let e = self.eps;
        let half = T::lit(0.5) * e;
        let three_half = T::lit(1.5) * e;
        let one = T::one();
        if t >= -half && t <= one + half {
            t
        } else if t < -half {
            if t <= -three_half {
                -e
            } else {
                -e + e * Self::ramp((t + three_half) / e)
            }
        } else if t >= one + three_half {
            one + e
        } else {
            one + e - e * Self::ramp((one + three_half - t) / e)
        }
    }
}

/// `φ_ε ∘ u`.
pub fn apply_contraction<T: Real>(profile: &ContractionProfile<T>, u: &CylinderFunction<T>) -> CylinderFunction<T> {
    let p = *profile;
    let sup = u.sup_bound().min(T::one() + p.eps);
    u.compose(format!("contract({}, {})", u.name(), p.eps), move |t| p.eval(t), u.lipschitz(), sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plateau_and_clamps() {
        let p = ContractionProfile::new(0.1f64).unwrap();
        assert_eq!(p.eval(0.3), 0.3);
        assert_eq!(p.eval(-0.05), -0.05);
        assert_eq!(p.eval(1.05), 1.05);
        assert_eq!(p.eval(5.0), 1.1);
        assert_eq!(p.eval(-5.0), -0.1);
        assert!((p.eval(-0.15) + 0.1).abs() < 1e-15);
        assert!((p.eval(1.15) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn composition_bounds() {
        let p = ContractionProfile::new(0.5).unwrap();
        let u = CylinderFunction::<f64>::constant(5.0);
        let c = apply_contraction(&p, &u);
        assert_eq!(c.eval(&[]), 1.5);
        assert_eq!(c.sup_bound(), 1.5);
        let cut = CylinderFunction::cutoff(0, 1.0).unwrap();
        let cc = apply_contraction(&p, &cut);
        for k in 0..50 {
            let x = [k as f64 * 0.1 - 2.5];
            assert_eq!(cc.eval(&x), cut.eval(&x));
        }
        assert!(cc.support().is_some());
    }

    proptest! {
        #[test]
        fn unit_contraction(eps in 0.01f64..2.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let p = ContractionProfile::new(eps).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let d = p.eval(hi) - p.eval(lo);
            prop_assert!(d >= 0.0);
            prop_assert!(d <= hi - lo + 1e-15);
            let v = p.eval(a);
            prop_assert!(v >= -eps && v <= 1.0 + eps);
        }
    }
}
