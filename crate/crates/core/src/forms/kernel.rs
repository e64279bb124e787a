use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seqspace::CylinderFunction;

/// `|y - y'|^{-(α+1)} Δu Δv` given the coordinate differences.
#[inline]
pub fn kernel_term<T: Real>(du: T, dv: T, y: T, yp: T, alpha: T) -> T {
    // (du*dv) first so that swapping u and v is bitwise symmetric
    (du * dv) * (y - yp).abs().powf(-(alpha + T::one()))
}

/// Differences `w(.., y, ..) - w(.., y', ..)` at coordinate `i` for `u` and
/// `v`, reusing `scratch` as the evaluation point.
pub fn coordinate_differences<T: Real>(
    u: &CylinderFunction<T>,
    v: &CylinderFunction<T>,
    i: usize,
    y: T,
    yp: T,
    scratch: &mut [T],
) -> (T, T) {
    let keep = scratch[i];
    scratch[i] = y;
    let (u1, v1) = (u.eval(scratch), v.eval(scratch));
    scratch[i] = yp;
    let (u2, v2) = (u.eval(scratch), v.eval(scratch));
    scratch[i] = keep;
    (u1 - u2, v1 - v2)
}

/// The integrand `Φ_α(u, v; y, y', x \ x_i)`.
pub fn phi_alpha<T: Real>(
    u: &CylinderFunction<T>,
    v: &CylinderFunction<T>,
    i: usize,
    y: T,
    yp: T,
    rest: &[T],
    alpha: T,
) -> Result<T> {
    if y == yp {
        return Err(Error::invalid("Φ_α is undefined on the diagonal y = y'"));
    }
    if i >= rest.len() || rest.len() < u.depth().max(v.depth()) {
        return Err(Error::invalid("point too short for coordinate or function"));
    }
    let mut x = rest.to_vec();
    let (du, dv) = coordinate_differences(u, v, i, y, yp, &mut x);
    Ok(kernel_term(du, dv, y, yp, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let c = CylinderFunction::<f64>::coordinate(0);
        let k = CylinderFunction::constant(2.0);
        let x = [0.0, 0.0];
        assert_eq!(phi_alpha(&c, &c, 0, 2.0, 0.0, &x, 1.0).unwrap(), 1.0);
        assert_eq!(phi_alpha(&c, &c, 0, 1.0, 0.0, &x, 0.5).unwrap(), 1.0);
        assert_eq!(phi_alpha(&k, &c, 0, 1.0, 0.0, &x, 1.0).unwrap(), 0.0);
        assert!(phi_alpha(&c, &c, 0, 1.0, 1.0, &x, 1.0).is_err());
    }
}
