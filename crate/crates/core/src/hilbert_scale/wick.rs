use crate::scalar::Real;

/// `:t⁴:` with variance `a`: `t⁴ - 6a t² + 3a²`.
pub fn wick4<T: Real>(t: T, a: T) -> T {
    let t2 = t * t;
    t2 * t2 - T::lit(6.0) * a * t2 + T::lit(3.0) * a * a
}

/// `(2n-1)!!`, the number of pairings of `2n` indices (`1` for `n = 0`).
pub fn double_factorial(n: u32) -> u128 {
    (1..=n).map(|k| u128::from(2 * k - 1)).product()
}

/// Sum over all pairings of `{0..k}` of `∏ a[i][j]`; zero for odd `k`.
pub fn pairing_moment<T: Real>(a: &[Vec<T>]) -> T {
    let k = a.len();
    if k % 2 == 1 {
        return T::zero();
    }
    let mut idx: Vec<usize> = (0..k).collect();
    pairings(a, &mut idx)
}

fn pairings<T: Real>(a: &[Vec<T>], rest: &mut Vec<usize>) -> T {
    if rest.is_empty() {
        return T::one();
    }
    let first = rest.remove(0);
    let mut total = T::zero();
    for pos in 0..rest.len() {
        let partner = rest.remove(pos);
        total = total + a[first][partner] * pairings(a, rest);
        rest.insert(pos, partner);
    }
    rest.insert(0, first);
    total
}
