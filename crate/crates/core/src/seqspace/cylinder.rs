use std::fmt;
use std::sync::Arc;

use super::{BoxSpec, CutoffProfile, SpaceSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub type BaseFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// A bounded function of the first `n` coordinates, optionally multiplied by
/// cutoff factors `η(x_i / a_i)` on coordinates `n..k`.
///
/// The Lipschitz constant and sup bound are declared by the constructor and
/// only spot-checked (see [`CylinderFunction::spot_check`]).
#[derive(Clone)]
pub struct CylinderFunction<T> {
    name: String,
    n: usize,
    base: BaseFn<T>,
    lipschitz: T,
    sup_bound: T,
    support: Option<Vec<(T, T)>>,
    cutoffs: Vec<T>,
}

impl<T: Real> fmt::Debug for CylinderFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFunction")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("depth", &self.depth())
            .field("lipschitz", &self.lipschitz)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl<T: Real> CylinderFunction<T> {
    pub fn new(name: impl Into<String>, n: usize, base: BaseFn<T>, lipschitz: T, sup_bound: T) -> Self {
        Self {
            name: name.into(),
            n,
            base,
            lipschitz,
            sup_bound,
            support: None,
            cutoffs: Vec::new(),
        }
    }

    /// Declares the support box of the base function, one interval per base
    /// coordinate (infinite endpoints allowed).
    pub fn with_support(mut self, support: Vec<(T, T)>) -> Result<Self> {
        if support.len() != self.n {
            return Err(Error::invalid(format!(
                "support box has {} intervals, function has {} coordinates",
                support.len(),
                self.n
            )));
        }
        self.support = Some(support);
        Ok(self)
    }

    pub fn constant(c: T) -> Self {
        Self::new("constant", 0, Arc::new(move |_| c), T::zero(), c.abs()).with_empty_support()
    }

    fn with_empty_support(mut self) -> Self {
        self.support = Some(Vec::new());
        self
    }

    /// `x ↦ x_i`; unbounded.
    pub fn coordinate(i: usize) -> Self {
        Self::new(format!("coordinate({})", i + 1), i + 1, Arc::new(move |x| x[i]), T::one(), T::infinity())
    }

    /// `x ↦ η(x_i / scale)`.
    pub fn cutoff(i: usize, scale: T) -> Result<Self> {
        Self::product_of_cutoffs(&[i], scale)
    }

    /// `x ↦ ∏_{i ∈ indices} η(x_i / scale)`.
    pub fn product_of_cutoffs(indices: &[usize], scale: T) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("product of cutoffs needs at least one index"));
        }
        if !(scale.is_finite() && scale > T::zero()) {
            return Err(Error::invalid(format!("cutoff scale must be > 0, got {scale}")));
        }
        let n = indices.iter().max().map_or(0, |m| m + 1);
        let idx = indices.to_vec();
        let base: BaseFn<T> = Arc::new(move |x| {
            idx.iter()
                .fold(T::one(), |acc, &i| acc * CutoffProfile.eval(x[i] / scale))
        });
        let mut support = vec![(T::neg_infinity(), T::infinity()); n];
        for &i in indices {
            let r = T::lit(CutoffProfile::SUPPORT) * scale;
            support[i] = (-r, r);
        }
        let name = if indices.len() == 1 {
            format!("cutoff({}, {scale})", indices[0] + 1)
        } else {
            let list: Vec<String> = indices.iter().map(|i| (i + 1).to_string()).collect();
            format!("product_of_cutoffs([{}], {scale})", list.join(","))
        };
        // each factor is (1/scale)-Lipschitz and bounded by 1
        let lip = T::from_usize(indices.len()).unwrap() / scale;
        Self::new(name, n, base, lip, T::one()).with_support(support)
    }

    /// `x ↦ Σ_k c_k x_i^k`.
    pub fn polynomial(i: usize, coeffs: &[T]) -> Self {
        let c = coeffs.to_vec();
        let degree = c.iter().rposition(|v| *v != T::zero()).unwrap_or(0);
        let (lip, sup) = match degree {
            0 => (T::zero(), c.first().map_or(T::zero(), |v| v.abs())),
            _ => (T::infinity(), T::infinity()),
        };
        let base: BaseFn<T> = Arc::new(move |x| c.iter().rev().fold(T::zero(), |acc, &ck| acc * x[i] + ck));
        Self::new(format!("polynomial({})", i + 1), i + 1, base, lip, sup)
    }

    /// Pointwise sum, used to probe bilinearity.
    pub fn sum(u: &Self, v: &Self) -> Self {
        let (a, b) = (u.clone(), v.clone());
        let depth = u.depth().max(v.depth());
        Self::new(
            format!("{}+{}", u.name, v.name),
            depth,
            Arc::new(move |x| a.eval(x) + b.eval(x)),
            u.lipschitz + v.lipschitz,
            u.sup_bound + v.sup_bound,
        )
    }

    /// Composition `g ∘ self` with new declared bounds; the support is kept
    /// when `g(0) = 0`.
    pub fn compose<G>(&self, name: impl Into<String>, g: G, lipschitz: T, sup_bound: T) -> Self
    where
        G: Fn(T) -> T + Send + Sync + 'static,
    {
        let inner = self.clone();
        let keeps_zero = g(T::zero()) == T::zero();
        let mut out = Self::new(name, self.depth(), Arc::new(move |x| g(inner.eval(x))), lipschitz, sup_bound);
        if keeps_zero && self.cutoffs.is_empty() {
            out.support = self.support.clone();
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Base dimension `n`.
    pub fn base_dim(&self) -> usize {
        self.n
    }

    /// Highest coordinate count the function reads (`k`).
    pub fn depth(&self) -> usize {
        self.n + self.cutoffs.len()
    }

    /// Whether coordinate `i` (0-based) can influence the value.
    pub fn depends_on(&self, i: usize) -> bool {
        i < self.depth()
    }

    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    pub fn sup_bound(&self) -> T {
        self.sup_bound
    }

    pub fn support(&self) -> Option<&[(T, T)]> {
        self.support.as_deref()
    }

    /// Evaluates at `x`; only `x[..depth]` is read.
    pub fn eval(&self, x: &[T]) -> T {
        let mut v = (self.base)(x);
        for (j, &a) in self.cutoffs.iter().enumerate() {
            if v == T::zero() {
                break;
            }
            v = v * CutoffProfile.eval(x[self.n + j] / a);
        }
        v
    }

    pub fn try_eval(&self, x: &[T]) -> Result<T> {
        if x.len() < self.depth() {
            return Err(Error::invalid(format!(
                "{} reads {} coordinates, point has {}",
                self.name,
                self.depth(),
                x.len()
            )));
        }
        Ok(self.eval(x))
    }

    /// Checks the declared sup bound on the given points.
    pub fn spot_check<'a, I>(&self, points: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let tol = T::lit(1e-12) * (T::one() + self.sup_bound);
        for x in points {
            let v = self.try_eval(x)?;
            if !(v.abs() <= self.sup_bound + tol) {
                return Err(Error::Precondition(format!(
                    "{}: |f(x)| = {} exceeds declared sup bound {}",
                    self.name,
                    v.abs(),
                    self.sup_bound
                )));
            }
        }
        Ok(())
    }
}

/// `f_{M,k} = f · ∏_{i=n+1..k} η_{M,i}`.
///
/// Requires `∏_{i≤n} η_{M,i} ≡ 1` on the support of `f`, i.e. the declared
/// support box of `f` must sit inside the plateau `|x_i| ≤ a_{M,i}`.
pub fn build_fmk<T: Real>(
    f: &CylinderFunction<T>,
    space: &SpaceSpec<T>,
    bx: &BoxSpec<T>,
    k: usize,
) -> Result<CylinderFunction<T>> {
    let n = f.n;
    if !f.cutoffs.is_empty() {
        return Err(Error::invalid("cutoff stage already attached"));
    }
    if k < n || k > space.dim() {
        return Err(Error::invalid(format!("cutoff stage k={k} outside [{n}, {}]", space.dim())));
    }
    let support = f
        .support
        .as_ref()
        .ok_or_else(|| Error::Precondition(format!("{} has no declared support box", f.name)))?;
    for (i, &(lo, hi)) in support.iter().enumerate() {
        let a = space.box_bound(bx, i);
        if lo < -a || hi > a {
            return Err(Error::Precondition(format!(
                "M={} too small: support of {} in coordinate {} is [{lo}, {hi}], plateau is [-{a}, {a}]",
                bx.level(),
                f.name,
                i + 1
            )));
        }
    }
    let mut out = f.clone();
    out.cutoffs = (n..k).map(|i| space.box_bound(bx, i)).collect();
    if k > n {
        out.name = format!("{}[M={},k={k}]", f.name, bx.level());
        // η_{M,i}(x_i) = 0 once |x_i| ≥ 3 a_{M,i}
        out.lipschitz = f.lipschitz
            + f.sup_bound * out.cutoffs.iter().fold(T::zero(), |s, &a| s + a.recip());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::Sequence;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (SpaceSpec<f64>, BoxSpec<f64>) {
        let s = SpaceSpec::lp(2.0, &Sequence::Constant(1.0), n).unwrap();
        let b = BoxSpec::new(3.0, &Sequence::Power(-2.0), n).unwrap();
        (s, b)
    }

    #[test]
    fn k_equal_n_is_identity() {
        let (s, b) = setup(4);
        let f = CylinderFunction::cutoff(0, 0.5).unwrap();
        let g = build_fmk(&f, &s, &b, 1).unwrap();
        let x = [0.3, 10.0, -4.0, 1.0];
        assert_eq!(f.eval(&x), g.eval(&x));
        assert_eq!(g.depth(), 1);
    }

    #[test]
    fn cutoff_kills_outside_support() {
        let (s, b) = setup(4);
        let f = CylinderFunction::cutoff(0, 0.5).unwrap();
        let g = build_fmk(&f, &s, &b, 3).unwrap();
        let mut x = [0.1, 0.0, 0.0, 0.0];
        assert!(g.eval(&x) > 0.0);
        x[1] = s.box_outer_bound(&b, 1);
        assert_eq!(g.eval(&x), 0.0);
        assert!(g.depends_on(2) && !g.depends_on(3));
    }

    #[test]
    fn small_m_is_rejected_with_coordinate() {
        let s = SpaceSpec::lp(2.0, &Sequence::Constant(1.0), 3).unwrap();
        let b = BoxSpec::new(0.5, &Sequence::Constant(1.0), 3).unwrap();
        let f = CylinderFunction::product_of_cutoffs(&[0, 1], 0.1).unwrap();
        // support radius 0.3 fits in plateau 0.5
        assert!(build_fmk(&f, &s, &b, 3).is_ok());
        let f = CylinderFunction::product_of_cutoffs(&[0, 1], 1.0).unwrap();
        match build_fmk(&f, &s, &b, 3) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("coordinate 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let c = CylinderFunction::coordinate(0);
        assert!(matches!(build_fmk(&c, &s, &b, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn difference_bound_on_base_coordinates() {
        let (s, b) = setup(5);
        let f = CylinderFunction::product_of_cutoffs(&[0, 1], 0.4).unwrap();
        let g = build_fmk(&f, &s, &b, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let mut x: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
            let i = rng.random_range(0..2);
            let y = rng.random_range(-2.0..2.0);
            let y2 = rng.random_range(-2.0..2.0);
            x[i] = y;
            let (fg1, ff1) = (g.eval(&x), f.eval(&x));
            x[i] = y2;
            let (fg2, ff2) = (g.eval(&x), f.eval(&x));
            assert!((fg1 - fg2).abs() <= (ff1 - ff2).abs() + 1e-15);
        }
    }

    #[test]
    fn polynomial_and_spot_check() {
        let p = CylinderFunction::polynomial(1, &[1.0, 0.0, 2.0]);
        assert_eq!(p.eval(&[9.0, 3.0]), 19.0);
        let c = CylinderFunction::<f64>::cutoff(0, 1.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..50).map(|k| vec![k as f64 * 0.1 - 2.5]).collect();
        assert!(c.spot_check(pts.iter().map(|v| v.as_slice())).is_ok());
        let lying = CylinderFunction::new("lying", 1, Arc::new(|x: &[f64]| x[0]), 1.0, 0.5);
        assert!(lying.spot_check([[2.0].as_slice()]).is_err());
    }
}
