use dirform::hilbert_scale::{
    double_factorial, lattice_propagator, lattice_propagator_1d_exact, pairing_moment, periodic_lattice_propagator,
    wick4, ScaleMap,
};
use dirform::measures::{CorrelatedGaussian, MeasureModel, Phi4Model, Phi4Params};
use dirform::rng::Streams;
use dirform::stats::{batch_means, Accumulator};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Moments of a correlated Gaussian against the brute-force pairing sum.
#[test]
fn pairing_sum_matches_sampled_moments() {
    let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.2, 0.4, 0.8, 0.1, -0.2, 0.1, 0.5]);
    let model = MeasureModel::Correlated(CorrelatedGaussian::new(c.clone()).unwrap());
    let mut rng = Streams::new(31).stream(&[0]);
    let draws = model.draw(200_000, &mut rng).unwrap();
    for idx in [[0, 0, 1, 1], [0, 1, 2, 2], [0, 0, 0, 0], [0, 1, 1, 2]] {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| idx.iter().map(|&j| c[(i, j)]).collect()).collect();
        let exact = pairing_moment(&a);
        let acc: Accumulator = draws.points.iter().map(|x| idx.iter().map(|&i| x[i]).product::<f64>()).collect();
        let e = acc.estimate();
        assert!((e.value - exact).abs() <= 3.0 * e.stderr, "{idx:?}: {} vs {exact}", e.value);
    }
    let diag = vec![vec![1.0; 6]; 6];
    assert_eq!(pairing_moment(&diag), double_factorial(3) as f64);
}

/// At zero coupling the lattice field is Gaussian with the periodic
/// propagator as covariance.
#[test]
fn free_lattice_two_point_function() {
    let params = Phi4Params::new(1, 8, 1.0, 1.0, 0.0, None).unwrap();
    let model = MeasureModel::Phi4(Phi4Model::new(params, 500, 2, 1e3).unwrap());
    let draws = model.draw(60_000, &mut Streams::new(4).stream(&[0])).unwrap();
    for r in 0..4usize {
        let series: Vec<f64> = draws.points.iter().map(|x| x[0] * x[r]).collect();
        let e = batch_means(&series, 50);
        let g = periodic_lattice_propagator(1, 8, 1.0, 1.0, &[r as i64]).unwrap();
        assert!((e.value - g).abs() <= 4.0 * e.stderr, "r={r}: {} vs {g}", e.value);
    }
}

#[test]
fn propagator_quadrature_matches_closed_form() {
    for m2 in [0.5, 1.0, 4.0] {
        for n in 0..4 {
            let q = lattice_propagator(1, 1.0, m2, &[n]).unwrap();
            assert!((q - lattice_propagator_1d_exact(1.0, m2, n)).abs() < 1e-8);
        }
    }
}

proptest! {
    #[test]
    fn scale_maps_are_isometries(
        m in -3i32..=3,
        lambdas in proptest::collection::vec(0.01f64..1.0, 1..20),
        seed in 0u64..1000,
    ) {
        use rand_distr::{Distribution, StandardNormal};
        let map = ScaleMap::new(m, lambdas.clone()).unwrap();
        let mut rng = Streams::new(seed).stream(&[0]);
        let a: Vec<f64> = (0..lambdas.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b = map.tau(&a).unwrap();
        let space = map.target_space(a.len()).unwrap();
        let na = map.level_norm(&a);
        prop_assert!((space.norm(&b).unwrap() - na).abs() <= 1e-10 * na.max(1e-300));
        let back = map.tau_inverse(&b).unwrap();
        for (x, y) in back.iter().zip(&a) {
            prop_assert!((x - y).abs() <= 1e-12 * na.max(1.0));
        }
    }

    #[test]
    fn wick_power_is_centered_polynomial(t in -5.0f64..5.0, a in 0.1f64..3.0) {
        let h = t.powi(4) - 6.0 * a * t * t + 3.0 * a * a;
        prop_assert!((wick4(t, a) - h).abs() <= 1e-12 * (1.0 + t.powi(4)));
    }
}
