use dirform::measures::{Marginal, MeasureModel};
use dirform::qr_check::{chebyshev_sufficient, check_condition, ConditionId, QrOptions, SchemeKind, SchemeSource, Verdict, WeightScheme};
use dirform::rng::Streams;

fn power_scheme(beta_power: f64, n: usize) -> WeightScheme {
    let beta: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-beta_power)).collect();
    let gamma = vec![1.0; n];
    WeightScheme::new(SchemeKind::Lp { p: 2.0 }, beta, gamma, 1.0, 1.0, SchemeSource::Manual).unwrap()
}

/// Chebyshev's inequality makes the moment series dominate the tail series
/// term by term at alpha = 1, M0 = 1.
#[test]
fn moment_series_bounds_tail_series() {
    let model = MeasureModel::product(vec![Marginal::Normal { mean: 0.0, sd: 1.3 }; 40]).unwrap();
    let scheme = power_scheme(2.0, 40);
    let opts = QrOptions::default();
    let s = Streams::new(1);
    let tail = check_condition(&model, &scheme, ConditionId::C4_3, 40, &opts, &s).unwrap();
    let cheb = chebyshev_sufficient(&model, &scheme, 40, &opts, &s).unwrap();
    assert_eq!(cheb.condition, ConditionId::C4_8);
    for (a, b) in tail.partial_sums.iter().zip(&cheb.partial_sums) {
        assert!(a <= b);
    }
}

#[test]
fn summable_and_divergent_weights() {
    let model = MeasureModel::standard_normal(200).unwrap();
    let opts = QrOptions::default();
    let s = Streams::new(2);
    let fast = check_condition(&model, &power_scheme(4.0, 200), ConditionId::C4_8, 200, &opts, &s).unwrap();
    assert_eq!(fast.verdict, Verdict::ConsistentWithFinite);
    let slow = check_condition(&model, &power_scheme(0.5, 200), ConditionId::C4_8, 200, &opts, &s).unwrap();
    assert_eq!(slow.verdict, Verdict::Inconclusive);
    let growing = check_condition(&model, &power_scheme(-0.5, 200), ConditionId::C4_8, 200, &opts, &s).unwrap();
    assert_eq!(growing.verdict, Verdict::Diverging);
    assert!(growing.partial_sums.windows(2).all(|w| w[1] >= w[0]));
}
