use dirform::measures::{Atoms, DiscreteModel, Marginal, MeasureModel};
use dirform::process::{coordinate_rate, invariance_test, ks_exponential, rate_matrix, simulate, JumpChainConfig};
use dirform::rng::Streams;
use dirform::seqspace::CylinderFunction;
use nalgebra::DVector;
use rand::Rng;

fn joint_law() -> DiscreteModel {
    let mut rng = Streams::new(21).stream(&[0]);
    let axes = vec![vec![-1.0, 0.0, 2.0], vec![-0.5, 1.0, 1.5]];
    let pmf: Vec<f64> = (0..9).map(|_| rng.random_range(0.2..1.0)).collect();
    DiscreteModel::new(axes, pmf).unwrap()
}

#[test]
fn law_is_stationary_for_the_rate_matrix() {
    let m = joint_law();
    let q = rate_matrix(&m, 1.4, 0.3);
    let mu = DVector::from_iterator(m.states(), (0..m.states()).map(|x| m.mass(x)));
    let flux = q.transpose() * mu;
    assert!(flux.amax() < 1e-13, "{flux}");
    for x in 0..m.states() {
        assert!(q.row(x).iter().sum::<f64>().abs() < 1e-13);
    }
}

#[test]
fn occupation_of_a_long_run_matches_the_law() {
    let m = joint_law();
    let model = MeasureModel::Discrete(m.clone());
    let cfg = JumpChainConfig::new(1.0, 0.3, 20_000.0, 10_000_000).unwrap();
    let t = simulate(&model, &m.point(0), &cfg, &mut Streams::new(3).stream(&[0])).unwrap();
    let mut occ = vec![0.0; m.states()];
    for (k, dt) in t.holding_times() {
        let x = t.state(k);
        let idx = m.locate(&x, None).unwrap();
        occ[m.encode(&idx)] += dt;
    }
    let total: f64 = occ.iter().sum();
    for (x, o) in occ.iter().enumerate() {
        assert!((o / total - m.mass(x)).abs() < 0.02, "state {x}: {} vs {}", o / total, m.mass(x));
    }
}

#[test]
fn holding_times_are_exponential() {
    let model = MeasureModel::standard_normal(2).unwrap();
    let x0 = [0.3, -0.8];
    let cfg = JumpChainConfig::new(1.0, 0.2, 1e6, 1).unwrap();
    let rate: f64 = (0..2).map(|i| coordinate_rate(&model, &x0, i, 1.0, 0.2).unwrap()).sum();
    let s = Streams::new(8);
    let times: Vec<f64> = (0..3000)
        .map(|k| simulate(&model, &x0, &cfg, &mut s.stream(&[k])).unwrap().events[0].time)
        .collect();
    assert!(ks_exponential(&times, rate).unwrap().pass);
}

#[test]
fn invariance_on_uniform_and_atom_marginals() {
    let atoms = Atoms::new(vec![-1.0, 0.0, 1.5], vec![1.0, 2.0, 1.0]).unwrap();
    let model = MeasureModel::product(vec![Marginal::Uniform { lo: -1.0, hi: 1.0 }, Marginal::Atoms(atoms)]).unwrap();
    let u = CylinderFunction::product_of_cutoffs(&[0, 1], 0.5).unwrap();
    let cfg = JumpChainConfig::new(0.7, 0.05, 2.0, 100_000).unwrap();
    let r = invariance_test(&model, &u, &cfg, 2000, &Streams::new(12)).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!(r.budget_exhausted, 0);
}
