use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tat_core::exact::attention_matrix;
use tat_core::lowrank::{
    basis_size, build_basis, build_f_factors, choose_degree, feature_map, FeatureWeighting,
    PolyExpApprox,
};
use tat_core::{AttnInstance, Limits, Matrix};

fn dense_f(inst: &AttnInstance) -> Matrix {
    attention_matrix(inst, &inst.x(), &Limits::default())
        .unwrap()
        .0
}

#[test]
fn forward_factors_meet_eps() {
    let limits = Limits::default();
    for (i, eps) in [1e-4, 1e-6, 1e-8].into_iter().enumerate() {
        for n in [4, 8, 16, 32] {
            let inst = AttnInstance::random(n, 2, 0.8, 40 + i as u64).unwrap();
            let ff = build_f_factors(&inst, eps, &limits).unwrap();
            let approx = ff.factors.materialize(limits.oracle_cap).unwrap();
            let err = approx.max_abs_diff(&dense_f(&inst)).unwrap();
            assert!(err <= eps, "n {n} eps {eps}: {err}");
            for s in approx.row_sums() {
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn seed_8_instance_within_1e8() {
    let inst = AttnInstance::random(8, 2, 0.8, 8).unwrap();
    let ff = build_f_factors(&inst, 1e-8, &Limits::default()).unwrap();
    let approx = ff.factors.materialize(32).unwrap();
    assert!(approx.max_abs_diff(&dense_f(&inst)).unwrap() <= 1e-8);
}

#[test]
fn zero_query_is_exact_and_rank_one() {
    let mut inst = AttnInstance::random(5, 2, 1.0, 2).unwrap();
    inst.x1 = Matrix::zeros(2, 2);
    let ff = build_f_factors(&inst, 1e-6, &Limits::default()).unwrap();
    assert_eq!(ff.degree(), 0);
    assert_eq!(ff.rank(), 1);
    assert!(ff.normalizer.iter().all(|&s| s == 25.0));
    let approx = ff.factors.materialize(32).unwrap();
    assert!(approx.data().iter().all(|&v| v == 1.0 / 25.0));
}

#[test]
fn rank_law() {
    let limits = Limits::default();
    for seed in 0..6 {
        let d = 1 + seed as usize % 3;
        let inst = AttnInstance::random(6, d, 0.9, seed).unwrap();
        let eps = 1e-6;
        let ff = build_f_factors(&inst, eps, &limits).unwrap();
        let r = inst.exp_arg_bound();
        let g = choose_degree(r, eps * (-r).exp() / 3.0).unwrap();
        assert_eq!(ff.degree(), g);
        assert_eq!(ff.rank() as u128, basis_size(d, g).unwrap());
    }
    assert_eq!(build_basis(2, 9, 100_000).unwrap().len(), 55);
}

#[test]
fn rank_cap_reports_degree_and_rank() {
    let inst = AttnInstance::random(4, 3, 1.0, 1).unwrap();
    let tight = Limits {
        rank_cap: 3,
        ..Limits::default()
    };
    let err = build_f_factors(&inst, 1e-6, &tight)
        .unwrap_err()
        .to_string();
    assert!(err.contains("degree") && err.contains("k1 ="), "{err}");
}

#[test]
fn remainder_bound_holds_on_grid() {
    for (r, eps) in [(1.0, 1e-6), (0.5, 1e-8), (2.0, 1e-4), (3.0, 1e-10)] {
        let g = choose_degree(r, eps).unwrap();
        let p = PolyExpApprox::new(g, r);
        let bound = p.remainder_bound();
        assert!(bound < (-r).exp());
        for i in 0..=1000 {
            let x = -r + 2.0 * r * i as f64 / 1000.0;
            assert!((p.eval(x) - x.exp()).abs() <= bound);
            assert!(p.eval(x) > 0.0);
        }
    }
}

/// `Σ_j c_j x^j` with terms accumulated in increasing order.
fn series(x: f64, g: usize) -> f64 {
    let mut term = 1.0;
    let mut acc = 1.0;
    for j in 1..=g {
        term *= x / j as f64;
        acc += term;
    }
    acc
}

#[test]
fn induced_scalar_matches_series() {
    // One query against one key pair, in 2 variables; entries in [-0.9, 0.9]
    // keep the argument inside [-r, r].
    let basis = build_basis(2, 12, 100_000).unwrap();
    let r = 2.0 * 0.9f64.powi(3);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(-0.9..0.9)).collect() };
    for _ in 0..1000 {
        let (q, k1, k2) = (draw(2), draw(2), draw(2));
        let fq = feature_map(&Matrix::from_rows(&[&q]), &basis, FeatureWeighting::Full).unwrap();
        let f1 = feature_map(&Matrix::from_rows(&[&k1]), &basis, FeatureWeighting::None).unwrap();
        let f2 = feature_map(&Matrix::from_rows(&[&k2]), &basis, FeatureWeighting::None).unwrap();
        let got: f64 = (0..basis.len())
            .map(|i| fq.get(0, i) * f1.get(0, i) * f2.get(0, i))
            .sum();
        let x: f64 = (0..2).map(|a| q[a] * k1[a] * k2[a]).sum();
        assert!(x.abs() <= r);
        let want = series(x, 12);
        assert!((got - want).abs() <= 1e-14 * want, "{got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn multinomial_expansion(
        q in prop::collection::vec(-1.0f64..1.0, 3),
        k in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let g = 5;
        let basis = build_basis(3, g, 100_000).unwrap();
        let fq = feature_map(&Matrix::from_rows(&[q.as_slice()]), &basis, FeatureWeighting::None).unwrap();
        let fk = feature_map(&Matrix::from_rows(&[k.as_slice()]), &basis, FeatureWeighting::None).unwrap();
        let inner: f64 = q.iter().zip(&k).map(|(a, b)| a * b).sum();
        for j in 0..=g {
            let expanded: f64 = basis
                .entries()
                .iter()
                .enumerate()
                .filter(|(_, m)| m.degree == j)
                .map(|(i, m)| m.multinomial * fq.get(0, i) * fk.get(0, i))
                .sum();
            let want = inner.powi(j as i32);
            prop_assert!((expanded - want).abs() <= 1e-10 * want.abs().max(1e-3));
        }
    }

    #[test]
    fn random_pair_features_match_series(
        v in prop::collection::vec(-0.5f64..0.5, 6),
    ) {
        let g = 10;
        let basis = build_basis(2, g, 100_000).unwrap();
        let (q, k1, k2) = (&v[0..2], &v[2..4], &v[4..6]);
        let fq = feature_map(&Matrix::from_rows(&[q]), &basis, FeatureWeighting::Full).unwrap();
        let f1 = feature_map(&Matrix::from_rows(&[k1]), &basis, FeatureWeighting::None).unwrap();
        let f2 = feature_map(&Matrix::from_rows(&[k2]), &basis, FeatureWeighting::None).unwrap();
        let got: f64 = (0..basis.len()).map(|i| fq.get(0, i) * f1.get(0, i) * f2.get(0, i)).sum();
        let x: f64 = (0..2).map(|a| q[a] * k1[a] * k2[a]).sum();
        prop_assert!((got - series(x, g)).abs() <= 1e-12);
    }
}
