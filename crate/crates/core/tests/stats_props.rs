use proptest::prelude::*;
use rand::Rng;
use rfsvm::stats::{
    bayesian_sign_test, critical_difference, friedman_nemenyi, pairwise_sign_tests, rank_methods,
    CdDiagram, ScoreTable,
};

fn table(scores: Vec<Vec<f64>>) -> ScoreTable<f64> {
    let k = scores[0].len();
    let n = scores.len();
    ScoreTable::new(
        (0..k).map(|j| format!("m{j}")).collect(),
        (0..n).map(|d| format!("d{d}")).collect(),
        scores,
    )
    .unwrap()
}

fn scores_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..7, 2usize..15).prop_flat_map(|(k, n)| {
        prop::collection::vec(prop::collection::vec((0u32..20).prop_map(|v| v as f64 / 20.0), k), n)
    })
}

#[test]
fn critical_difference_for_seven_methods_on_forty_datasets() {
    let cd = critical_difference(7, 40, 0.05).unwrap();
    assert!((cd - 1.424174).abs() < 1e-5, "{cd}");
}

#[test]
fn identical_methods_give_zero_statistic() {
    let t = table(vec![vec![0.8; 4]; 10]);
    let r = friedman_nemenyi(&t, 0.05).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.iman_davenport_f, Some(0.0));
    assert!(r.avg_ranks.iter().all(|&v| v == 2.5));
    assert_eq!(r.groups, vec![vec![0, 1, 2, 3]]);
    let cd = CdDiagram::from(&r);
    assert!(cd.methods.iter().all(|m| m.groups == vec![0]));
}

#[test]
fn dominant_method_separates() {
    let scores: Vec<Vec<f64>> = (0..30).map(|d| vec![0.9, 0.5 + 0.001 * d as f64, 0.4]).collect();
    let r = friedman_nemenyi(&table(scores), 0.05).unwrap();
    assert_eq!(r.avg_ranks, vec![1.0, 2.0, 3.0]);
    assert!(r.p_value < 1e-6);
    assert!(r.significantly_different(0, 2));
    assert_eq!(r.iman_davenport_f, None);
    let back: rfsvm::stats::FriedmanReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);

    let mixed = table(vec![vec![0.9, 0.5, 0.4], vec![0.5, 0.9, 0.4], vec![0.9, 0.4, 0.5]]);
    let f = friedman_nemenyi(&mixed, 0.05).unwrap();
    assert!(f.iman_davenport_f.unwrap() > 0.0);
    assert!((0.0..=1.0).contains(&f.iman_davenport_p));
}

#[test]
fn identical_vectors_land_in_rope() {
    let a: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
    let r = bayesian_sign_test(&a, &a, 0.01, 50_000, 1).unwrap();
    assert!(r.p_rope >= 0.99, "{r:?}");
}

#[test]
fn swapping_arguments_swaps_probabilities() {
    let a: Vec<f64> = (0..25).map(|i| 0.7 + 0.01 * (i % 7) as f64).collect();
    let b: Vec<f64> = (0..25).map(|i| 0.7 + 0.01 * (i % 5) as f64).collect();
    let ab = bayesian_sign_test(&a, &b, 0.005, 50_000, 3).unwrap();
    let ba = bayesian_sign_test(&b, &a, 0.005, 50_000, 4).unwrap();
    assert!((ab.p_a_gt_b - ba.p_b_gt_a).abs() <= 0.01);
    assert!((ab.p_rope - ba.p_rope).abs() <= 0.01);
    assert!((ab.p_b_gt_a - ba.p_a_gt_b).abs() <= 0.01);
}

#[test]
fn sign_test_is_seed_deterministic() {
    let a = [0.1, 0.5, 0.3, 0.9];
    let b = [0.2, 0.4, 0.3, 0.1];
    assert_eq!(
        bayesian_sign_test(&a, &b, 0.01, 25_000, 7).unwrap(),
        bayesian_sign_test(&a, &b, 0.01, 25_000, 7).unwrap()
    );
    let t = table(vec![a.to_vec(), b.to_vec()]);
    let m = pairwise_sign_tests(&t, 0.01, 1000, 0).unwrap();
    assert_eq!(m.len(), 4);
}

#[test]
fn wider_rope_shrinks_decisive_mass_over_random_tables() {
    let mut rng = rfsvm::seed::rng(20240501);
    let mut held = 0;
    for trial in 0..100u64 {
        let n = rng.random_range(5..40);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.6..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + rng.random_range(-0.03..0.03)).collect();
        let narrow = bayesian_sign_test(&a, &b, 0.005, 10_000, trial).unwrap();
        let wide = bayesian_sign_test(&a, &b, 0.01, 10_000, trial).unwrap();
        if wide.p_a_gt_b + wide.p_b_gt_a <= narrow.p_a_gt_b + narrow.p_b_gt_a + 0.01 {
            held += 1;
        }
    }
    assert!(held >= 95, "held in {held}/100 trials");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rank_rows_sum_to_triangular(scores in scores_strategy()) {
        let k = scores[0].len() as f64;
        let r = rank_methods(&table(scores));
        for row in &r.ranks {
            prop_assert!((row.iter().sum::<f64>() - k * (k + 1.0) / 2.0).abs() < 1e-9);
        }
        prop_assert!((r.avg_ranks.iter().sum::<f64>() - k * (k + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn ranks_invariant_under_monotone_maps(scores in scores_strategy()) {
        let mapped: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|v| (3.0 * v).exp() - 1.0).collect()).collect();
        prop_assert_eq!(rank_methods(&table(scores)), rank_methods(&table(mapped)));
    }

    #[test]
    fn wider_rope_never_shrinks_rope_mass(
        diffs in prop::collection::vec(-0.05f64..0.05, 5..30),
        s in 0u64..1000,
    ) {
        let b = vec![0.5; diffs.len()];
        let a: Vec<f64> = diffs.iter().map(|d| 0.5 + d).collect();
        let narrow = bayesian_sign_test(&a, &b, 0.005, 20_000, s).unwrap();
        let wide = bayesian_sign_test(&a, &b, 0.01, 20_000, s).unwrap();
        prop_assert!(wide.counts[1] >= narrow.counts[1]);
        prop_assert!(wide.p_rope + 0.02 >= narrow.p_rope, "{} < {}", wide.p_rope, narrow.p_rope);
        prop_assert!((narrow.p_a_gt_b + narrow.p_rope + narrow.p_b_gt_a - 1.0).abs() < 1e-9);
    }
}
