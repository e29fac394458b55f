mod common;

use common::dual_oracle::{kkt_violation, random_labels, random_psd, solve};
use proptest::prelude::*;
use rfsvm::kernel::{KernelKind, KernelMatrix};
use rfsvm::seed;
use rfsvm::svm::{decision_value, fit_multiclass, predict, solve_binary_smo, SvmHyperparams};

fn matrix(k: &[Vec<f64>]) -> KernelMatrix<f64> {
    KernelMatrix::square(KernelKind::Rbf, k).unwrap()
}

#[test]
fn six_point_problem_matches_projected_gradient() {
    let mut rng = seed::rng(2024);
    let k = random_psd(&mut rng, 6);
    let y = vec![1, -1, 1, 1, -1, -1];
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let oracle = solve(&k, &yf, 1.0);
    assert!(oracle.stationarity < 1e-10);
    let m = solve_binary_smo(&matrix(&k), &y, &SvmHyperparams::with_c(1.0), 0).unwrap();
    assert!(m.converged);
    assert!((m.objective - oracle.objective).abs() < 1e-6, "{} vs {}", m.objective, oracle.objective);
}

#[test]
fn free_support_vectors_sit_on_the_margin() {
    let mut rng = seed::rng(77);
    let k = random_psd(&mut rng, 8);
    let y = random_labels(&mut rng, 8);
    let hp = SvmHyperparams::with_c(100.0);
    let m = solve_binary_smo(&matrix(&k), &y, &hp, 0).unwrap();
    for &i in &m.support_indices {
        let a = m.alpha(i);
        if a > 0.0 && a < hp.c {
            let d = decision_value(&m, &k[i]).unwrap();
            assert!((y[i] as f64 * d - 1.0).abs() <= 1e-3, "i={i} d={d}");
        }
    }
}

#[test]
fn budget_exhaustion_is_flagged_not_fatal() {
    let mut rng = seed::rng(5);
    let k = random_psd(&mut rng, 8);
    let y = random_labels(&mut rng, 8);
    let hp = SvmHyperparams {
        c: 1e4,
        kkt_tolerance: 1e-3,
        max_passes: Some(0),
    };
    let m = solve_binary_smo(&matrix(&k), &y, &hp, 0).unwrap();
    assert_eq!(m.iterations, 1);
    assert!(!m.converged);
}

#[test]
fn sub_kernel_is_row_col_selection() {
    let mut rng = seed::rng(3);
    let k = random_psd(&mut rng, 9);
    let labels = vec![0, 1, 2, 0, 1, 2, 0, 1, 2];
    let full = matrix(&k);
    let m = fit_multiclass(&full, &labels, &SvmHyperparams::with_c(1.0), 0).unwrap();
    assert_eq!(m.pairs.len(), 3);
    for p in &m.pairs {
        let (a, b) = p.model.label_pair;
        let expect: Vec<usize> = (0..9).filter(|&i| labels[i] == a || labels[i] == b).collect();
        assert_eq!(p.positions, expect);
        // rebuild the pair's kernel by hand and re-solve: identical model
        let sub: Vec<Vec<f64>> = expect.iter().map(|&i| expect.iter().map(|&j| k[i][j]).collect()).collect();
        let y: Vec<i8> = expect.iter().map(|&i| if labels[i] == a { 1 } else { -1 }).collect();
        let k_idx = m.pairs.iter().position(|q| q.model.label_pair == (a, b)).unwrap();
        let direct =
            solve_binary_smo(&matrix(&sub), &y, &SvmHyperparams::with_c(1.0), seed::derive(0, k_idx as u64))
                .unwrap();
        assert_eq!(direct.dual_coefs, p.model.dual_coefs);
        assert_eq!(direct.bias, p.model.bias);
    }
}

#[test]
fn binary_multiclass_prediction_is_sign_of_decision() {
    let mut rng = seed::rng(8);
    let k = random_psd(&mut rng, 8);
    let labels = vec![4, 7, 4, 7, 7, 4, 4, 7];
    let full = matrix(&k);
    let m = fit_multiclass(&full, &labels, &SvmHyperparams::with_c(10.0), 0).unwrap();
    let pred = predict(&m, &full).unwrap();
    for (i, &p) in pred.iter().enumerate() {
        let d = m.pairs[0].model.dual_coefs.iter().zip(&k[i]).map(|(a, b)| a * b).sum::<f64>()
            + m.pairs[0].model.bias;
        assert_eq!(p, if d > 0.0 { 4 } else { 7 });
    }
}

#[test]
fn deterministic_given_inputs() {
    let mut rng = seed::rng(10);
    let k = random_psd(&mut rng, 7);
    let labels = vec![0, 1, 2, 1, 0, 2, 1];
    let hp = SvmHyperparams::with_c(3.0);
    let a = fit_multiclass(&matrix(&k), &labels, &hp, 5).unwrap();
    let b = fit_multiclass(&matrix(&k), &labels, &hp, 5).unwrap();
    assert_eq!(a, b);
}

/// Solver tolerance for the objective comparison.
const ORACLE_KKT: f64 = 1e-6;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smo_feasible_and_kkt_at_default_tolerance(s in 0u64..1_000_000, n in 2usize..=8, ci in 0usize..3) {
        let c = [0.01, 1.0, 100.0][ci];
        let mut rng = seed::rng(s);
        let k = random_psd(&mut rng, n);
        let y = random_labels(&mut rng, n);
        let hp = SvmHyperparams::with_c(c);
        let m = solve_binary_smo(&matrix(&k), &y, &hp, s).unwrap();
        prop_assert!(m.converged);

        let eq: f64 = m.dual_coefs.iter().sum();
        prop_assert!(eq.abs() <= 1e-6 * c * n as f64, "Σαy = {}", eq);
        for i in 0..n {
            let a = m.alpha(i);
            prop_assert!((0.0..=c).contains(&a));
            prop_assert_eq!(m.dual_coefs[i] != 0.0, m.support_indices.contains(&i));
        }
        prop_assert!(kkt_violation(&k, &y, &m.dual_coefs, m.bias, c) <= 1e-3 + 1e-12);
    }

    #[test]
    fn smo_matches_oracle(s in 0u64..1_000_000, n in 2usize..=8, ci in 0usize..3) {
        let c = [0.01, 1.0, 100.0][ci];
        let mut rng = seed::rng(s);
        let k = random_psd(&mut rng, n);
        let y = random_labels(&mut rng, n);
        let hp = SvmHyperparams { c, kkt_tolerance: ORACLE_KKT, max_passes: None };
        let m = solve_binary_smo(&matrix(&k), &y, &hp, s).unwrap();
        prop_assert!(m.converged);
        prop_assert!(kkt_violation(&k, &y, &m.dual_coefs, m.bias, c) <= 1e-3);

        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let oracle = solve(&k, &yf, c);
        prop_assert!((m.objective - oracle.objective).abs() < 1e-6,
            "smo {} oracle {} (stationarity {})", m.objective, oracle.objective, oracle.stationarity);
    }
}
