use cht_core::row_solver::solve_row;
use cht_core::simulation::{generate_scenario, Scenario, ScenarioConfig};
use cht_core::{compute_all_contrasts, compute_test_statistics, entry_points_row};
use proptest::prelude::*;

fn row() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (-6.0..6.0_f64, prop::collection::vec(-6.0..6.0_f64, 1..10))
}

fn linf(z: &[f64]) -> f64 {
    z.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn shrinkage_bounds((w, z) in row()) {
        let (nu, nu_k) = entry_points_row(w, &z);
        prop_assert!(nu >= w.abs());
        for (s, v) in nu_k.iter().zip(&z) {
            prop_assert!(*s >= 0.5 * v.abs() - 1e-12);
            prop_assert!(*s <= v.abs() + 1e-12);
            prop_assert!(*s <= nu + 1e-12);
        }
    }

    #[test]
    fn largest_interaction_enters_with_main_in_big_interaction_regime((w, z) in row()) {
        prop_assume!(w.abs() < linf(&z));
        let (nu, nu_k) = entry_points_row(w, &z);
        prop_assert_eq!(nu_k.iter().cloned().fold(0.0, f64::max), nu);
    }

    #[test]
    fn no_shrinkage_when_main_dominates(w in 0.0..6.0_f64, z in prop::collection::vec(-1.0..1.0_f64, 1..8)) {
        let l1: f64 = z.iter().map(|v| v.abs()).sum();
        prop_assume!(l1 < w);
        let (nu, nu_k) = entry_points_row(w, &z);
        prop_assert_eq!(nu, w);
        for (s, v) in nu_k.iter().zip(&z) {
            prop_assert_eq!(*s, v.abs());
        }
    }

    #[test]
    fn larger_main_effect_never_lowers_statistics((w, z) in row(), boost in 0.0..3.0_f64) {
        let (nu, nu_k) = entry_points_row(w, &z);
        let (nu2, nu_k2) = entry_points_row(w.abs() + boost, &z);
        prop_assert!(nu2 >= nu);
        for (a, b) in nu_k.iter().zip(&nu_k2) {
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn entry_points_match_the_solver((w, z) in row()) {
        let (nu, nu_k) = entry_points_row(w, &z);
        let above = |v: f64| v * (1.0 + 1e-9) + 1e-12;
        let below = |v: f64| v * (1.0 - 1e-6);
        let (sol, _) = solve_row(w, &z, above(nu)).unwrap();
        prop_assert!(sol.is_zero());
        if nu > 1e-9 {
            let (sol, _) = solve_row(w, &z, below(nu)).unwrap();
            prop_assert!(sol.beta_plus > 0.0 || sol.beta_minus > 0.0);
        }
        for (k, &v) in nu_k.iter().enumerate() {
            let (sol, _) = solve_row(w, &z, above(v)).unwrap();
            prop_assert!(sol.theta[k].abs() <= 1e-12, "theta_{} = {} above entry {}", k, sol.theta[k], v);
            if v > 1e-9 {
                let (sol, _) = solve_row(w, &z, below(v)).unwrap();
                prop_assert!(sol.theta[k] != 0.0, "theta_{} zero below entry {}", k, v);
            }
        }
    }
}

#[test]
fn weak_hierarchy_on_random_datasets() {
    for seed in 0..100 {
        let cfg = ScenarioConfig { scenario: Scenario::Hierarchical, n: 50, p: 10, n_main: 2, ints_per_main: 2, seed, ..Default::default() };
        let (ds, _) = generate_scenario(&cfg).unwrap();
        let stats = compute_test_statistics(&compute_all_contrasts(&ds).unwrap());
        for j in 0..10 {
            for k in 0..10 {
                if j != k {
                    let bound = stats.lambda_main[j].max(stats.lambda_main[k]);
                    assert!(stats.lambda_prime(j, k) <= bound + 1e-12);
                }
            }
        }
    }
}

#[test]
fn worked_examples() {
    let (nu, nu_k) = entry_points_row(0.5, &[2.0, 1.0]);
    assert!((nu - 1.25).abs() <= 1e-12);
    assert!((nu_k[0] - 1.25).abs() <= 1e-12);
    assert!((nu_k[1] - 0.5).abs() <= 1e-12);

    let (nu, nu_k) = entry_points_row(3.0, &[1.0, 0.5]);
    assert_eq!(nu, 3.0);
    assert_eq!(nu_k, vec![1.0, 0.5]);
}
