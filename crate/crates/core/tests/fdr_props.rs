use cht_core::contrasts::compute_moments;
use cht_core::fdr::{permutation_null, permuted_interaction_contrasts};
use cht_core::simulation::{generate_scenario, Scenario, ScenarioConfig};
use cht_core::{compute_all_contrasts, compute_test_statistics, estimate_fdr, ContrastOptions, FdrOptions};

fn null_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        scenario: Scenario::NoMainEffects,
        n: 100,
        p: 20,
        main_effect_size: 0.0,
        interaction_strength: 0.0,
        seed,
        ..Default::default()
    }
}

#[test]
fn identity_permutation_reproduces_z() {
    let (ds, _) = generate_scenario(&ScenarioConfig { n: 60, p: 12, n_main: 2, ints_per_main: 3, ..Default::default() }).unwrap();
    let contrasts = compute_all_contrasts(&ds).unwrap();
    let moments = compute_moments(&ds).unwrap();
    let z = permuted_interaction_contrasts(&ds, &moments, ds.y()).unwrap();
    for (a, b) in z.iter().zip(contrasts.z.iter()) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn swapped_labels_negate_z() {
    // n even so the swap is a permutation of the labels
    let (ds, _) = generate_scenario(&ScenarioConfig { n: 60, p: 12, n_main: 2, ints_per_main: 3, ..Default::default() }).unwrap();
    let contrasts = compute_all_contrasts(&ds).unwrap();
    let moments = compute_moments(&ds).unwrap();
    let swapped: Vec<_> = ds.y().iter().map(|c| c.other()).collect();
    let z = permuted_interaction_contrasts(&ds, &moments, &swapped).unwrap();
    for (a, b) in z.iter().zip(contrasts.z.iter()) {
        assert!((a + b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn permutation_with_other_class_sizes_is_rejected() {
    let (ds, _) = generate_scenario(&null_config(3)).unwrap();
    let moments = compute_moments(&ds).unwrap();
    let mut y = ds.y().to_vec();
    y[0] = y[0].other();
    assert!(permuted_interaction_contrasts(&ds, &moments, &y).is_err());
}

fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Under the global null the pooled permutation distribution should look like the
/// observed statistics.
#[test]
fn permutation_null_matches_observed_under_global_null() {
    let mut observed = Vec::new();
    let mut null = Vec::new();
    for seed in 0..10 {
        let (ds, _) = generate_scenario(&null_config(seed)).unwrap();
        let contrasts = compute_all_contrasts(&ds).unwrap();
        observed.extend(compute_test_statistics(&contrasts).pair_values());
        for perm in permutation_null(&ds, &contrasts, 20, seed, ContrastOptions::default()).unwrap() {
            null.extend(perm);
        }
    }
    let d = ks_distance(&observed, &null);
    assert!(d < 0.06, "KS distance {d}");
}

#[test]
fn fdr_estimate_is_deterministic_and_bounded() {
    let (ds, _) = generate_scenario(&ScenarioConfig { n: 80, p: 15, n_main: 2, ints_per_main: 3, ..Default::default() }).unwrap();
    let contrasts = compute_all_contrasts(&ds).unwrap();
    let options = FdrOptions { permutations: 20, seed: 9, ..Default::default() };
    let a = estimate_fdr(&ds, &contrasts, &options).unwrap();
    let b = estimate_fdr(&ds, &contrasts, &options).unwrap();
    assert_eq!(a, b);
    assert!(a.fdr_hat.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(a.lambda_grid.windows(2).all(|w| w[0] > w[1]));
    assert!(a.observed_exceed.windows(2).all(|w| w[0] <= w[1]));
}
