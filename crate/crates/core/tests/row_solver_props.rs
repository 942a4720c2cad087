use cht_core::row_solver::{compute_knots, kkt_residuals, solve_path, solve_row, CaseLabel, Regime};
use proptest::prelude::*;

fn row() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (-6.0..6.0_f64, prop::collection::vec(-6.0..6.0_f64, 1..10))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn kkt_holds((w, z) in row(), frac in 0.01..1.5_f64) {
        let top = w.abs().max(z.iter().fold(0.0_f64, |a, v| a.max(v.abs()))).max(0.1);
        let lambda = frac * top;
        let (sol, cert) = solve_row(w, &z, lambda).unwrap();
        prop_assert!(kkt_residuals(w, &z, lambda, &sol, &cert) <= 1e-10);
    }

    #[test]
    fn scale_equivariance((w, z) in row(), lambda in 0.05..5.0_f64, c in 0.1..10.0_f64) {
        let (a, _) = solve_row(w, &z, lambda).unwrap();
        let zs: Vec<f64> = z.iter().map(|v| c * v).collect();
        let (b, _) = solve_row(c * w, &zs, c * lambda).unwrap();
        prop_assert!(close(c * a.beta_plus, b.beta_plus, 1e-9));
        prop_assert!(close(c * a.beta_minus, b.beta_minus, 1e-9));
        for (x, y) in a.theta.iter().zip(&b.theta) {
            prop_assert!(close(c * x, *y, 1e-9));
        }
    }

    #[test]
    fn path_is_monotone((w, z) in row()) {
        let top = w.abs().max(z.iter().fold(0.0_f64, |a, v| a.max(v.abs()))) + 0.5;
        let grid: Vec<f64> = (0..200).map(|i| top * (1.0 - i as f64 / 200.0)).collect();
        let path = solve_path(w, &z, &grid).unwrap();
        for pair in path.windows(2) {
            for (hi, lo) in pair[0].0.theta.iter().zip(&pair[1].0.theta) {
                prop_assert!(hi.abs() <= lo.abs() + 1e-10);
            }
            prop_assert!(pair[0].0.beta().abs() <= pair[1].0.beta().abs() + 1e-10);
        }
    }

    #[test]
    fn main_effect_never_has_wrong_sign((w, z) in row(), lambda in 0.01..8.0_f64) {
        let (sol, _) = solve_row(w, &z, lambda).unwrap();
        if w > 0.0 {
            prop_assert!(!(sol.beta_plus == 0.0 && sol.beta_minus > 0.0));
        }
        if w < 0.0 {
            prop_assert!(!(sol.beta_minus == 0.0 && sol.beta_plus > 0.0));
        }
    }

    #[test]
    fn hierarchy_tight_iff_alpha_positive((w, z) in row(), lambda in 0.01..8.0_f64) {
        let (sol, cert) = solve_row(w, &z, lambda).unwrap();
        let l1: f64 = sol.theta.iter().map(|t| t.abs()).sum();
        let bound = sol.beta_plus + sol.beta_minus;
        prop_assert!(l1 <= bound + 1e-10);
        if cert.alpha > 1e-12 {
            prop_assert!((l1 - bound).abs() <= 1e-9);
        }
        if sol.case == CaseLabel::LooseMain {
            prop_assert_eq!(cert.alpha, 0.0);
        }
    }

    #[test]
    fn knots_are_consistent((w, z) in row()) {
        let k = compute_knots(w, &z);
        let a = w.abs();
        let l1: f64 = z.iter().map(|v| v.abs()).sum();
        let linf = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        match k.regime {
            Regime::BigMain => prop_assert!(l1 < a),
            Regime::Moderate => prop_assert!(linf <= a && a <= l1),
            Regime::BigInteraction => prop_assert!(a < linf),
        }
        prop_assert!(close(k.lam4, 0.5 * (a + linf), 1e-12));
        if k.lam1.is_finite() {
            prop_assert!(k.lam1 <= k.lam2 + 1e-12);
            prop_assert!(close(k.lam2, a, 1e-12));
        }
        // Nothing is active above max(|w|, lam4).
        let top = a.max(k.lam4) * (1.0 + 1e-9) + 1e-12;
        let (sol, _) = solve_row(w, &z, top).unwrap();
        prop_assert!(sol.is_zero());
        prop_assert_eq!(sol.case, CaseLabel::Zero);
    }

    #[test]
    fn negating_w_swaps_signs((w, z) in row(), lambda in 0.01..8.0_f64) {
        let (a, _) = solve_row(w, &z, lambda).unwrap();
        let (b, _) = solve_row(-w, &z, lambda).unwrap();
        prop_assert!(close(a.beta_plus, b.beta_minus, 1e-12));
        prop_assert!(close(a.beta_minus, b.beta_plus, 1e-12));
        for (x, y) in a.theta.iter().zip(&b.theta) {
            prop_assert!(close(*x, *y, 1e-12));
        }
    }
}
