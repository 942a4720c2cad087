//! Brute-force checks of the closed-form row solver and entry points.
//!
//! The oracle only uses two facts about the row problem: for a fixed interaction
//! threshold `t = lambda + alpha` the best `theta` is `S(z, t)`, and for a fixed
//! `theta` the best `(beta+, beta-)` is a one-dimensional problem with an explicit
//! minimizer. It then searches `alpha` over a dense grid plus every breakpoint and
//! refines with golden-section search, comparing raw objective values only.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::rng::substream;
use crate::row_solver::{kkt_residuals, solve_row};
use crate::test_stats::entry_points_row;

/// Golden-section iterations; shrinks the bracket by about `1e-13`.
const GOLDEN_ITERS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub objective: f64,
}

fn row_objective(w: f64, z: &[f64], lambda: f64, bp: f64, bm: f64, theta: &[f64]) -> f64 {
    let r = w - bp + bm;
    let mut fit = 0.0;
    let mut l1 = 0.0;
    for (zk, th) in z.iter().zip(theta) {
        fit += (zk - th) * (zk - th);
        l1 += th.abs();
    }
    0.5 * r * r + 0.5 * fit + lambda * (bp + bm) + lambda * l1
}

fn candidate(w: f64, z: &[f64], lambda: f64, alpha: f64) -> OracleSolution {
    let t = lambda + alpha;
    let theta: Vec<f64> = z.iter().map(|&v| v.signum() * (v.abs() - t).max(0.0)).collect();
    let c: f64 = theta.iter().map(|v| v.abs()).sum();
    // best d = beta+ - beta- given ||theta||_1 = c, then s = beta+ + beta- = max(|d|, c)
    let d = if w.abs() <= c { w } else { w.signum() * (w.abs() - lambda).max(c) };
    let s = d.abs().max(c);
    let (bp, bm) = ((s + d) / 2.0, (s - d) / 2.0);
    let objective = row_objective(w, z, lambda, bp, bm, &theta);
    OracleSolution { beta_plus: bp, beta_minus: bm, theta, alpha, objective }
}

/// Minimizes the row objective by search over `alpha in [0, lambda]` with grid step
/// `alpha_step_rel * lambda`, all breakpoints `|z_k| - lambda`, and a golden-section
/// refinement around the best grid point.
pub fn oracle_solve_row(w: f64, z: &[f64], lambda: f64, alpha_step_rel: f64) -> OracleSolution {
    assert!(alpha_step_rel > 0.0 && lambda > 0.0);
    let steps = (1.0 / alpha_step_rel).ceil() as usize;
    let mut alphas: Vec<f64> = (0..=steps).map(|i| (i as f64 * alpha_step_rel * lambda).min(lambda)).collect();
    alphas.extend(z.iter().map(|v| v.abs() - lambda).filter(|a| (0.0..=lambda).contains(a)));
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();

    let mut best_i = 0;
    let mut best = candidate(w, z, lambda, alphas[0]);
    for (i, &a) in alphas.iter().enumerate().skip(1) {
        let c = candidate(w, z, lambda, a);
        if c.objective < best.objective {
            best = c;
            best_i = i;
        }
    }

    let (mut lo, mut hi) = (alphas[best_i.saturating_sub(1)], alphas[(best_i + 1).min(alphas.len() - 1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = candidate(w, z, lambda, x1).objective;
    let mut f2 = candidate(w, z, lambda, x2).objective;
    for _ in 0..GOLDEN_ITERS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = candidate(w, z, lambda, x1).objective;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = candidate(w, z, lambda, x2).objective;
        }
    }
    let refined = candidate(w, z, lambda, 0.5 * (lo + hi));
    if refined.objective < best.objective {
        refined
    } else {
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEntryPoints {
    pub nu: Option<f64>,
    pub nu_k: Vec<Option<f64>>,
}

/// Largest `lambda` of a descending grid at which the oracle solution has a nonzero
/// main effect (resp. `theta_k`). Magnitudes at or below `tol` count as zero.
pub fn oracle_entry_points(w: f64, z: &[f64], lambda_grid: &[f64], alpha_step_rel: f64, tol: f64) -> OracleEntryPoints {
    let mut out = OracleEntryPoints { nu: None, nu_k: vec![None; z.len()] };
    for &lam in lambda_grid {
        if out.nu.is_some() && out.nu_k.iter().all(Option::is_some) {
            break;
        }
        let sol = oracle_solve_row(w, z, lam, alpha_step_rel);
        if out.nu.is_none() && (sol.beta_plus > tol || sol.beta_minus > tol) {
            out.nu = Some(lam);
        }
        for (slot, th) in out.nu_k.iter_mut().zip(&sol.theta) {
            if slot.is_none() && th.abs() > tol {
                *slot = Some(lam);
            }
        }
    }
    out
}

/// `top, top - step, ...` down to the last positive value.
pub fn descending_grid(top: f64, step: f64) -> Vec<f64> {
    let count = (top / step).floor() as usize;
    (0..=count).map(|i| top - i as f64 * step).filter(|&v| v > 0.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub pass: bool,
    /// Perturbed `(beta+, beta-, theta...)` that did not increase the objective.
    pub witness: Option<Vec<f64>>,
}

/// Random feasible perturbations of radius up to `1e-3` must not lower the objective,
/// and must strictly raise it beyond radius `1e-6`.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_probe(
    w: f64,
    z: &[f64],
    lambda: f64,
    beta_plus: f64,
    beta_minus: f64,
    theta: &[f64],
    trials: usize,
    seed: u64,
) -> ProbeResult {
    let base = row_objective(w, z, lambda, beta_plus, beta_minus, theta);
    let slack = 1e-12 * base.abs().max(1.0);
    let mut rng = substream(seed, 0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let dim = theta.len() + 2;
    for _ in 0..trials {
        let radius = 10f64.powf(rng.random_range(-5.7..-3.0));
        let dir: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut bp = (beta_plus + radius * dir[0] / norm).max(0.0);
        let mut bm = (beta_minus + radius * dir[1] / norm).max(0.0);
        let mut th: Vec<f64> = theta.iter().zip(&dir[2..]).map(|(t, d)| t + radius * d / norm).collect();
        // restore the hierarchy constraint by growing beta symmetrically
        let l1: f64 = th.iter().map(|v| v.abs()).sum();
        if l1 > bp + bm {
            let gap = (l1 - bp - bm) / 2.0;
            bp += gap;
            bm += gap;
        }
        let moved = ((bp - beta_plus).powi(2)
            + (bm - beta_minus).powi(2)
            + th.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sqrt();
        let value = row_objective(w, z, lambda, bp, bm, &th);
        let bad = value < base - slack || (moved > 1e-6 && value <= base);
        if bad {
            let mut witness = vec![bp, bm];
            witness.append(&mut th);
            return ProbeResult { pass: false, witness: Some(witness) };
        }
    }
    ProbeResult { pass: true, witness: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub instances: usize,
    pub seed: u64,
    /// `lambda` step of the entry-point grid.
    pub grid: f64,
    /// Relative `alpha` step of the fixed-`lambda` oracle.
    pub alpha_step_rel: f64,
    /// Relative `alpha` step used inside the entry-point scan.
    pub entry_alpha_step_rel: f64,
    pub max_m: usize,
    pub sd: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { instances: 1000, seed: 1, grid: 1e-3, alpha_step_rel: 1e-5, entry_alpha_step_rel: 1e-2, max_m: 10, sd: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleFailure {
    pub instance: usize,
    pub w: f64,
    pub z: Vec<f64>,
    pub lambda: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub instances: usize,
    pub max_coordinate_discrepancy: f64,
    /// Largest `closed-form objective - oracle objective`.
    pub max_objective_gap: f64,
    pub max_kkt_residual: f64,
    pub max_entry_point_discrepancy: f64,
    pub failures: Vec<OracleFailure>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct InstanceResult {
    coord: f64,
    gap: f64,
    kkt: f64,
    entry: f64,
    failures: Vec<OracleFailure>,
}

fn check_instance(cfg: &OracleConfig, instance: usize) -> InstanceResult {
    let mut rng = substream(cfg.seed, instance as u64);
    let normal = Normal::new(0.0, cfg.sd).expect("positive sd");
    let m = rng.random_range(1..=cfg.max_m);
    let w = normal.sample(&mut rng);
    let z: Vec<f64> = (0..m).map(|_| normal.sample(&mut rng)).collect();
    let scale = w.abs().max(z.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    let lambda = rng.random_range(0.01..1.2) * scale.max(0.05);

    let mut failures = Vec::new();
    let mut fail = |reason: String| failures.push(OracleFailure { instance, w, z: z.clone(), lambda, reason });

    let (sol, cert) = solve_row(w, &z, lambda).expect("positive lambda");
    let kkt = kkt_residuals(w, &z, lambda, &sol, &cert);
    if kkt > 1e-10 {
        fail(format!("kkt residual {kkt:e}"));
    }
    if sol.beta_plus == 0.0 && sol.beta_minus > 0.0 && w > 0.0 || sol.beta_minus == 0.0 && sol.beta_plus > 0.0 && w < 0.0 {
        fail("main effect has the wrong sign".into());
    }

    let oracle = oracle_solve_row(w, &z, lambda, cfg.alpha_step_rel);
    let closed = row_objective(w, &z, lambda, sol.beta_plus, sol.beta_minus, &sol.theta);
    let gap = closed - oracle.objective;
    if gap > 1e-9 {
        fail(format!("closed form objective exceeds oracle by {gap:e}"));
    }
    let coord = std::iter::once((sol.beta_plus - oracle.beta_plus).abs())
        .chain(std::iter::once((sol.beta_minus - oracle.beta_minus).abs()))
        .chain(sol.theta.iter().zip(&oracle.theta).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    if coord > 1e-6 {
        fail(format!("coordinates differ from oracle by {coord:e}"));
    }

    let (nu, nu_k) = entry_points_row(w, &z);
    let grid = descending_grid(scale + 1.0, cfg.grid);
    let found = oracle_entry_points(w, &z, &grid, cfg.entry_alpha_step_rel, 1e-9);
    let slack = cfg.grid + 1e-12;
    let mut entry: f64 = 0.0;
    let mut compare = |label: String, closed: f64, found: Option<f64>| match found {
        Some(v) => {
            let d = (v - closed).abs();
            entry = entry.max(d);
            if d > slack {
                fail(format!("{label}: oracle {v} vs closed form {closed}"));
            }
        }
        None if closed > slack => fail(format!("{label}: oracle found no entry, closed form {closed}")),
        None => {}
    };
    compare("main".into(), nu, found.nu);
    for (k, (&c, &f)) in nu_k.iter().zip(&found.nu_k).enumerate() {
        compare(format!("interaction {k}"), c, f);
    }
    InstanceResult { coord, gap, kkt, entry, failures }
}

/// Checks closed-form solutions and entry points against the oracle on random rows
/// with `m` uniform on `1..=max_m` and entries drawn from `N(0, sd^2)`.
pub fn run_oracle_check(cfg: &OracleConfig) -> OracleReport {
    let results: Vec<InstanceResult> = (0..cfg.instances).into_par_iter().map(|i| check_instance(cfg, i)).collect();
    let mut report = OracleReport {
        instances: cfg.instances,
        max_coordinate_discrepancy: 0.0,
        max_objective_gap: f64::NEG_INFINITY,
        max_kkt_residual: 0.0,
        max_entry_point_discrepancy: 0.0,
        failures: Vec::new(),
    };
    for r in results {
        report.max_coordinate_discrepancy = report.max_coordinate_discrepancy.max(r.coord);
        report.max_objective_gap = report.max_objective_gap.max(r.gap);
        report.max_kkt_residual = report.max_kkt_residual.max(r.kkt);
        report.max_entry_point_discrepancy = report.max_entry_point_discrepancy.max(r.entry);
        report.failures.extend(r.failures);
    }
    if cfg.instances == 0 {
        report.max_objective_gap = 0.0;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_matches_hand_example() {
        let o = oracle_solve_row(0.5, &[2.0, 1.0], 1.0, 1e-5);
        assert!((o.beta_plus - 0.25).abs() < 1e-6 && o.beta_minus.abs() < 1e-6);
        assert!((o.theta[0] - 0.25).abs() < 1e-6 && o.theta[1] == 0.0);
    }

    #[test]
    fn huge_lambda_gives_zero() {
        let (w, z) = (0.7, [1.5, -0.3]);
        let o = oracle_solve_row(w, &z, 100.0, 1e-5);
        assert_eq!((o.beta_plus, o.beta_minus), (0.0, 0.0));
        assert!(o.theta.iter().all(|&t| t == 0.0));
        let expect = 0.5 * (w * w + z.iter().map(|v| v * v).sum::<f64>());
        assert!((o.objective - expect).abs() < 1e-12);
    }

    #[test]
    fn entry_points_of_simple_rows() {
        let grid = descending_grid(2.0, 1e-3);
        let e = oracle_entry_points(0.0, &[1.0], &grid, 1e-2, 1e-9);
        assert!((e.nu_k[0].unwrap() - 0.5).abs() <= 1e-3 + 1e-12);
        let e = oracle_entry_points(0.0, &[0.0, 0.0], &grid, 1e-2, 1e-9);
        assert_eq!(e.nu, None);
        assert_eq!(e.nu_k, vec![None, None]);
    }

    #[test]
    fn probe_accepts_solver_output_and_rejects_corruption() {
        let (w, z, lambda) = (0.5, [2.0, 1.0], 1.0);
        let (sol, _) = solve_row(w, &z, lambda).unwrap();
        assert!(uniqueness_probe(w, &z, lambda, sol.beta_plus, sol.beta_minus, &sol.theta, 500, 1).pass);
        // feasible but with slack in the hierarchy constraint
        let r = uniqueness_probe(w, &z, lambda, sol.beta_plus + 0.1, 0.0, &sol.theta, 500, 1);
        assert!(!r.pass && r.witness.is_some());
    }

    #[test]
    fn probe_accepts_zero_solution() {
        let (w, z) = (0.5, [2.0, 1.0]);
        let (sol, _) = solve_row(w, &z, 5.0).unwrap();
        assert!(sol.is_zero());
        assert!(uniqueness_probe(w, &z, 5.0, 0.0, 0.0, &sol.theta, 500, 2).pass);
    }

    #[test]
    fn small_oracle_run_passes() {
        let cfg = OracleConfig { instances: 40, seed: 5, ..Default::default() };
        let report = run_oracle_check(&cfg);
        assert!(report.passed(), "{:?}", report.failures);
    }
}
