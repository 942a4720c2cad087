//! Closed-form test statistics.
//!
//! For row `j`, `lambda_hat_j` is the largest `lambda` at which the main effect is
//! nonzero and `lambda_hat_jk` the largest at which `theta_k` is nonzero. Both are
//! available without tracing the path:
//!
//! ```text
//! nu   = max(|w|, (|w| + ||z||_inf) / 2)
//! nu_k = min(|z_k|, (|z_k| + [|w| - sum_{l: |z_l| > |z_k|} (|z_l| - |z_k|)]_+) / 2)
//! ```
//!
//! The pair statistic is `lambda'_jk = max(lambda_hat_jk, lambda_hat_kj)`.

use std::cmp::Ordering;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::contrasts::{pairs, ContrastSet};
use crate::error::{Error, Result};

/// Entry points `(nu, nu_k)` of one row.
pub fn entry_points_row(w: f64, z: &[f64]) -> (f64, Vec<f64>) {
    let a = w.abs();
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&x, &y| z[y].abs().total_cmp(&z[x].abs()));

    let linf = order.first().map_or(0.0, |&k| z[k].abs());
    let nu = a.max(0.5 * (a + linf));

    let mut nu_k = vec![0.0; z.len()];
    // walk magnitudes downward; `above` and `count` cover strictly larger values only
    let (mut above, mut count) = (0.0, 0usize);
    let mut i = 0;
    while i < order.len() {
        let v = z[order[i]].abs();
        let excess = above - count as f64 * v;
        let stat = v.min(0.5 * (v + (a - excess).max(0.0)));
        let mut end = i;
        while end < order.len() && z[order[end]].abs() == v {
            nu_k[order[end]] = stat;
            end += 1;
        }
        above += v * (end - i) as f64;
        count = end;
        i = end;
    }
    (nu, nu_k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestStatistics {
    /// `lambda_hat_j`.
    pub lambda_main: Vec<f64>,
    /// `[j, k]` holds row `j`'s statistic for pair `(j, k)`; diagonal is 0.
    pub lambda_int_asym: Array2<f64>,
    /// Symmetric `lambda'_jk`; diagonal is 0.
    pub lambda_int: Array2<f64>,
}

impl TestStatistics {
    pub fn p(&self) -> usize {
        self.lambda_main.len()
    }

    pub fn lambda_prime(&self, j: usize, k: usize) -> f64 {
        self.lambda_int[[j, k]]
    }

    /// `lambda'` for every unordered pair in lexicographic pair order.
    pub fn pair_values(&self) -> Vec<f64> {
        pairs(self.p()).map(|(j, k)| self.lambda_int[[j, k]]).collect()
    }

    /// Features by `lambda_hat_j` descending, ties by index.
    pub fn main_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.p()).collect();
        idx.sort_by(|&a, &b| desc(self.lambda_main[a], self.lambda_main[b]).then(a.cmp(&b)));
        idx
    }

    /// Pairs by `lambda'` descending, ties lexicographically.
    pub fn interaction_order(&self) -> Vec<(usize, usize)> {
        let mut all: Vec<(usize, usize)> = pairs(self.p()).collect();
        all.sort_by(|&a, &b| desc(self.lambda_int[[a.0, a.1]], self.lambda_int[[b.0, b.1]]).then(a.cmp(&b)));
        all
    }
}

fn desc(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

pub fn compute_test_statistics(contrasts: &ContrastSet) -> TestStatistics {
    let p = contrasts.p();
    let rows: Vec<(f64, Vec<f64>)> =
        (0..p).into_par_iter().map(|j| entry_points_row(contrasts.w[j], &contrasts.row(j))).collect();

    let mut lambda_main = Vec::with_capacity(p);
    let mut asym = Array2::zeros((p, p));
    for (j, (nu, nu_k)) in rows.into_iter().enumerate() {
        lambda_main.push(nu);
        let others = (0..p).filter(|&k| k != j);
        for (k, v) in others.zip(nu_k) {
            asym[[j, k]] = v;
        }
    }
    let mut sym = Array2::zeros((p, p));
    for (j, k) in pairs(p) {
        let v = f64::max(asym[[j, k]], asym[[k, j]]);
        sym[[j, k]] = v;
        sym[[k, j]] = v;
    }
    TestStatistics { lambda_main, lambda_int_asym: asym, lambda_int: sym }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Effect {
    Main(usize),
    Interaction(usize, usize),
}

/// Main effects and interactions merged and sorted by statistic, descending.
/// Ties put main effects first, then go by index.
pub fn rank_effects(stats: &TestStatistics, top_k: usize) -> Vec<(Effect, f64)> {
    let mut all: Vec<(Effect, f64)> = stats.lambda_main.iter().enumerate().map(|(j, &v)| (Effect::Main(j), v)).collect();
    all.extend(pairs(stats.p()).map(|(j, k)| (Effect::Interaction(j, k), stats.lambda_int[[j, k]])));
    all.sort_by(|a, b| desc(a.1, b.1).then(a.0.cmp(&b.0)));
    all.truncate(top_k);
    all
}

/// Background for [`shrinkage_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShrinkageModel {
    /// Other interactions drawn from N(0, 1).
    Normal,
    /// Other interactions drawn from N(0, 0.5^2).
    Spiked,
}

impl std::str::FromStr for ShrinkageModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "spiked" => Ok(Self::Spiked),
            other => Err(Error::InvalidArgument(format!("unknown interaction model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkagePoint {
    pub w: f64,
    pub z: f64,
    pub lambda_hat: f64,
}

/// Statistic of one varying interaction `z` in a row with `m - 1` random others,
/// for every `w` and every `z` in the grid. The background draws are shared by all
/// curves.
pub fn shrinkage_curve(
    ws: &[f64],
    z_grid: &[f64],
    model: ShrinkageModel,
    m: usize,
    seed: u64,
) -> Result<Vec<ShrinkagePoint>> {
    if m < 1 {
        return Err(Error::InvalidArgument("need at least one interaction".into()));
    }
    let sd = match model {
        ShrinkageModel::Normal => 1.0,
        ShrinkageModel::Spiked => 0.5,
    };
    let normal = Normal::new(0.0, sd).expect("valid sd");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row: Vec<f64> = std::iter::once(0.0).chain((1..m).map(|_| normal.sample(&mut rng))).collect();

    let mut out = Vec::with_capacity(ws.len() * z_grid.len());
    for &w in ws {
        for &z in z_grid {
            row[0] = z;
            let (_, nu_k) = entry_points_row(w, &row);
            out.push(ShrinkagePoint { w, z, lambda_hat: nu_k[0] });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::row_solver::solve_row;

    #[test]
    fn big_main_row_has_no_shrinkage() {
        let (nu, nu_k) = entry_points_row(3.0, &[1.0, 0.5]);
        assert_eq!(nu, 3.0);
        assert_eq!(nu_k, vec![1.0, 0.5]);
    }

    #[test]
    fn big_interaction_row() {
        let (nu, nu_k) = entry_points_row(0.5, &[2.0, 1.0]);
        assert_eq!(nu, 1.25);
        assert_eq!(nu_k, vec![1.25, 0.5]);
    }

    #[test]
    fn zero_main_effect_halves() {
        let (nu, nu_k) = entry_points_row(0.0, &[1.0]);
        assert_eq!((nu, nu_k[0]), (0.5, 0.5));
        let (nu, nu_k) = entry_points_row(0.0, &[-1.0]);
        assert_eq!((nu, nu_k[0]), (0.5, 0.5));
    }

    #[test]
    fn tied_magnitudes_share_a_statistic() {
        let (_, nu_k) = entry_points_row(0.2, &[1.0, -1.0, 0.3]);
        assert_eq!(nu_k[0], nu_k[1]);
        assert_eq!(nu_k[0], 0.6);
    }

    #[test]
    fn two_feature_example() {
        let cs = ContrastSet::from_parts(vec![3.0, 0.0], &[1.0]).unwrap();
        let st = compute_test_statistics(&cs);
        assert_eq!(st.lambda_main, vec![3.0, 0.5]);
        assert_eq!(st.lambda_int_asym[[0, 1]], 1.0);
        assert_eq!(st.lambda_int_asym[[1, 0]], 0.5);
        assert_eq!(st.lambda_prime(0, 1), 1.0);
        assert_eq!(st.lambda_prime(1, 0), 1.0);
    }

    #[test]
    fn zero_interactions() {
        let cs = ContrastSet::from_parts(vec![1.0, -2.0, 0.5], &[0.0, 0.0, 0.0]).unwrap();
        let st = compute_test_statistics(&cs);
        assert_eq!(st.lambda_main, vec![1.0, 2.0, 0.5]);
        assert!(st.pair_values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_path_detection_on_grid() {
        let (w, z) = (0.7, vec![1.9, -0.4, 1.1, 0.05]);
        let (nu, nu_k) = entry_points_row(w, &z);
        let step = 1e-3;
        let top = 3.0;
        let mut seen_main = None;
        let mut seen = vec![None; z.len()];
        let mut lam = top;
        while lam > 0.0 {
            let (sol, _) = solve_row(w, &z, lam).unwrap();
            if seen_main.is_none() && (sol.beta_plus != 0.0 || sol.beta_minus != 0.0) {
                seen_main = Some(lam);
            }
            for (k, th) in sol.theta.iter().enumerate() {
                if seen[k].is_none() && *th != 0.0 {
                    seen[k] = Some(lam);
                }
            }
            lam -= step;
        }
        assert!((seen_main.unwrap() - nu).abs() <= step, "{seen_main:?} {nu}");
        for k in 0..z.len() {
            assert!((seen[k].unwrap() - nu_k[k]).abs() <= step, "{k}: {:?} {}", seen[k], nu_k[k]);
        }
    }

    #[test]
    fn ranking_is_deterministic_with_ties() {
        let cs = ContrastSet::from_parts(vec![1.0, 1.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
        let st = compute_test_statistics(&cs);
        let a = rank_effects(&st, 10);
        assert_eq!(a, rank_effects(&st, 10));
        assert_eq!(a[0].0, Effect::Main(0));
        assert_eq!(a[1].0, Effect::Main(1));
        // tie at 0: mains first, then interactions in pair order
        assert_eq!(a[2].0, Effect::Main(2));
        assert_eq!(a[3].0, Effect::Interaction(0, 1));
    }

    #[test]
    fn top_one_of_single_nonzero() {
        let cs = ContrastSet::from_parts(vec![0.0, 0.0], &[0.0]).unwrap();
        let mut st = compute_test_statistics(&cs);
        st.lambda_main[1] = 2.0;
        assert_eq!(rank_effects(&st, 1), vec![(Effect::Main(1), 2.0)]);
    }

    #[test]
    fn shrinkage_curve_at_zero_main_effect_is_half_line() {
        let grid: Vec<f64> = (0..=60).map(|i| i as f64 * 0.1).collect();
        let pts = shrinkage_curve(&[0.0], &grid, ShrinkageModel::Spiked, 50, 3).unwrap();
        // six background sds: larger than every other interaction
        let above: Vec<_> = pts.iter().filter(|p| p.z > 3.0).collect();
        assert!(!above.is_empty());
        for pt in above {
            assert_eq!(pt.lambda_hat, pt.z / 2.0);
        }
    }

    #[test]
    fn unknown_shrinkage_model() {
        assert!("uniform".parse::<ShrinkageModel>().is_err());
    }
}
