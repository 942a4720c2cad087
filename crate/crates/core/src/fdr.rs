//! Permutation estimate of the false discovery rate of the interaction statistics.
//!
//! Each permutation regroups the per-observation cross products (standardized with
//! the original class moments), recomputes every `z*_jk`, and rebuilds the
//! statistics with the original `w`. Null exceedances are pooled over all pairs.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::contrasts::{compute_moments, ClassMoments, ContrastMode, ContrastOptions, ContrastSet, PairObservations};
use crate::dataset::{Class, ClassedDataset};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::test_stats::compute_test_statistics;

#[derive(Debug, Clone, PartialEq)]
pub struct FdrOptions {
    pub permutations: usize,
    pub seed: u64,
    /// Thresholds to evaluate, sorted descending. `None` uses the distinct observed
    /// statistics.
    pub lambda_grid: Option<Vec<f64>>,
    pub contrast: ContrastOptions,
}

impl Default for FdrOptions {
    fn default() -> Self {
        Self { permutations: 100, seed: 1, lambda_grid: None, contrast: ContrastOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdrCurve {
    pub lambda_grid: Vec<f64>,
    /// `#{(j,k): lambda'_jk > lambda}`.
    pub observed_exceed: Vec<u64>,
    /// Null exceedances summed over permutations and pairs.
    pub null_exceed_total: Vec<u64>,
    pub null_exceed_mean: Vec<f64>,
    pub fdr_hat: Vec<f64>,
    pub permutations: usize,
    pub seed: u64,
}

/// `null_mean / observed`, with `0/0 = 0` and the result clipped to `[0, 1]`.
pub fn fdr_ratio(null_mean: f64, observed: u64) -> f64 {
    if observed == 0 {
        return if null_mean > 0.0 { 1.0 } else { 0.0 };
    }
    (null_mean / observed as f64).clamp(0.0, 1.0)
}

/// `z*` for labels `y_star`, keeping the cross products from the original moments.
pub fn permuted_interaction_contrasts(
    dataset: &ClassedDataset,
    moments: &ClassMoments,
    y_star: &[Class],
) -> Result<Array2<f64>> {
    check_permutation(dataset.y(), y_star)?;
    PairObservations::new(dataset, moments).interaction_matrix(y_star)
}

fn check_permutation(y: &[Class], y_star: &[Class]) -> Result<()> {
    let ones = |v: &[Class]| v.iter().filter(|&&c| c == Class::One).count();
    if y.len() != y_star.len() || ones(y) != ones(y_star) {
        return Err(Error::InvalidArgument("permuted labels must have the original class counts".into()));
    }
    Ok(())
}

/// Number of entries of the ascending slice `sorted` that are strictly above `t`.
fn count_above(sorted: &[f64], t: f64) -> u64 {
    (sorted.len() - sorted.partition_point(|&v| v <= t)) as u64
}

fn sorted_ascending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Sorted `lambda'*` values of every permutation, in permutation order.
pub fn permutation_null(
    dataset: &ClassedDataset,
    contrasts: &ContrastSet,
    permutations: usize,
    seed: u64,
    contrast: ContrastOptions,
) -> Result<Vec<Vec<f64>>> {
    let moments = compute_moments(dataset)?;
    let mut obs = PairObservations::new(dataset, &moments);
    if contrast.mode == ContrastMode::Materialized {
        obs.materialize(contrast.cache_budget_bytes);
    }
    (0..permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b as u64);
            let mut y_star = dataset.y().to_vec();
            y_star.shuffle(&mut rng);
            let z = obs.interaction_matrix(&y_star)?;
            let permuted = ContrastSet { w: contrasts.w.clone(), z };
            Ok(sorted_ascending(compute_test_statistics(&permuted).pair_values()))
        })
        .collect()
}

pub fn estimate_fdr(dataset: &ClassedDataset, contrasts: &ContrastSet, options: &FdrOptions) -> Result<FdrCurve> {
    if options.permutations == 0 {
        return Err(Error::InvalidArgument("need at least one permutation".into()));
    }
    let observed = sorted_ascending(compute_test_statistics(contrasts).pair_values());
    let grid = match &options.lambda_grid {
        Some(g) => {
            if g.windows(2).any(|w| w[0] < w[1]) || g.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidArgument("lambda grid must be sorted descending".into()));
            }
            g.clone()
        }
        None => {
            let mut g: Vec<f64> = observed.iter().rev().copied().collect();
            g.dedup();
            g
        }
    };
    let null = permutation_null(dataset, contrasts, options.permutations, options.seed, options.contrast)?;
    Ok(curve_from_counts(&grid, &observed, &null, options.seed))
}

/// Assembles an [`FdrCurve`] from sorted observed and per-permutation null statistics.
pub fn curve_from_counts(grid: &[f64], observed: &[f64], null: &[Vec<f64>], seed: u64) -> FdrCurve {
    let b = null.len();
    let mut curve = FdrCurve {
        lambda_grid: grid.to_vec(),
        observed_exceed: Vec::with_capacity(grid.len()),
        null_exceed_total: Vec::with_capacity(grid.len()),
        null_exceed_mean: Vec::with_capacity(grid.len()),
        fdr_hat: Vec::with_capacity(grid.len()),
        permutations: b,
        seed,
    };
    for &lam in grid {
        let obs = count_above(observed, lam);
        let total: u64 = null.iter().map(|perm| count_above(perm, lam)).sum();
        let mean = total as f64 / b as f64;
        curve.observed_exceed.push(obs);
        curve.null_exceed_total.push(total);
        curve.null_exceed_mean.push(mean);
        curve.fdr_hat.push(fdr_ratio(mean, obs));
    }
    curve
}
