//! Main-effect and interaction contrasts.
//!
//! `w_j` is the pooled two-sample t-statistic of feature `j`. For a pair `(j, k)`
//! every observation contributes the class-standardized cross product
//! `z_i = (x_ij - mean_j) (x_ik - mean_k) / (sd_j sd_k)` (class-specific means and
//! standard deviations), and `z_jk` is the pooled two-sample t-statistic of those
//! values.

use std::borrow::Cow;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Class, ClassedDataset};
use crate::error::{Error, Result};

/// Relative size below which a standard deviation counts as zero.
const SD_EPS: f64 = 1e-13;

/// Per-class means and standard deviations, and pooled standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMoments {
    /// `mean[c][j]` for class index `c`.
    pub mean: [Vec<f64>; 2],
    /// Within-class sd, denominator `n_c - 1`.
    pub sd: [Vec<f64>; 2],
    /// Pooled sd, denominator `n1 + n2 - 2`.
    pub pooled_sd: Vec<f64>,
}

/// Contrasts for all features and pairs. `z` is symmetric; its diagonal is unused (0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastSet {
    pub w: Vec<f64>,
    pub z: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContrastMode {
    /// One pair at a time; memory is `O(N p)`.
    #[default]
    Streamed,
    /// Cache every pair's per-observation values when they fit the byte budget.
    Materialized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContrastOptions {
    pub mode: ContrastMode,
    pub cache_budget_bytes: usize,
}

impl Default for ContrastOptions {
    fn default() -> Self {
        Self { mode: ContrastMode::Streamed, cache_budget_bytes: 256 << 20 }
    }
}

impl ContrastSet {
    pub fn p(&self) -> usize {
        self.w.len()
    }

    /// Unordered pairs `(j, k)`, `j < k`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        pairs(self.p())
    }

    /// Row `j` of `z` without the diagonal entry.
    pub fn row(&self, j: usize) -> Vec<f64> {
        (0..self.p()).filter(|&k| k != j).map(|k| self.z[[j, k]]).collect()
    }

    /// Builds a contrast set from `w` and the upper triangle of `z`.
    pub fn from_parts(w: Vec<f64>, upper: &[f64]) -> Result<Self> {
        let p = w.len();
        if upper.len() != p * (p.saturating_sub(1)) / 2 {
            return Err(Error::InvalidArgument(format!("{} interaction values for p = {p}", upper.len())));
        }
        let mut z = Array2::zeros((p, p));
        for ((j, k), &v) in pairs(p).zip(upper) {
            z[[j, k]] = v;
            z[[k, j]] = v;
        }
        Ok(Self { w, z })
    }
}

pub fn pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |j| (j + 1..p).map(move |k| (j, k)))
}

fn is_constant(values: impl Iterator<Item = f64>) -> bool {
    let mut it = values;
    match it.next() {
        Some(first) => it.all(|v| v == first),
        None => true,
    }
}

pub fn compute_moments(dataset: &ClassedDataset) -> Result<ClassMoments> {
    let p = dataset.p();
    let mut mean = [vec![0.0; p], vec![0.0; p]];
    let mut sd = [vec![0.0; p], vec![0.0; p]];
    let mut ss = [vec![0.0; p], vec![0.0; p]];
    for class in [Class::One, Class::Two] {
        let c = class.index();
        let n = dataset.class_count(class) as f64;
        for j in 0..p {
            let col = dataset.feature(j);
            let vals = || dataset.class_rows(class).map(|i| col[i]);
            let scale = vals().fold(0.0_f64, |m, v| m.max(v.abs()));
            let m = vals().sum::<f64>() / n;
            let s2 = vals().map(|v| (v - m) * (v - m)).sum::<f64>();
            let s = (s2 / (n - 1.0)).sqrt();
            if is_constant(vals()) || s <= SD_EPS * scale {
                return Err(Error::DegenerateFeature { feature: j, class });
            }
            mean[c][j] = m;
            ss[c][j] = s2;
            sd[c][j] = s;
        }
    }
    let df = (dataset.n() - 2) as f64;
    let pooled_sd = (0..p).map(|j| ((ss[0][j] + ss[1][j]) / df).sqrt()).collect();
    Ok(ClassMoments { mean, sd, pooled_sd })
}

fn inv_root_n(n1: usize, n2: usize) -> f64 {
    (1.0 / n1 as f64 + 1.0 / n2 as f64).sqrt()
}

pub fn main_contrast(dataset: &ClassedDataset, moments: &ClassMoments, j: usize) -> f64 {
    (moments.mean[0][j] - moments.mean[1][j]) / (moments.pooled_sd[j] * inv_root_n(dataset.n1(), dataset.n2()))
}

/// Pooled two-sample t-statistic (class 1 minus class 2). `None` when the pooled
/// sd vanishes.
fn two_sample_t(values: &[f64], y: &[Class]) -> Option<f64> {
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    let mut scale = 0.0_f64;
    for (&v, c) in values.iter().zip(y) {
        sum[c.index()] += v;
        count[c.index()] += 1;
        scale = scale.max(v.abs());
    }
    let m = [sum[0] / count[0] as f64, sum[1] / count[1] as f64];
    let mut ss = [0.0; 2];
    for (&v, c) in values.iter().zip(y) {
        let d = v - m[c.index()];
        ss[c.index()] += d * d;
    }
    let sd = ((ss[0] + ss[1]) / (values.len() - 2) as f64).sqrt();
    if sd <= SD_EPS * scale || sd == 0.0 {
        return None;
    }
    Some((m[0] - m[1]) / (sd * inv_root_n(count[0], count[1])))
}

/// Per-observation standardized cross products `z_{i,jk}` for one pair.
pub fn interaction_observations(
    dataset: &ClassedDataset,
    moments: &ClassMoments,
    j: usize,
    k: usize,
) -> Result<Vec<f64>> {
    if j == k {
        return Err(Error::InvalidArgument(format!("interaction needs two distinct features, got ({j}, {k})")));
    }
    Ok(PairObservations::new(dataset, moments).pair_values(j, k).into_owned())
}

/// Two-sample t-statistic of interaction observations under labels `y`.
pub fn interaction_contrast(z_obs: &[f64], y: &[Class]) -> Result<f64> {
    if z_obs.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} values for {} labels", z_obs.len(), y.len())));
    }
    for class in [Class::One, Class::Two] {
        let count = y.iter().filter(|&&c| c == class).count();
        if count < 2 {
            return Err(Error::ClassTooSmall { class, count });
        }
    }
    two_sample_t(z_obs, y).ok_or(Error::ZeroPooledSd)
}

/// Standardized features, held feature-major so each pair is a product of two
/// contiguous rows. Optionally caches every pair's products.
#[derive(Debug, Clone)]
pub struct PairObservations {
    /// `p x N`, `u[j][i] = (x_ij - mean_{j,c}) / sd_{j,c}`.
    u: Array2<f64>,
    cache: Option<Array2<f64>>,
}

impl PairObservations {
    pub fn new(dataset: &ClassedDataset, moments: &ClassMoments) -> Self {
        let (n, p) = (dataset.n(), dataset.p());
        let y = dataset.y();
        let x = dataset.x();
        let u = Array2::from_shape_fn((p, n), |(j, i)| {
            let c = y[i].index();
            (x[[i, j]] - moments.mean[c][j]) / moments.sd[c][j]
        });
        Self { u, cache: None }
    }

    /// Materializes all pairs when `n * p(p-1)/2` doubles fit in `budget_bytes`.
    /// Returns whether the cache was built.
    pub fn materialize(&mut self, budget_bytes: usize) -> bool {
        let (p, n) = self.u.dim();
        let npairs = p * (p - 1) / 2;
        let bytes = npairs.saturating_mul(n).saturating_mul(std::mem::size_of::<f64>());
        if bytes > budget_bytes {
            return false;
        }
        let mut cache = Array2::zeros((npairs, n));
        for (row, (j, k)) in cache.rows_mut().into_iter().zip(pairs(p)) {
            let vals = self.compute(j, k);
            row.into_iter().zip(vals).for_each(|(dst, v)| *dst = v);
        }
        self.cache = Some(cache);
        true
    }

    pub fn is_materialized(&self) -> bool {
        self.cache.is_some()
    }

    pub fn p(&self) -> usize {
        self.u.nrows()
    }

    fn compute(&self, j: usize, k: usize) -> Vec<f64> {
        let (a, b) = (self.u.row(j), self.u.row(k));
        a.iter().zip(b.iter()).map(|(x, y)| x * y).collect()
    }

    fn pair_index(&self, j: usize, k: usize) -> usize {
        let (j, k) = if j < k { (j, k) } else { (k, j) };
        let p = self.p();
        j * (2 * p - j - 1) / 2 + (k - j - 1)
    }

    pub fn pair_values(&self, j: usize, k: usize) -> Cow<'_, [f64]> {
        match &self.cache {
            Some(cache) => {
                let row = cache.row(self.pair_index(j, k));
                Cow::Borrowed(row.to_slice().expect("cache rows are contiguous"))
            }
            None => Cow::Owned(self.compute(j, k)),
        }
    }

    /// Interaction t-statistics for every pair when observations are grouped by `y`.
    /// Pairs are evaluated in parallel; the output is assembled in pair order.
    pub fn interaction_matrix(&self, y: &[Class]) -> Result<Array2<f64>> {
        let p = self.p();
        let all: Vec<(usize, usize)> = pairs(p).collect();
        let values: Vec<Result<f64>> = all
            .par_iter()
            .map(|&(j, k)| two_sample_t(&self.pair_values(j, k), y).ok_or(Error::ConstantInteraction { j, k }))
            .collect();
        let mut z = Array2::zeros((p, p));
        for (&(j, k), v) in all.iter().zip(values) {
            let v = v?;
            z[[j, k]] = v;
            z[[k, j]] = v;
        }
        Ok(z)
    }
}

pub fn compute_all_contrasts(dataset: &ClassedDataset) -> Result<ContrastSet> {
    compute_all_contrasts_with(dataset, ContrastOptions::default())
}

pub fn compute_all_contrasts_with(dataset: &ClassedDataset, options: ContrastOptions) -> Result<ContrastSet> {
    let moments = compute_moments(dataset)?;
    let w = (0..dataset.p()).map(|j| main_contrast(dataset, &moments, j)).collect();
    let mut obs = PairObservations::new(dataset, &moments);
    if options.mode == ContrastMode::Materialized {
        obs.materialize(options.cache_budget_bytes);
    }
    let z = obs.interaction_matrix(dataset.y())?;
    Ok(ContrastSet { w, z })
}
