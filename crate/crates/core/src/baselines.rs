//! Non-hierarchical rankings and resampling stability.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::contrasts::{compute_all_contrasts, pairs, ContrastSet};
use crate::dataset::{Class, ClassedDataset};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::test_stats::compute_test_statistics;

/// Redraws allowed for a degenerate resample before giving up.
pub const MAX_RESAMPLE_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Method {
    Cht,
    AllPairs,
    StrongScreen,
    WeakScreen,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cht, Method::AllPairs, Method::StrongScreen, Method::WeakScreen];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cht => "cht",
            Method::AllPairs => "all-pairs",
            Method::StrongScreen => "strong-screen",
            Method::WeakScreen => "weak-screen",
        }
    }

    /// Score of every pair in lexicographic pair order. Pairs a screen drops score
    /// `-inf`. Screens use the default quantile.
    pub fn pair_scores(self, contrasts: &ContrastSet) -> Vec<f64> {
        let matrix = match self {
            Method::Cht => compute_test_statistics(contrasts).lambda_int,
            Method::AllPairs => all_pairs_stats(contrasts),
            Method::StrongScreen => screen_two_stage(contrasts, &ScreeningConfig::new(0.75, ScreenMode::Strong)).stats,
            Method::WeakScreen => screen_two_stage(contrasts, &ScreeningConfig::new(0.75, ScreenMode::Weak)).stats,
        };
        pairs(contrasts.p()).map(|(j, k)| matrix[[j, k]]).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// `|z_jk|`, zero diagonal.
pub fn all_pairs_stats(contrasts: &ContrastSet) -> Array2<f64> {
    let mut out = contrasts.z.mapv(f64::abs);
    out.diag_mut().fill(0.0);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScreenMode {
    /// Both features must pass.
    Strong,
    /// At least one feature must pass.
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScreeningConfig {
    pub quantile: f64,
    pub mode: ScreenMode,
}

impl ScreeningConfig {
    pub fn new(quantile: f64, mode: ScreenMode) -> Self {
        Self { quantile, mode }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.quantile) {
            return Err(Error::InvalidArgument(format!("quantile must be in [0, 1), got {}", self.quantile)));
        }
        Ok(())
    }
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self::new(0.75, ScreenMode::Strong)
    }
}

/// Nearest-rank quantile: the `ceil(q n)`-th smallest value, `-inf` when that rank is 0.
pub fn nearest_rank_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q * v.len() as f64).ceil() as usize;
    if rank == 0 {
        f64::NEG_INFINITY
    } else {
        v[rank.min(v.len()) - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Screened {
    pub threshold: f64,
    /// Features with `|w_j|` strictly above the threshold.
    pub passing: Vec<bool>,
    pub candidates: Vec<(usize, usize)>,
    /// `|z_jk|` on candidates, `-inf` elsewhere (including the diagonal).
    pub stats: Array2<f64>,
}

/// Keeps pairs whose features pass the `|w|` quantile screen, then ranks by `|z|`.
pub fn screen_two_stage(contrasts: &ContrastSet, config: &ScreeningConfig) -> Screened {
    let p = contrasts.p();
    let abs_w: Vec<f64> = contrasts.w.iter().map(|v| v.abs()).collect();
    let threshold = nearest_rank_quantile(&abs_w, config.quantile);
    let passing: Vec<bool> = abs_w.iter().map(|&v| v > threshold).collect();
    let mut stats = Array2::from_elem((p, p), f64::NEG_INFINITY);
    let mut candidates = Vec::new();
    for (j, k) in pairs(p) {
        let keep = match config.mode {
            ScreenMode::Strong => passing[j] && passing[k],
            ScreenMode::Weak => passing[j] || passing[k],
        };
        if keep {
            let v = contrasts.z[[j, k]].abs();
            stats[[j, k]] = v;
            stats[[k, j]] = v;
            candidates.push((j, k));
        }
    }
    Screened { threshold, passing, candidates, stats }
}

/// Indices into `scores` by score descending (ties by index), dropping `-inf`.
pub fn rank_pairs(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] != f64::NEG_INFINITY).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Top `k` pairs of a dataset under `method`.
pub fn top_pairs(dataset: &ClassedDataset, method: Method, k: usize) -> Result<Vec<(usize, usize)>> {
    let contrasts = compute_all_contrasts(dataset)?;
    let all: Vec<(usize, usize)> = pairs(dataset.p()).collect();
    Ok(rank_pairs(&method.pair_scores(&contrasts)).into_iter().take(k).map(|i| all[i]).collect())
}

fn is_degenerate(e: &Error) -> bool {
    matches!(e, Error::DegenerateFeature { .. } | Error::ConstantInteraction { .. } | Error::ZeroPooledSd)
}

/// Runs `attempt` until it yields a non-degenerate result or the retry cap is hit.
fn with_retries<T>(mut attempt: impl FnMut() -> Result<T>) -> Result<T> {
    for _ in 0..=MAX_RESAMPLE_RETRIES {
        match attempt() {
            Err(e) if is_degenerate(&e) => continue,
            other => return other,
        }
    }
    Err(Error::ResampleRetries(MAX_RESAMPLE_RETRIES))
}

/// Row indices of class one and class two.
pub fn rows_by_class(dataset: &ClassedDataset) -> [Vec<usize>; 2] {
    [dataset.class_rows(Class::One).collect(), dataset.class_rows(Class::Two).collect()]
}

/// Bootstrap draw of row indices that keeps each class's size.
pub fn stratified_bootstrap<R: Rng + ?Sized>(by_class: &[Vec<usize>; 2], rng: &mut R) -> Vec<usize> {
    by_class
        .iter()
        .flat_map(|members| (0..members.len()).map(|_| *members.choose(rng).expect("class nonempty")).collect::<Vec<_>>())
        .collect()
}

/// Disjoint halves, each class split as evenly as possible; an odd class puts the
/// extra row in either half at random. Indices come back sorted.
pub fn stratified_halves<R: Rng + ?Sized>(by_class: &[Vec<usize>; 2], rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for members in by_class {
        let mut shuffled = members.clone();
        shuffled.shuffle(rng);
        let cut = if rng.random::<bool>() { shuffled.len() / 2 } else { shuffled.len().div_ceil(2) };
        a.extend_from_slice(&shuffled[..cut]);
        b.extend_from_slice(&shuffled[cut..]);
    }
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFrequency {
    pub j: usize,
    pub k: usize,
    pub frequency: f64,
}

/// Fraction of class-stratified bootstrap samples in which each pair makes the top `k`.
/// Sorted by frequency descending, then by pair.
pub fn bootstrap_topk_frequency(
    dataset: &ClassedDataset,
    method: Method,
    k: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<PairFrequency>> {
    if k == 0 || replicates == 0 {
        return Err(Error::InvalidArgument("top-k and replicate count must be positive".into()));
    }
    let by_class = rows_by_class(dataset);
    let tops: Vec<Vec<(usize, usize)>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b as u64);
            with_retries(|| top_pairs(&dataset.select_rows(&stratified_bootstrap(&by_class, &mut rng))?, method, k))
        })
        .collect::<Result<_>>()?;

    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for top in &tops {
        for &pair in top {
            *counts.entry(pair).or_default() += 1;
        }
    }
    let mut out: Vec<PairFrequency> = counts
        .into_iter()
        .map(|((j, k), c)| PairFrequency { j, k, frequency: c as f64 / replicates as f64 })
        .collect();
    out.sort_by(|a, b| b.frequency.total_cmp(&a.frequency).then((a.j, a.k).cmp(&(b.j, b.k))));
    Ok(out)
}

/// `|top_k(A) ∩ top_k(B)| / k` for `k = 1..=k_max` on two given halves.
pub fn split_overlap(
    half_a: &ClassedDataset,
    half_b: &ClassedDataset,
    method: Method,
    k_max: usize,
) -> Result<Vec<f64>> {
    let a = top_pairs(half_a, method, k_max)?;
    let b = top_pairs(half_b, method, k_max)?;
    Ok(prefix_overlap(&a, &b, k_max))
}

fn prefix_overlap(a: &[(usize, usize)], b: &[(usize, usize)], k_max: usize) -> Vec<f64> {
    use std::collections::HashSet;
    let (mut seen_a, mut seen_b) = (HashSet::new(), HashSet::new());
    let mut common = 0usize;
    let mut out = Vec::with_capacity(k_max);
    for k in 0..k_max {
        if let Some(&x) = a.get(k) {
            if seen_b.contains(&x) {
                common += 1;
            }
            seen_a.insert(x);
        }
        if let Some(&y) = b.get(k) {
            if seen_a.contains(&y) {
                common += 1;
            }
            seen_b.insert(y);
        }
        out.push(common as f64 / (k + 1) as f64);
    }
    out
}

/// Mean overlap of top-`k` lists from random class-stratified halves, `k = 1..=k_max`.
pub fn split_half_overlap(
    dataset: &ClassedDataset,
    method: Method,
    k_max: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if k_max == 0 || reps == 0 {
        return Err(Error::InvalidArgument("k_max and repetition count must be positive".into()));
    }
    let npairs = dataset.p() * (dataset.p() - 1) / 2;
    if k_max > npairs {
        return Err(Error::InvalidArgument(format!("k_max {k_max} exceeds the {npairs} pairs")));
    }
    let by_class = rows_by_class(dataset);
    if by_class.iter().any(|c| c.len() < 4) {
        return Err(Error::InvalidArgument("each class needs at least 4 rows to split".into()));
    }
    let curves: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            with_retries(|| {
                let (a, b) = stratified_halves(&by_class, &mut rng);
                split_overlap(&dataset.select_rows(&a)?, &dataset.select_rows(&b)?, method, k_max)
            })
        })
        .collect::<Result<_>>()?;

    let mut mean = vec![0.0; k_max];
    for c in &curves {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= reps as f64);
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_features() -> ContrastSet {
        ContrastSet::from_parts(vec![4.0, -3.0, 2.0, 1.0], &[0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap()
    }

    #[test]
    fn nearest_rank() {
        assert_eq!(nearest_rank_quantile(&[4.0, 3.0, 2.0, 1.0], 0.75), 3.0);
        assert_eq!(nearest_rank_quantile(&[4.0, 3.0, 2.0, 1.0], 0.5), 2.0);
        assert_eq!(nearest_rank_quantile(&[4.0, 3.0, 2.0, 1.0], 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn strong_and_weak_screens() {
        let cs = four_features();
        // threshold 3: only feature 0 passes
        let strong = screen_two_stage(&cs, &ScreeningConfig::new(0.75, ScreenMode::Strong));
        assert!(strong.candidates.is_empty());
        let weak = screen_two_stage(&cs, &ScreeningConfig::new(0.75, ScreenMode::Weak));
        assert_eq!(weak.candidates, vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(weak.stats[[0, 2]], 0.2);
        assert_eq!(weak.stats[[1, 2]], f64::NEG_INFINITY);

        let strong = screen_two_stage(&cs, &ScreeningConfig::new(0.5, ScreenMode::Strong));
        assert_eq!(strong.candidates, vec![(0, 1)]);
    }

    #[test]
    fn zero_quantile_keeps_everything() {
        let cs = four_features();
        for mode in [ScreenMode::Strong, ScreenMode::Weak] {
            let s = screen_two_stage(&cs, &ScreeningConfig::new(0.0, mode));
            assert_eq!(s.candidates.len(), 6);
        }
    }

    #[test]
    fn quantile_range_checked() {
        assert!(ScreeningConfig::new(1.0, ScreenMode::Weak).validate().is_err());
        assert!(ScreeningConfig::new(-0.1, ScreenMode::Weak).validate().is_err());
        assert!(ScreeningConfig::new(0.75, ScreenMode::Weak).validate().is_ok());
    }

    #[test]
    fn all_pairs_are_absolute_values() {
        let cs = four_features();
        let s = all_pairs_stats(&cs);
        assert_eq!(s[[3, 2]], 0.6);
        assert_eq!(s[[1, 1]], 0.0);
        let order = rank_pairs(&Method::AllPairs.pair_scores(&cs));
        assert_eq!(order, vec![5, 4, 3, 2, 1, 0]);
    }

    #[test]
    fn rank_drops_screened_pairs() {
        assert_eq!(rank_pairs(&[1.0, f64::NEG_INFINITY, 1.0, 2.0]), vec![3, 0, 2]);
    }

    #[test]
    fn prefix_overlap_counts() {
        let a = [(0, 1), (0, 2), (1, 2)];
        let b = [(0, 2), (0, 1), (2, 3)];
        assert_eq!(prefix_overlap(&a, &b, 3), vec![0.0, 1.0, 2.0 / 3.0]);
        assert_eq!(prefix_overlap(&a, &a, 3), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lasso".parse::<Method>().is_err());
    }
}
