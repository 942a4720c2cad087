//! Two-class Gaussian scenarios with planted main effects and interactions, and the
//! FDP, power and FDR-calibration experiments run on them.
//!
//! Class 1 has mean `+delta/2` and class 2 mean `-delta/2` on the main-effect
//! features. A planted interaction `(j, k)` is a correlation of `+rho/2` in class 1
//! and `-rho/2` in class 2; all other covariance entries are those of the identity.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{rank_pairs, Method};
use crate::contrasts::{compute_all_contrasts, pairs};
use crate::dataset::{Class, ClassedDataset};
use crate::error::{Error, Result};
use crate::fdr::{curve_from_counts, permutation_null};
use crate::rng::{derive_seed, substream};
use crate::test_stats::compute_test_statistics;

/// Hubs carrying the interactions in the anti-hierarchical scenario.
const ANTI_HUBS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// Every interaction touches a main-effect feature.
    Hierarchical,
    /// Interactions only, placed at random.
    NoMainEffects,
    /// Interactions only among features without main effects.
    AntiHierarchical,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Hierarchical, Scenario::NoMainEffects, Scenario::AntiHierarchical];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Hierarchical => "hierarchical",
            Scenario::NoMainEffects => "no-main-effects",
            Scenario::AntiHierarchical => "anti-hierarchical",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario `{s}`")))
    }
}

/// Default mean shift on main-effect features.
pub const DEFAULT_DELTA: f64 = 1.0;
/// Default between-class correlation difference on planted pairs.
pub const DEFAULT_RHO: f64 = 0.5;
/// Power experiment defaults. The weaker setting keeps both methods off the
/// ceiling at n = 500.
pub const POWER_DELTA: f64 = 0.7;
pub const POWER_RHO: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    pub n_main: usize,
    pub ints_per_main: usize,
    /// `delta`, in within-class sd units.
    pub main_effect_size: f64,
    /// `rho`: class 1 correlation minus class 2 correlation on planted pairs.
    pub interaction_strength: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Hierarchical,
            n: 200,
            p: 50,
            n_main: 5,
            ints_per_main: 9,
            main_effect_size: DEFAULT_DELTA,
            interaction_strength: DEFAULT_RHO,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn n_interactions(&self) -> usize {
        self.n_main * self.ints_per_main
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n < 4 {
            return bad(format!("need at least 4 observations, got {}", self.n));
        }
        if self.p < 2 {
            return Err(Error::TooFewFeatures(self.p));
        }
        if !(self.main_effect_size.is_finite() && self.interaction_strength.is_finite()) {
            return bad("effect sizes must be finite".into());
        }
        let rest = self.p.saturating_sub(self.n_main);
        let ok = match self.scenario {
            Scenario::Hierarchical => self.n_main <= self.p && (self.ints_per_main == 0 || rest >= self.ints_per_main),
            Scenario::AntiHierarchical => {
                self.n_main <= self.p
                    && (self.n_interactions() == 0
                        || (rest > ANTI_HUBS && self.n_interactions() <= ANTI_HUBS * (rest - ANTI_HUBS)))
            }
            Scenario::NoMainEffects => self.n_interactions() <= self.p * (self.p - 1) / 2,
        };
        if !ok {
            return bad(format!("p = {} too small for the requested {} design", self.p, self.scenario));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundTruth {
    /// Sorted.
    pub true_main: Vec<usize>,
    /// Sorted pairs with `j < k`.
    pub true_interaction: Vec<(usize, usize)>,
}

impl GroundTruth {
    pub fn is_true_pair(&self, j: usize, k: usize) -> bool {
        let key = if j < k { (j, k) } else { (k, j) };
        self.true_interaction.binary_search(&key).is_ok()
    }

    /// Truth flag of every pair in lexicographic pair order.
    pub fn pair_flags(&self, p: usize) -> Vec<bool> {
        pairs(p).map(|(j, k)| self.is_true_pair(j, k)).collect()
    }
}

fn ordered(j: usize, k: usize) -> (usize, usize) {
    if j < k {
        (j, k)
    } else {
        (k, j)
    }
}

/// Picks `count` partners from `candidates`, preferring those with the fewest
/// interactions so far; ties are broken at random.
fn pick_partners(candidates: &[usize], degree: &[usize], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut c = candidates.to_vec();
    c.shuffle(rng);
    c.sort_by_key(|&f| degree[f]);
    c.truncate(count);
    c
}

/// Draws the planted main effects and interaction pairs.
pub fn generate_truth(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<GroundTruth> {
    config.validate()?;
    let p = config.p;
    let features: Vec<usize> = (0..p).collect();
    let mut degree = vec![0usize; p];
    let mut ints = Vec::with_capacity(config.n_interactions());

    let mut mains: Vec<usize> = features.choose_multiple(rng, config.n_main).copied().collect();
    let non_main: Vec<usize> = features.iter().copied().filter(|f| !mains.contains(f)).collect();

    match config.scenario {
        Scenario::Hierarchical => {
            for &m in &mains {
                for partner in pick_partners(&non_main, &degree, config.ints_per_main, rng) {
                    degree[partner] += 1;
                    degree[m] += 1;
                    ints.push(ordered(m, partner));
                }
            }
        }
        Scenario::AntiHierarchical => {
            let hubs: Vec<usize> = non_main.choose_multiple(rng, ANTI_HUBS.min(non_main.len())).copied().collect();
            let spokes: Vec<usize> = non_main.iter().copied().filter(|f| !hubs.contains(f)).collect();
            let total = config.n_interactions();
            for (i, &h) in hubs.iter().enumerate() {
                // spread the total over the hubs as evenly as possible
                let share = total / hubs.len() + usize::from(i < total % hubs.len());
                for partner in pick_partners(&spokes, &degree, share, rng) {
                    degree[partner] += 1;
                    degree[h] += 1;
                    ints.push(ordered(h, partner));
                }
            }
        }
        Scenario::NoMainEffects => {
            mains.clear();
            let total = config.n_interactions();
            let cap = (2 * total).div_ceil(p) + 1;
            let mut all: Vec<(usize, usize)> = pairs(p).collect();
            all.shuffle(rng);
            for (j, k) in all {
                if ints.len() == total {
                    break;
                }
                if degree[j] < cap && degree[k] < cap {
                    degree[j] += 1;
                    degree[k] += 1;
                    ints.push((j, k));
                }
            }
            if ints.len() < total {
                return Err(Error::InvalidArgument(format!("could not place {total} interactions among {p} features")));
            }
        }
    }
    mains.sort_unstable();
    ints.sort_unstable();
    Ok(GroundTruth { true_main: mains, true_interaction: ints })
}

/// Lower Cholesky factor of a class covariance, or an error if it is not
/// positive definite.
fn class_factor(config: &ScenarioConfig, truth: &GroundTruth, class: Class) -> Result<DMatrix<f64>> {
    let sign = if class == Class::One { 1.0 } else { -1.0 };
    let half = sign * config.interaction_strength / 2.0;
    let mut cov = DMatrix::<f64>::identity(config.p, config.p);
    for &(j, k) in &truth.true_interaction {
        cov[(j, k)] = half;
        cov[(k, j)] = half;
    }
    cov.cholesky()
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite { class, rho: config.interaction_strength })
}

/// Draws a dataset for a fixed truth. Class 1 takes the first `ceil(n/2)` rows.
pub fn generate_from_truth(config: &ScenarioConfig, truth: &GroundTruth, rng: &mut ChaCha8Rng) -> Result<ClassedDataset> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let n1 = n.div_ceil(2);
    let factors = [class_factor(config, truth, Class::One)?, class_factor(config, truth, Class::Two)?];
    let mut x = Array2::zeros((n, p));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = if i < n1 { Class::One } else { Class::Two };
        let shift = if class == Class::One { 0.5 } else { -0.5 } * config.main_effect_size;
        let e = DVector::<f64>::from_fn(p, |_, _| rng.sample(StandardNormal));
        let v = &factors[class.index()] * e;
        for j in 0..p {
            x[[i, j]] = v[j];
        }
        for &j in &truth.true_main {
            x[[i, j]] += shift;
        }
        y.push(class);
    }
    ClassedDataset::new(x, y, None)
}

/// Truth and data from `config.seed`.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<(ClassedDataset, GroundTruth)> {
    let mut rng = substream(config.seed, 0);
    let truth = generate_truth(config, &mut rng)?;
    let data = generate_from_truth(config, &truth, &mut rng)?;
    Ok((data, truth))
}

/// Configuration of replication `rep` of an experiment seeded by `config.seed`.
pub fn replicate_config(config: &ScenarioConfig, rep: usize) -> ScenarioConfig {
    ScenarioConfig { seed: derive_seed(config.seed, rep as u64), ..config.clone() }
}

/// True FDP of the top `r` pairs, `r = 1..=max_rank`. When a method ranks fewer
/// than `r` pairs, its last value carries forward (0 if it ranks none).
pub fn fdp_curve(order: &[usize], is_true: &[bool], max_rank: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_rank);
    let mut false_hits = 0usize;
    let mut last = 0.0;
    for r in 1..=max_rank {
        if let Some(&i) = order.get(r - 1) {
            false_hits += usize::from(!is_true[i]);
            last = false_hits as f64 / r as f64;
        }
        out.push(last);
    }
    out
}

/// True positives in the largest top-`r` set whose true FDP is at most `level`.
pub fn true_positives_at_fdp(order: &[usize], is_true: &[bool], level: f64) -> usize {
    let (mut tp, mut best) = (0usize, 0usize);
    for (r, &i) in order.iter().enumerate() {
        tp += usize::from(is_true[i]);
        let fdp = (r + 1 - tp) as f64 / (r + 1) as f64;
        if fdp <= level {
            best = tp;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdpCurves {
    pub scenario: Scenario,
    pub reps: usize,
    /// `(method, mean FDP at rank r = 1..=max_rank)`.
    pub curves: Vec<(Method, Vec<f64>)>,
}

/// Mean true FDP of each method's top-`r` list over `reps` replications.
pub fn run_fdr_experiment(config: &ScenarioConfig, methods: &[Method], reps: usize, max_rank: usize) -> Result<FdpCurves> {
    if reps == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    let per_rep: Vec<Vec<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let (data, truth) = generate_scenario(&replicate_config(config, rep))?;
            let contrasts = compute_all_contrasts(&data)?;
            let flags = truth.pair_flags(config.p);
            Ok(methods.iter().map(|m| fdp_curve(&rank_pairs(&m.pair_scores(&contrasts)), &flags, max_rank)).collect())
        })
        .collect::<Result<_>>()?;

    let curves = methods
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let mut mean = vec![0.0; max_rank];
            for rep in &per_rep {
                mean.iter_mut().zip(&rep[mi]).for_each(|(a, v)| *a += v);
            }
            mean.iter_mut().for_each(|a| *a /= reps as f64);
            (m, mean)
        })
        .collect();
    Ok(FdpCurves { scenario: config.scenario, reps, curves })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub n: usize,
    pub delta: f64,
    pub method: Method,
    pub mean_true_positives: f64,
    pub reps: usize,
}

/// Mean true positives at true FDP `<= fdp_level` over a grid of sample sizes and
/// main-effect sizes. Rows come out in `(n, delta, method)` order.
pub fn run_power_experiment(
    config: &ScenarioConfig,
    ns: &[usize],
    deltas: &[f64],
    methods: &[Method],
    reps: usize,
    fdp_level: f64,
) -> Result<Vec<PowerRow>> {
    if reps == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    let mut rows = Vec::new();
    for &n in ns {
        for &delta in deltas {
            let cell = ScenarioConfig { n, main_effect_size: delta, ..config.clone() };
            let per_rep: Vec<Vec<usize>> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let (data, truth) = generate_scenario(&replicate_config(&cell, rep))?;
                    let contrasts = compute_all_contrasts(&data)?;
                    let flags = truth.pair_flags(cell.p);
                    Ok(methods
                        .iter()
                        .map(|m| true_positives_at_fdp(&rank_pairs(&m.pair_scores(&contrasts)), &flags, fdp_level))
                        .collect())
                })
                .collect::<Result<_>>()?;
            for (mi, &method) in methods.iter().enumerate() {
                let total: usize = per_rep.iter().map(|r| r[mi]).sum();
                rows.push(PowerRow { n, delta, method, mean_true_positives: total as f64 / reps as f64, reps });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdrCalibration {
    pub reps: usize,
    pub permutations: usize,
    /// Rejection-set sizes `r = 1..=max_rank`.
    pub ranks: Vec<usize>,
    pub mean_true_fdp: Vec<f64>,
    pub mean_estimated_fdr: Vec<f64>,
}

/// Permutation FDR estimate against the true FDP of the CHT rejection sets.
/// Rank `r` uses the threshold at the `(r+1)`-th largest statistic, i.e. the set
/// of the `r` largest.
pub fn run_fdr_calibration(
    config: &ScenarioConfig,
    permutations: usize,
    reps: usize,
    max_rank: usize,
) -> Result<FdrCalibration> {
    if reps == 0 || permutations == 0 {
        return Err(Error::InvalidArgument("need at least one replication and permutation".into()));
    }
    let npairs = config.p * (config.p - 1) / 2;
    if max_rank >= npairs {
        return Err(Error::InvalidArgument(format!("max rank must be below the {npairs} pairs")));
    }
    let per_rep: Vec<(Vec<f64>, Vec<f64>)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let cfg = replicate_config(config, rep);
            let (data, truth) = generate_scenario(&cfg)?;
            let contrasts = compute_all_contrasts(&data)?;
            let stats = compute_test_statistics(&contrasts).pair_values();
            let flags = truth.pair_flags(config.p);
            let order = rank_pairs(&stats);
            let grid: Vec<f64> = (1..=max_rank).map(|r| stats[order[r]]).collect();

            let true_fdp = grid
                .iter()
                .map(|&lam| {
                    let (mut hits, mut false_hits) = (0usize, 0usize);
                    for (i, &s) in stats.iter().enumerate() {
                        if s > lam {
                            hits += 1;
                            false_hits += usize::from(!flags[i]);
                        }
                    }
                    if hits == 0 {
                        0.0
                    } else {
                        false_hits as f64 / hits as f64
                    }
                })
                .collect();

            let mut observed = stats.clone();
            observed.sort_by(f64::total_cmp);
            let null = permutation_null(&data, &contrasts, permutations, derive_seed(cfg.seed, 1), Default::default())?;
            let curve = curve_from_counts(&grid, &observed, &null, cfg.seed);
            Ok((true_fdp, curve.fdr_hat))
        })
        .collect::<Result<_>>()?;

    let mut mean_true_fdp = vec![0.0; max_rank];
    let mut mean_estimated_fdr = vec![0.0; max_rank];
    for (t, e) in &per_rep {
        mean_true_fdp.iter_mut().zip(t).for_each(|(a, v)| *a += v);
        mean_estimated_fdr.iter_mut().zip(e).for_each(|(a, v)| *a += v);
    }
    mean_true_fdp.iter_mut().for_each(|a| *a /= reps as f64);
    mean_estimated_fdr.iter_mut().for_each(|a| *a /= reps as f64);
    Ok(FdrCalibration { reps, permutations, ranks: (1..=max_rank).collect(), mean_true_fdp, mean_estimated_fdr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(scenario: Scenario, seed: u64) -> ScenarioConfig {
        ScenarioConfig { scenario, seed, ..Default::default() }
    }

    #[test]
    fn truth_structure() {
        for seed in 0..20 {
            let h = generate_truth(&config(Scenario::Hierarchical, seed), &mut substream(seed, 0)).unwrap();
            assert_eq!(h.true_interaction.len(), 45);
            assert_eq!(h.true_main.len(), 5);
            for &(j, k) in &h.true_interaction {
                assert!(h.true_main.contains(&j) ^ h.true_main.contains(&k));
            }

            let a = generate_truth(&config(Scenario::AntiHierarchical, seed), &mut substream(seed, 0)).unwrap();
            assert_eq!(a.true_interaction.len(), 45);
            for &(j, k) in &a.true_interaction {
                assert!(!a.true_main.contains(&j) && !a.true_main.contains(&k));
            }

            let z = generate_truth(&config(Scenario::NoMainEffects, seed), &mut substream(seed, 0)).unwrap();
            assert!(z.true_main.is_empty());
            assert_eq!(z.true_interaction.len(), 45);
            let mut dedup = z.true_interaction.clone();
            dedup.dedup();
            assert_eq!(dedup.len(), 45);
        }
    }

    #[test]
    fn seed_determinism() {
        let c = config(Scenario::Hierarchical, 9);
        let (a, ta) = generate_scenario(&c).unwrap();
        let (b, tb) = generate_scenario(&c).unwrap();
        assert_eq!(a.x(), b.x());
        assert_eq!(ta, tb);
        let (d, _) = generate_scenario(&config(Scenario::Hierarchical, 10)).unwrap();
        assert_ne!(a.x(), d.x());
    }

    #[test]
    fn class_balance() {
        let c = ScenarioConfig { n: 11, ..config(Scenario::NoMainEffects, 1) };
        let (data, _) = generate_scenario(&c).unwrap();
        assert_eq!((data.n1(), data.n2()), (6, 5));
    }

    #[test]
    fn excessive_rho_is_rejected() {
        let c = ScenarioConfig { interaction_strength: 1.5, ..config(Scenario::Hierarchical, 1) };
        assert!(matches!(generate_scenario(&c), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn fdp_curve_carries_last_value() {
        let order = [2, 0];
        let flags = [false, true, true];
        assert_eq!(fdp_curve(&order, &flags, 4), vec![0.0, 0.5, 0.5, 0.5]);
        assert_eq!(fdp_curve(&[], &flags, 2), vec![0.0, 0.0]);
    }

    #[test]
    fn power_counts_largest_admissible_set() {
        // T T F T F F T: FDP after 4 is 1/4, after 7 is 3/7
        let flags = [true, true, false, true, false, false, true];
        let order: Vec<usize> = (0..7).collect();
        assert_eq!(true_positives_at_fdp(&order, &flags, 0.2), 2);
        assert_eq!(true_positives_at_fdp(&order, &flags, 0.25), 3);
        assert_eq!(true_positives_at_fdp(&order, &flags, 0.5), 4);
    }

    #[test]
    fn scenario_names() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
    }
}
