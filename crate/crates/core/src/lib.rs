//! Convex hierarchical testing (CHT) of pairwise interactions in two-class data.
//!
//! The pipeline is:
//!
//! 1. [`dataset`]: load and validate an `N x p` matrix with class labels in `{1, 2}`.
//! 2. [`contrasts`]: main-effect t-statistics `w_j` and interaction t-statistics `z_jk`
//!    built from class-standardized cross products.
//! 3. [`row_solver`]: the exact per-row solution of the hierarchy-constrained lasso
//!    (knots, dual variable, KKT certificate).
//! 4. [`test_stats`]: closed-form entry points of the solution path, used as test
//!    statistics, and the merged ranking of effects.
//! 5. [`fdr`]: permutation estimate of the false discovery rate with a pooled null.
//!
//! [`baselines`], [`simulation`] and [`verification`] hold the comparison methods, the
//! simulation harness and brute-force oracles.

pub mod baselines;
pub mod contrasts;
pub mod dataset;
mod error;
pub mod fdr;
pub mod io;
pub mod rng;
pub mod row_solver;
pub mod simulation;
pub mod test_stats;
pub mod verification;

pub use contrasts::{compute_all_contrasts, ClassMoments, ContrastMode, ContrastOptions, ContrastSet};
pub use dataset::{Class, ClassedDataset, CsvOptions, Degeneracy};
pub use error::{Error, Result};
pub use fdr::{estimate_fdr, FdrCurve, FdrOptions};
pub use row_solver::{compute_knots, solve_row, soft_threshold, CaseLabel, KktCertificate, Knots, Regime, RowSolution};
pub use test_stats::{compute_test_statistics, entry_points_row, rank_effects, Effect, TestStatistics};
