//! Exact solution of the single-row hierarchy-constrained problem
//!
//! ```text
//! minimize  1/2 (w - (b+ - b-))^2 + 1/2 ||z - theta||^2 + lambda (b+ + b-) + lambda ||theta||_1
//! s.t.      b+, b- >= 0,  ||theta||_1 <= b+ + b-
//! ```
//!
//! The problem decouples over features, so the full fit is `p` independent rows.
//! Everything here is computed by scanning the breakpoints of piecewise-linear
//! functions of `lambda`, so no iteration tolerance is involved.
//!
//! Internally the row is reduced to `|w|` and `|z_k|`; signs are restored at the end
//! (`beta` takes the sign of `w`, `theta_k` the sign of `z_k`).

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance used to accept and clamp the dual root at the ends of its interval.
const ALPHA_SLACK: f64 = 1e-12;

/// `sign(x) * max(|x| - t, 0)`.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0, "threshold must be nonnegative");
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// `||S(z, t)||_1`.
pub fn soft_l1(z: &[f64], t: f64) -> f64 {
    z.iter().map(|v| (v.abs() - t).max(0.0)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `||z||_1 < |w|`
    BigMain,
    /// `||z||_inf <= |w| <= ||z||_1`
    Moderate,
    /// `|w| < ||z||_inf`
    BigInteraction,
}

/// Special values of `lambda` where the structure of the path changes.
/// Non-finite knots are `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Knots {
    /// Smallest `lambda` with `||S(z, lambda)||_1 + lambda <= |w|`.
    pub lam1: f64,
    /// Largest such `lambda` (equals `|w|` when finite).
    pub lam2: f64,
    /// Largest `lambda` with `||S(z, 2 lambda)||_1 >= |w|`.
    pub lam3: f64,
    /// `(|w| + ||z||_inf) / 2`, where the big-interaction path leaves zero.
    pub lam4: f64,
    pub regime: Regime,
}

/// Which branch of the solution path a solution lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseLabel {
    /// I(i): one-signed main effect, hierarchy constraint loose (`alpha = 0`).
    LooseMain,
    /// I(ii): one-signed main effect, hierarchy constraint tight (`alpha > 0`).
    TightMain,
    /// II: both `beta+` and `beta-` positive, `alpha = lambda`.
    BothSigns,
    /// III: everything zero.
    Zero,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseLabel::LooseMain => "I(i)",
            CaseLabel::TightMain => "I(ii)",
            CaseLabel::BothSigns => "II",
            CaseLabel::Zero => "III",
        })
    }
}

/// One row's problem at a single `lambda` (`lambda_1 = lambda_2 = lambda`).
#[derive(Debug, Clone, PartialEq)]
pub struct RowProblem {
    pub w: f64,
    pub z: Vec<f64>,
    pub lambda: f64,
}

impl RowProblem {
    pub fn new(w: f64, z: Vec<f64>, lambda: f64) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidArgument("row needs at least one interaction".into()));
        }
        if !w.is_finite() || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("row entries must be finite".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive and finite, got {lambda}")));
        }
        Ok(Self { w, z, lambda })
    }

    pub fn solve(&self) -> Result<(RowSolution, KktCertificate)> {
        solve_row(self.w, &self.z, self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSolution {
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub theta: Vec<f64>,
    pub case: CaseLabel,
}

impl RowSolution {
    pub fn beta(&self) -> f64 {
        self.beta_plus - self.beta_minus
    }

    pub fn is_zero(&self) -> bool {
        self.beta_plus == 0.0 && self.beta_minus == 0.0 && self.theta.iter().all(|&t| t == 0.0)
    }
}

/// Dual variables plus the KKT violations they certify.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate {
    pub alpha: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub subgrad: Vec<f64>,
    pub residuals: KktResiduals,
}

/// Absolute violation of each KKT line.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KktResiduals {
    pub stationarity_plus: f64,
    pub stationarity_minus: f64,
    pub stationarity_theta: f64,
    pub slackness_plus: f64,
    pub slackness_minus: f64,
    pub slackness_hierarchy: f64,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        [
            self.stationarity_plus,
            self.stationarity_minus,
            self.stationarity_theta,
            self.slackness_plus,
            self.slackness_minus,
            self.slackness_hierarchy,
            self.primal_feasibility,
            self.dual_feasibility,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Row magnitudes sorted in decreasing order, with running sums.
struct SortedRow {
    a: f64,
    /// `b[0] >= b[1] >= ...`
    b: Vec<f64>,
    /// `prefix[c]` = sum of the `c` largest magnitudes.
    prefix: Vec<f64>,
}

impl SortedRow {
    fn new(w: f64, z: &[f64]) -> Self {
        let mut b: Vec<f64> = z.iter().map(|v| v.abs()).collect();
        b.sort_by(|x, y| y.total_cmp(x));
        let mut prefix = Vec::with_capacity(b.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &v in &b {
            acc += v;
            prefix.push(acc);
        }
        Self { a: w.abs(), b, prefix }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn l1(&self) -> f64 {
        self.prefix[self.m()]
    }

    fn linf(&self) -> f64 {
        self.b.first().copied().unwrap_or(0.0)
    }

    /// `b_{c+1}` in 1-based terms: the breakpoint closing segment `c` from below.
    fn below(&self, c: usize) -> f64 {
        self.b.get(c).copied().unwrap_or(0.0)
    }

    /// Smallest `lambda >= 0` with `||S(z, lambda)||_1 + lambda <= a`, if any.
    fn lam1(&self) -> f64 {
        if self.linf() > self.a {
            return f64::INFINITY;
        }
        if self.l1() <= self.a {
            return 0.0;
        }
        // On [b_{c+1}, b_c] the function equals prefix[c] - (c - 1) lambda. Scan
        // segments from the left; the first crossing is the answer.
        for c in (2..=self.m()).rev() {
            let lam = (self.prefix[c] - self.a) / (c - 1) as f64;
            if lam <= self.b[c - 1] {
                return lam.max(self.below(c));
            }
        }
        self.below(1)
    }

    /// Largest `lambda >= 0` with `||S(z, 2 lambda)||_1 >= a`. Infinite when
    /// `a = 0` or `||z||_1 < a`.
    fn lam3(&self) -> f64 {
        if self.a == 0.0 || self.l1() < self.a {
            return f64::INFINITY;
        }
        // On [b_{c+1}, b_c], ||S(z, t)||_1 = prefix[c] - c t, strictly decreasing.
        for c in 1..=self.m() {
            let t = (self.prefix[c] - self.a) / c as f64;
            if t >= self.below(c) {
                return t.max(0.0) / 2.0;
            }
        }
        0.0
    }

    /// Root `t` of `||S(z, t)||_1 - t = target` (the left side strictly decreases).
    fn threshold_root(&self, target: f64) -> f64 {
        // On [b_{c+1}, b_c] the left side is prefix[c] - (c + 1) t.
        for c in 0..=self.m() {
            let t = (self.prefix[c] - target) / (c + 1) as f64;
            let floor = if c == self.m() { f64::NEG_INFINITY } else { self.b[c] };
            if t >= floor {
                return t;
            }
        }
        unreachable!("last segment is unbounded below")
    }

    /// Unclamped root of `f_lambda(alpha) = ||S(z, lambda + alpha)||_1 - a + lambda - alpha`.
    fn alpha_root(&self, lambda: f64) -> f64 {
        self.threshold_root(self.a - 2.0 * lambda) - lambda
    }
}

pub fn compute_knots(w: f64, z: &[f64]) -> Knots {
    knots_of(&SortedRow::new(w, z))
}

fn knots_of(row: &SortedRow) -> Knots {
    let (a, l1, linf) = (row.a, row.l1(), row.linf());
    let regime = if l1 < a {
        Regime::BigMain
    } else if linf <= a {
        Regime::Moderate
    } else {
        Regime::BigInteraction
    };
    let lam1 = row.lam1();
    let lam2 = if lam1.is_finite() { a } else { f64::INFINITY };
    Knots { lam1, lam2, lam3: row.lam3(), lam4: (a + linf) / 2.0, regime }
}

/// Dual variable `alpha` on the hierarchy-active branch, found exactly.
///
/// Fails when the root of `f_lambda` is not in `(max(0, lambda - |w|), lambda]`,
/// i.e. when `lambda` is not on that branch.
pub fn solve_alpha(w: f64, z: &[f64], lambda: f64) -> Result<f64> {
    let row = SortedRow::new(w, z);
    let alpha = row.alpha_root(lambda);
    let lower = (lambda - row.a).max(0.0);
    let slack = ALPHA_SLACK * lambda.max(row.a).max(1.0);
    if !(alpha > lower - slack && alpha <= lambda + slack) {
        return Err(Error::AlphaOutOfRange { lambda, alpha, lower, upper: lambda });
    }
    Ok(alpha.clamp(lower, lambda))
}

/// Branch of the path at `lambda`.
fn classify(row: &SortedRow, knots: &Knots, lambda: f64) -> CaseLabel {
    let a = row.a;
    if lambda >= a.max(knots.lam4) {
        return CaseLabel::Zero;
    }
    match knots.regime {
        Regime::BigMain => {
            if lambda >= knots.lam1 {
                CaseLabel::LooseMain
            } else {
                CaseLabel::TightMain
            }
        }
        // lam1 == lam3 breaks toward I(i)
        Regime::Moderate => {
            if lambda >= knots.lam1 {
                CaseLabel::LooseMain
            } else if lambda >= knots.lam3 {
                CaseLabel::TightMain
            } else {
                CaseLabel::BothSigns
            }
        }
        Regime::BigInteraction => {
            if lambda >= knots.lam3 {
                CaseLabel::TightMain
            } else {
                CaseLabel::BothSigns
            }
        }
    }
}

/// Solves one row at `lambda > 0` and certifies the result.
pub fn solve_row(w: f64, z: &[f64], lambda: f64) -> Result<(RowSolution, KktCertificate)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive and finite, got {lambda}")));
    }
    if z.is_empty() {
        return Err(Error::InvalidArgument("row needs at least one interaction".into()));
    }
    let row = SortedRow::new(w, z);
    let knots = knots_of(&row);
    let case = classify(&row, &knots, lambda);
    let a = row.a;

    // (beta+, beta-, alpha, gamma+, gamma-) for w >= 0
    let (bp, bm, alpha, gp, gm) = match case {
        CaseLabel::Zero => {
            let alpha = (row.linf() - lambda).max(0.0);
            (0.0, 0.0, alpha, lambda - a - alpha, lambda + a - alpha)
        }
        CaseLabel::LooseMain => (a - lambda, 0.0, 0.0, 0.0, 2.0 * lambda),
        CaseLabel::TightMain => {
            let alpha = row.alpha_root(lambda).clamp((lambda - a).max(0.0), lambda);
            (a - lambda + alpha, 0.0, alpha, 0.0, 2.0 * (lambda - alpha))
        }
        CaseLabel::BothSigns => {
            let budget = soft_l1(z, 2.0 * lambda);
            ((budget + a) / 2.0, (budget - a) / 2.0, lambda, 0.0, 0.0)
        }
    };
    let (beta_plus, beta_minus, gamma_plus, gamma_minus) = if w < 0.0 { (bm, bp, gm, gp) } else { (bp, bm, gp, gm) };

    let t = lambda + alpha;
    let theta: Vec<f64> = z.iter().map(|&zk| soft_threshold(zk, t)).collect();
    let subgrad: Vec<f64> = z.iter().zip(&theta).map(|(zk, th)| (zk - th) / t).collect();

    let solution = RowSolution { beta_plus, beta_minus, theta, case };
    let mut cert = KktCertificate { alpha, gamma_plus, gamma_minus, subgrad, residuals: KktResiduals::default() };
    cert.residuals = kkt_residual_lines(w, z, lambda, &solution, &cert);
    Ok((solution, cert))
}

/// Solutions along a grid of `lambda` values, in the given order.
pub fn solve_path(w: f64, z: &[f64], grid: &[f64]) -> Result<Vec<(RowSolution, KktCertificate)>> {
    grid.iter().map(|&lam| solve_row(w, z, lam)).collect()
}

pub fn kkt_residual_lines(
    w: f64,
    z: &[f64],
    lambda: f64,
    solution: &RowSolution,
    cert: &KktCertificate,
) -> KktResiduals {
    let (bp, bm) = (solution.beta_plus, solution.beta_minus);
    let (alpha, gp, gm) = (cert.alpha, cert.gamma_plus, cert.gamma_minus);
    let r = bp - bm - w;
    let t = lambda + alpha;
    let theta_l1: f64 = solution.theta.iter().map(|v| v.abs()).sum();

    let stationarity_theta = solution
        .theta
        .iter()
        .zip(z)
        .zip(&cert.subgrad)
        .map(|((th, zk), s)| (th - zk + t * s).abs())
        .fold(0.0, f64::max);

    // subgradient must be in [-1, 1] and equal sign(theta_k) where theta_k != 0
    let subgrad_violation = solution
        .theta
        .iter()
        .zip(&cert.subgrad)
        .map(|(&th, &s)| if th != 0.0 { (s - th.signum()).abs() } else { (s.abs() - 1.0).max(0.0) })
        .fold(0.0, f64::max);

    KktResiduals {
        stationarity_plus: (r + lambda - gp - alpha).abs(),
        stationarity_minus: (-r + lambda - gm - alpha).abs(),
        stationarity_theta,
        slackness_plus: (gp * bp).abs(),
        slackness_minus: (gm * bm).abs(),
        slackness_hierarchy: (alpha * (theta_l1 - bp - bm)).abs(),
        primal_feasibility: [theta_l1 - bp - bm, -bp, -bm].into_iter().fold(0.0, f64::max),
        dual_feasibility: [-gp, -gm, -alpha, subgrad_violation].into_iter().fold(0.0, f64::max),
    }
}

/// Largest absolute violation over all KKT lines.
pub fn kkt_residuals(w: f64, z: &[f64], lambda: f64, solution: &RowSolution, cert: &KktCertificate) -> f64 {
    kkt_residual_lines(w, z, lambda, solution, cert).max()
}

/// Value of the row objective at a (not necessarily feasible) point.
pub fn objective(w: f64, z: &[f64], lambda: f64, beta_plus: f64, beta_minus: f64, theta: &[f64]) -> f64 {
    let d = w - (beta_plus - beta_minus);
    let fit: f64 = z.iter().zip(theta).map(|(zk, th)| (zk - th) * (zk - th)).sum();
    let l1: f64 = theta.iter().map(|v| v.abs()).sum();
    0.5 * d * d + 0.5 * fit + lambda * (beta_plus + beta_minus) + lambda * l1
}
