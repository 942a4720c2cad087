//! Tab-separated output tables.
//!
//! All reals are written with 17 significant digits so that every value
//! round-trips exactly.

use std::io::{self, Write};

use crate::contrasts::ContrastSet;
use crate::fdr::FdrCurve;
use crate::test_stats::TestStatistics;

pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}

/// `main` block (feature, w) followed by `interaction` block (feature_j, feature_k, z).
pub fn write_contrasts<W: Write + ?Sized>(out: &mut W, contrasts: &ContrastSet, names: &[String]) -> io::Result<()> {
    writeln!(out, "# main")?;
    writeln!(out, "feature\tw")?;
    for (j, &w) in contrasts.w.iter().enumerate() {
        writeln!(out, "{}\t{}", names[j], fmt_f64(w))?;
    }
    writeln!(out, "# interaction")?;
    writeln!(out, "feature_j\tfeature_k\tz")?;
    for (j, k) in contrasts.pairs() {
        writeln!(out, "{}\t{}\t{}", names[j], names[k], fmt_f64(contrasts.z[[j, k]]))?;
    }
    Ok(())
}

/// Statistic tables sorted by statistic, descending. `top` truncates the
/// interaction table.
pub fn write_statistics<W: Write + ?Sized>(
    out: &mut W,
    contrasts: &ContrastSet,
    stats: &TestStatistics,
    names: &[String],
    top: Option<usize>,
) -> io::Result<()> {
    writeln!(out, "# main")?;
    writeln!(out, "feature\tw\tlambda_hat")?;
    for j in stats.main_order() {
        writeln!(out, "{}\t{}\t{}", names[j], fmt_f64(contrasts.w[j]), fmt_f64(stats.lambda_main[j]))?;
    }
    writeln!(out, "# interaction")?;
    writeln!(out, "j\tk\tz\tlambda_jk\tlambda_kj\tlambda_prime")?;
    let order = stats.interaction_order();
    let take = top.unwrap_or(order.len());
    for &(j, k) in order.iter().take(take) {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            names[j],
            names[k],
            fmt_f64(contrasts.z[[j, k]]),
            fmt_f64(stats.lambda_int_asym[[j, k]]),
            fmt_f64(stats.lambda_int_asym[[k, j]]),
            fmt_f64(stats.lambda_prime(j, k)),
        )?;
    }
    Ok(())
}

pub fn write_fdr<W: Write + ?Sized>(out: &mut W, curve: &FdrCurve) -> io::Result<()> {
    writeln!(out, "lambda\tobserved_count\tnull_mean\tfdr_hat")?;
    for i in 0..curve.lambda_grid.len() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            fmt_f64(curve.lambda_grid[i]),
            curve.observed_exceed[i],
            fmt_f64(curve.null_exceed_mean[i]),
            fmt_f64(curve.fdr_hat[i]),
        )?;
    }
    Ok(())
}
