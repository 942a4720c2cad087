//! `cht`: convex hierarchical testing from the command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cht_core::baselines::{bootstrap_topk_frequency, split_half_overlap, Method};
use cht_core::contrasts::{compute_all_contrasts_with, ContrastMode, ContrastOptions};
use cht_core::io::{fmt_f64, write_fdr, write_statistics};
use cht_core::row_solver::{compute_knots, solve_path};
use cht_core::simulation::{
    generate_scenario, run_fdr_calibration, run_fdr_experiment, run_power_experiment, Scenario, ScenarioConfig,
    DEFAULT_DELTA, DEFAULT_RHO, POWER_DELTA, POWER_RHO,
};
use cht_core::test_stats::{shrinkage_curve, ShrinkageModel};
use cht_core::verification::{run_oracle_check, OracleConfig};
use cht_core::{compute_test_statistics, estimate_fdr, ClassedDataset, CsvOptions, FdrOptions};

#[derive(Parser, Debug)]
#[command(name = "cht", version, about = "Convex hierarchical testing of pairwise interactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "CHT_THREADS")]
    threads: Option<usize>,

    /// Write here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Emit JSON instead of TSV.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Main-effect and interaction statistics of a dataset.
    Test(TestArgs),
    /// Permutation estimate of the FDR of the interaction statistics.
    Fdr(FdrArgs),
    /// Simulation experiments.
    Simulate(SimulateArgs),
    /// Solution path of one row.
    Path(PathArgs),
    /// Bootstrap or split-half stability of the top interactions.
    Stability(StabilityArgs),
    /// Interaction statistic against its contrast, for several main effects.
    ShrinkageCurve(ShrinkageArgs),
    /// Compare the closed-form solver with a brute-force oracle.
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// CSV file with a class label column (values 1 and 2).
    #[arg(long, short)]
    input: PathBuf,

    /// The file has no header row.
    #[arg(long)]
    no_header: bool,

    /// Zero-based index of the label column.
    #[arg(long, default_value_t = 0)]
    label_column: usize,

    /// Cache all per-observation cross products instead of streaming pairs.
    #[arg(long)]
    materialize: bool,
}

impl InputArgs {
    fn load(&self) -> Result<ClassedDataset> {
        let options = CsvOptions { has_header: !self.no_header, label_column: self.label_column };
        Ok(ClassedDataset::load_csv(&self.input, options)?)
    }

    fn contrast_options(&self) -> ContrastOptions {
        let mode = if self.materialize { ContrastMode::Materialized } else { ContrastMode::Streamed };
        ContrastOptions { mode, ..Default::default() }
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Keep only the top k interactions.
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Args, Debug)]
struct FdrArgs {
    #[command(flatten)]
    input: InputArgs,

    #[arg(long, default_value_t = 100)]
    permutations: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// `auto` (distinct observed statistics) or a file with one threshold per line.
    #[arg(long, default_value = "auto")]
    grid: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Experiment {
    /// True FDP against rank for each method.
    Fdp,
    /// True positives at true FDP <= 0.2 over a grid of n and delta.
    Power,
    /// Permutation FDR estimate against true FDP.
    Calibration,
    /// One simulated dataset as CSV.
    Data,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "fdp")]
    experiment: Experiment,

    #[arg(long, default_value = "hierarchical", value_parser = parse_scenario)]
    scenario: Scenario,

    #[arg(long, default_value_t = 200)]
    n: usize,

    #[arg(long, default_value_t = 50)]
    p: usize,

    #[arg(long, default_value_t = 10)]
    reps: usize,

    /// Mean shift on main-effect features [default: 1.0, or 0.7 for power].
    #[arg(long)]
    delta: Option<f64>,

    /// Between-class correlation difference on planted pairs [default: 0.5, or 0.4 for power].
    #[arg(long)]
    rho: Option<f64>,

    #[arg(long, default_value_t = 5)]
    n_main: usize,

    #[arg(long, default_value_t = 9)]
    ints_per_main: usize,

    /// Comma-separated methods: cht, all-pairs, strong-screen, weak-screen.
    #[arg(long, value_delimiter = ',', default_value = "cht,all-pairs,strong-screen,weak-screen", value_parser = parse_method)]
    methods: Vec<Method>,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Largest rank reported by the fdp and calibration experiments.
    #[arg(long, default_value_t = 100)]
    max_rank: usize,

    /// Sample sizes for the power experiment.
    #[arg(long, value_delimiter = ',', default_value = "100,200,500")]
    ns: Vec<usize>,

    /// Main-effect sizes for the power experiment; defaults to `--delta`.
    #[arg(long, value_delimiter = ',')]
    deltas: Vec<f64>,

    #[arg(long, default_value_t = 0.2)]
    fdp_level: f64,

    /// Permutations per replication in the calibration experiment.
    #[arg(long, default_value_t = 100)]
    permutations: usize,
}

#[derive(Args, Debug)]
struct PathArgs {
    /// Dataset to take the row from; otherwise give `--w` and `--z`.
    #[arg(long, short)]
    input: Option<PathBuf>,

    #[arg(long)]
    no_header: bool,

    #[arg(long, default_value_t = 0)]
    label_column: usize,

    /// Zero-based feature index or feature name.
    #[arg(long)]
    feature: Option<String>,

    #[arg(long, allow_hyphen_values = true)]
    w: Option<f64>,

    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z: Vec<f64>,

    /// Number of grid points.
    #[arg(long, default_value_t = 200)]
    points: usize,

    /// Largest lambda; defaults to just above the point where the row is all zero.
    #[arg(long)]
    lambda_max: Option<f64>,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[command(flatten)]
    input: InputArgs,

    #[arg(long, default_value = "cht", value_parser = parse_method)]
    method: Method,

    #[arg(long, default_value_t = 10)]
    topk: usize,

    /// Bootstrap replicates (top-k frequencies).
    #[arg(long, conflicts_with = "splits", required_unless_present = "splits")]
    bootstrap: Option<usize>,

    /// Random half splits (overlap of top-k lists for k = 1..topk).
    #[arg(long)]
    splits: Option<usize>,

    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ShrinkageArgs {
    /// Main-effect values, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5")]
    w: Vec<f64>,

    /// `normal` (others from N(0,1)) or `spiked` (others from N(0,0.25)).
    #[arg(long, default_value = "normal")]
    model: String,

    /// Number of grid points for the varying contrast.
    #[arg(long, default_value_t = 101)]
    count: usize,

    #[arg(long, default_value_t = 4.0)]
    z_max: f64,

    /// Interactions per row, including the varying one.
    #[arg(long, default_value_t = 50)]
    m: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Lambda step of the entry-point scan.
    #[arg(long, default_value_t = 1e-3)]
    grid: f64,

    /// Relative alpha step of the fixed-lambda oracle.
    #[arg(long, default_value_t = 1e-5)]
    alpha_step: f64,
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    s.parse().map_err(|e: cht_core::Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: cht_core::Error| e.to_string())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_test(args: &TestArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let ds = args.input.load()?;
    let contrasts = compute_all_contrasts_with(&ds, args.input.contrast_options())?;
    let stats = compute_test_statistics(&contrasts);
    if json {
        #[derive(Serialize)]
        struct Main<'a> {
            feature: &'a str,
            w: f64,
            lambda_hat: f64,
        }
        #[derive(Serialize)]
        struct Pair<'a> {
            j: &'a str,
            k: &'a str,
            z: f64,
            lambda_jk: f64,
            lambda_kj: f64,
            lambda_prime: f64,
        }
        #[derive(Serialize)]
        struct Tables<'a> {
            main: Vec<Main<'a>>,
            interaction: Vec<Pair<'a>>,
        }
        let names = ds.feature_names();
        let main = stats
            .main_order()
            .into_iter()
            .map(|j| Main { feature: &names[j], w: contrasts.w[j], lambda_hat: stats.lambda_main[j] })
            .collect();
        let order = stats.interaction_order();
        let take = args.top.unwrap_or(order.len());
        let interaction = order
            .into_iter()
            .take(take)
            .map(|(j, k)| Pair {
                j: &names[j],
                k: &names[k],
                z: contrasts.z[[j, k]],
                lambda_jk: stats.lambda_int_asym[[j, k]],
                lambda_kj: stats.lambda_int_asym[[k, j]],
                lambda_prime: stats.lambda_prime(j, k),
            })
            .collect();
        return write_json(out, &Tables { main, interaction });
    }
    write_statistics(out, &contrasts, &stats, ds.feature_names(), args.top)?;
    Ok(())
}

fn read_grid(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut grid = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().with_context(|| format!("grid line {}: {line:?}", i + 1))?;
        grid.push(v);
    }
    grid.sort_by(|a, b| b.total_cmp(a));
    Ok(grid)
}

fn cmd_fdr(args: &FdrArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let ds = args.input.load()?;
    let contrast = args.input.contrast_options();
    let contrasts = compute_all_contrasts_with(&ds, contrast)?;
    let lambda_grid = match args.grid.as_str() {
        "auto" => None,
        path => Some(read_grid(Path::new(path))?),
    };
    let options = FdrOptions { permutations: args.permutations, seed: args.seed, lambda_grid, contrast };
    let curve = estimate_fdr(&ds, &contrasts, &options)?;
    if json {
        return write_json(out, &curve);
    }
    write_fdr(out, &curve)?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let (delta, rho) = match args.experiment {
        Experiment::Power => (POWER_DELTA, POWER_RHO),
        _ => (DEFAULT_DELTA, DEFAULT_RHO),
    };
    let delta = args.delta.unwrap_or(delta);
    let rho = args.rho.unwrap_or(rho);
    let config = ScenarioConfig {
        scenario: args.scenario,
        n: args.n,
        p: args.p,
        n_main: args.n_main,
        ints_per_main: args.ints_per_main,
        main_effect_size: delta,
        interaction_strength: rho,
        seed: args.seed,
    };
    match args.experiment {
        Experiment::Data => {
            let (ds, truth) = generate_scenario(&config)?;
            if json {
                return write_json(out, &truth);
            }
            ds.write_csv(out)?;
        }
        Experiment::Fdp => {
            let res = run_fdr_experiment(&config, &args.methods, args.reps, args.max_rank)?;
            if json {
                return write_json(out, &res);
            }
            write!(out, "rank")?;
            for (m, _) in &res.curves {
                write!(out, "\t{m}")?;
            }
            writeln!(out)?;
            for r in 0..args.max_rank {
                write!(out, "{}", r + 1)?;
                for (_, curve) in &res.curves {
                    write!(out, "\t{}", fmt_f64(curve[r]))?;
                }
                writeln!(out)?;
            }
        }
        Experiment::Power => {
            let deltas = if args.deltas.is_empty() { vec![delta] } else { args.deltas.clone() };
            let rows = run_power_experiment(&config, &args.ns, &deltas, &args.methods, args.reps, args.fdp_level)?;
            if json {
                return write_json(out, &rows);
            }
            writeln!(out, "n\tdelta\tmethod\tmean_true_positives")?;
            for r in rows {
                writeln!(out, "{}\t{}\t{}\t{}", r.n, fmt_f64(r.delta), r.method, fmt_f64(r.mean_true_positives))?;
            }
        }
        Experiment::Calibration => {
            let cal = run_fdr_calibration(&config, args.permutations, args.reps, args.max_rank)?;
            if json {
                return write_json(out, &cal);
            }
            writeln!(out, "rank\tmean_true_fdp\tmean_estimated_fdr")?;
            for i in 0..cal.ranks.len() {
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    cal.ranks[i],
                    fmt_f64(cal.mean_true_fdp[i]),
                    fmt_f64(cal.mean_estimated_fdr[i])
                )?;
            }
        }
    }
    Ok(())
}

fn cmd_path(args: &PathArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let (w, z) = match (&args.input, args.w) {
        (Some(path), None) => {
            let options = CsvOptions { has_header: !args.no_header, label_column: args.label_column };
            let ds = ClassedDataset::load_csv(path, options)?;
            let Some(feature) = &args.feature else { bail!("--feature is required with --input") };
            let j = match feature.parse::<usize>() {
                Ok(j) if j < ds.p() => j,
                Ok(j) => bail!("feature index {j} out of range for {} features", ds.p()),
                Err(_) => ds
                    .feature_names()
                    .iter()
                    .position(|n| n == feature)
                    .with_context(|| format!("no feature named {feature:?}"))?,
            };
            let contrasts = compute_all_contrasts_with(&ds, ContrastOptions::default())?;
            (contrasts.w[j], contrasts.row(j))
        }
        (None, Some(w)) if !args.z.is_empty() => (w, args.z.clone()),
        _ => bail!("give either --input with --feature, or --w with --z"),
    };
    if args.points == 0 {
        bail!("--points must be positive");
    }
    let knots = compute_knots(w, &z);
    let top = args.lambda_max.unwrap_or_else(|| 1.05 * knots.lam4.max(w.abs()).max(f64::MIN_POSITIVE));
    let grid: Vec<f64> = (0..args.points).map(|i| top * (args.points - i) as f64 / args.points as f64).collect();
    let path = solve_path(w, &z, &grid)?;

    if json {
        #[derive(Serialize)]
        struct Point<'a> {
            lambda: f64,
            case: String,
            beta: f64,
            theta: &'a [f64],
            alpha: f64,
        }
        #[derive(Serialize)]
        struct PathOut<'a> {
            w: f64,
            z: &'a [f64],
            knots: cht_core::Knots,
            path: Vec<Point<'a>>,
        }
        let points = grid
            .iter()
            .zip(&path)
            .map(|(&lambda, (s, c))| Point { lambda, case: s.case.to_string(), beta: s.beta(), theta: &s.theta, alpha: c.alpha })
            .collect();
        return write_json(out, &PathOut { w, z: &z, knots, path: points });
    }
    write!(out, "lambda\tcase\tbeta")?;
    for k in 0..z.len() {
        write!(out, "\ttheta_{}", k + 1)?;
    }
    writeln!(out, "\talpha")?;
    for (&lam, (s, c)) in grid.iter().zip(&path) {
        write!(out, "{}\t{}\t{}", fmt_f64(lam), s.case, fmt_f64(s.beta()))?;
        for t in &s.theta {
            write!(out, "\t{}", fmt_f64(*t))?;
        }
        writeln!(out, "\t{}", fmt_f64(c.alpha))?;
    }
    Ok(())
}

fn cmd_stability(args: &StabilityArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let ds = args.input.load()?;
    let names = ds.feature_names();
    if let Some(b) = args.bootstrap {
        let freq = bootstrap_topk_frequency(&ds, args.method, args.topk, b, args.seed)?;
        if json {
            return write_json(out, &freq);
        }
        writeln!(out, "j\tk\tfrequency")?;
        for f in freq {
            writeln!(out, "{}\t{}\t{}", names[f.j], names[f.k], fmt_f64(f.frequency))?;
        }
    } else if let Some(r) = args.splits {
        let overlap = split_half_overlap(&ds, args.method, args.topk, r, args.seed)?;
        if json {
            return write_json(out, &overlap);
        }
        writeln!(out, "k\toverlap")?;
        for (k, v) in overlap.iter().enumerate() {
            writeln!(out, "{}\t{}", k + 1, fmt_f64(*v))?;
        }
    }
    Ok(())
}

fn cmd_shrinkage(args: &ShrinkageArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let model: ShrinkageModel = args.model.parse()?;
    if args.count < 2 || args.z_max.is_nan() || args.z_max <= 0.0 {
        bail!("need --count >= 2 and a positive --z-max");
    }
    let grid: Vec<f64> = (0..args.count).map(|i| args.z_max * i as f64 / (args.count - 1) as f64).collect();
    let pts = shrinkage_curve(&args.w, &grid, model, args.m, args.seed)?;
    if json {
        return write_json(out, &pts);
    }
    writeln!(out, "w\tz\tlambda_hat")?;
    for p in pts {
        writeln!(out, "{}\t{}\t{}", fmt_f64(p.w), fmt_f64(p.z), fmt_f64(p.lambda_hat))?;
    }
    Ok(())
}

fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<()> {
    if !(args.grid > 0.0 && args.alpha_step > 0.0) {
        bail!("grid and alpha step must be positive");
    }
    let cfg = OracleConfig {
        instances: args.instances,
        seed: args.seed,
        grid: args.grid,
        alpha_step_rel: args.alpha_step,
        ..Default::default()
    };
    let report = run_oracle_check(&cfg);
    write_json(out, &report)?;
    if !report.passed() {
        bail!("oracle check failed on {} checks", report.failures.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be positive");
        }
        pool = pool.num_threads(t);
    }
    pool.build_global().context("configuring worker threads")?;

    let mut out = open_output(cli.output.as_deref())?;
    match &cli.command {
        Command::Test(a) => cmd_test(a, cli.json, &mut *out)?,
        Command::Fdr(a) => cmd_fdr(a, cli.json, &mut *out)?,
        Command::Simulate(a) => cmd_simulate(a, cli.json, &mut *out)?,
        Command::Path(a) => cmd_path(a, cli.json, &mut *out)?,
        Command::Stability(a) => cmd_stability(a, cli.json, &mut *out)?,
        Command::ShrinkageCurve(a) => cmd_shrinkage(a, cli.json, &mut *out)?,
        Command::OracleCheck(a) => {
            let r = cmd_oracle(a, &mut *out);
            out.flush()?;
            r?
        }
    }
    out.flush()?;
    Ok(())
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(core) = e.downcast_ref::<cht_core::Error>() {
        core.kind()
    } else if e.downcast_ref::<io::Error>().is_some() {
        "io"
    } else {
        "usage"
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        cause.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || cause.downcast_ref::<cht_core::Error>().is_some_and(cht_core::Error::is_broken_pipe)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let summary: Vec<&str> = msg.lines().map(str::trim).take_while(|l| !l.is_empty()).collect();
            eprintln!("cht: error[usage]: {}", summary.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away (`cht ... | head`)
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cht: error[{}]: {e:#}", error_kind(&e));
            ExitCode::FAILURE
        }
    }
}
