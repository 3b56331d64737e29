//! Subcommand definitions and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dppm::quadratic::UpdatePath;
use dppm::{
    dppm_minimize, figure1_objective, quadratic_objective, sinewell_objective, Objective, SolverConfig, Status,
};
use serde_json::{json, Map};

use crate::config::{expand_config, parse_list, parse_range, parse_schedule};
use crate::error::{CliError, CliResult};
use crate::experiments::{
    bench_convex_rate, bench_nonconvex, bench_quadratic, random_inits, ConvexRateBench, NonconvexBench, QuadraticBench,
    QuadraticRule, StrategyName,
};
use crate::report::{fmt_f64, write_csv, RunSummary};
use crate::validate::Suite;

/// Comma-separated numbers taken as one flag value.
type Point = Vec<f64>;

#[derive(Debug, Parser)]
#[command(name = "dppm", version, about = "Directional proximal point method experiments", args_override_self = true)]
pub struct Cli {
    /// Flat key=value file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize one objective and write its trace.
    Minimize(MinimizeArgs),
    /// Cyclic conjugate runs on a seeded diagonal quadratic.
    BenchQuadratic(QuadraticArgs),
    /// Sinewell runs for each direction strategy.
    BenchNonconvex(NonconvexArgs),
    /// Constant-step runs against the O(1/k) or O(1/k^2) bound.
    BenchConvexRate(ConvexRateArgs),
    /// Run invariant suites against their oracles.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveName {
    Sinewell,
    Quadratic,
    Figure1,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Gradient,
    Momentum,
    Dlc,
}

impl From<StrategyArg> for StrategyName {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Gradient => StrategyName::Gradient,
            StrategyArg::Momentum => StrategyName::Momentum,
            StrategyArg::Dlc => StrategyName::Dlc,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PathArg {
    Closed,
    Prox,
}

#[derive(Debug, Args)]
pub struct Seed {
    #[arg(long, env = "DPPM_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    #[arg(long, value_enum)]
    pub objective: ObjectiveName,
    /// Diagonal of the quadratic, comma separated.
    #[arg(long, value_parser = parse_list)]
    pub diag: Option<Point>,
    /// Starting point; defaults to (0,0,30), 0 or all ones.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub init: Option<Point>,
    #[arg(long, value_enum, default_value = "gradient")]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 0.6)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Constant step `t` instead of the segment probe.
    #[arg(long)]
    pub convex_lambda: Option<f64>,
    #[command(flatten)]
    pub seed: Seed,
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QuadraticArgs {
    #[arg(long, default_value_t = 500)]
    pub dim: usize,
    #[arg(long, value_parser = parse_range, default_value = "30:300")]
    pub spectrum: (f64, f64),
    #[arg(long, default_value_t = 0.1, conflicts_with = "schedule")]
    pub lambda: f64,
    /// Geometric schedule `lambda0,c`.
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<(f64, f64)>,
    #[arg(long, default_value_t = 20)]
    pub cycles: usize,
    #[arg(long, value_enum, default_value = "closed")]
    pub path: PathArg,
    #[command(flatten)]
    pub seed: Seed,
    #[arg(long, default_value = "quadratic.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NonconvexArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gradient,momentum,dlc")]
    pub strategies: Vec<StrategyArg>,
    /// Explicit starting point; repeat for several. Replaces random draws.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub init: Vec<Point>,
    #[arg(long, value_parser = parse_range, default_value = "10:40")]
    pub random_box: (f64, f64),
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.6)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[command(flatten)]
    pub seed: Seed,
    #[arg(long, default_value = "nonconvex.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvexRateArgs {
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, value_parser = parse_range, default_value = "30:300")]
    pub spectrum: (f64, f64),
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long)]
    pub accelerate: bool,
    #[command(flatten)]
    pub seed: Seed,
    #[arg(long, default_value = "convex_rate.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[command(flatten)]
    pub seed: Seed,
}

fn summary(command: &'static str, status: &str, started: Instant) -> RunSummary {
    RunSummary {
        command,
        status: status.to_string(),
        iterations: 0,
        final_f: f64::NAN,
        final_grad_norm: f64::NAN,
        bound_violations: 0,
        wall_time_s: started.elapsed().as_secs_f64(),
        extra: Map::new(),
    }
}

fn build_objective(a: &MinimizeArgs) -> CliResult<(Objective, Vec<f64>)> {
    let obj = match a.objective {
        ObjectiveName::Sinewell => sinewell_objective(),
        ObjectiveName::Figure1 => figure1_objective(),
        ObjectiveName::Quadratic => {
            let diag = a.diag.as_ref().ok_or_else(|| CliError::Usage("quadratic needs --diag".into()))?;
            quadratic_objective(diag)?
        }
    };
    let x0 = match (&a.init, a.objective) {
        (Some(x), _) => x.clone(),
        (None, ObjectiveName::Sinewell) => vec![0.0, 0.0, 30.0],
        (None, ObjectiveName::Figure1) => vec![0.0],
        (None, ObjectiveName::Quadratic) => vec![1.0; obj.dim()],
    };
    if x0.len() != obj.dim() {
        return Err(CliError::Usage(format!("--init needs {} coordinates, got {}", obj.dim(), x0.len())));
    }
    Ok((obj, x0))
}

fn minimize(a: MinimizeArgs) -> CliResult<()> {
    let started = Instant::now();
    let (obj, x0) = build_objective(&a)?;
    let seed = a.seed.seed;
    let strategy = StrategyName::from(a.strategy).build(a.beta, a.mu, seed);
    let mut cfg = SolverConfig { max_iter: a.max_iter, tol_grad: a.tol, seed, ..SolverConfig::default() };
    if let Some(l) = a.convex_lambda {
        cfg.convex_mode = true;
        cfg.lambda_const = l;
    }
    let trace = dppm_minimize(&obj, &x0, &strategy, &cfg)?;
    let n = obj.dim();
    let mut header = vec!["k".to_string(), "f".into(), "grad_norm".into(), "w".into(), "t".into(), "direction".into()];
    header.extend((0..n).map(|i| format!("x{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = trace.records.iter().map(|r| {
        let mut row = vec![
            r.k.to_string(),
            fmt_f64(r.f),
            fmt_f64(r.grad_norm),
            fmt_f64(r.w),
            fmt_f64(r.t),
            r.direction_kind.map_or("", |d| d.as_str()).to_string(),
        ];
        row.extend(r.x.iter().map(|&v| fmt_f64(v)));
        row
    });
    write_csv(&a.out, &header, rows)?;
    let last = trace.last();
    RunSummary {
        iterations: trace.iterations,
        final_f: last.f,
        final_grad_norm: last.grad_norm,
        bound_violations: trace.descent_violations,
        ..summary("minimize", trace.status.as_str(), started)
    }
    .with("retries", trace.retries)
    .print();
    match trace.status {
        Status::Converged => Ok(()),
        s => Err(CliError::Run(format!("run ended with status {}", s.as_str()))),
    }
}

fn quadratic(a: QuadraticArgs) -> CliResult<()> {
    let started = Instant::now();
    let rule = match a.schedule {
        Some((lambda0, c)) => QuadraticRule::Schedule { lambda0, c },
        None => QuadraticRule::Constant(a.lambda),
    };
    let spec = QuadraticBench {
        dim: a.dim,
        lo: a.spectrum.0,
        hi: a.spectrum.1,
        rule,
        cycles: a.cycles,
        seed: a.seed.seed,
        path: match a.path {
            PathArg::Closed => UpdatePath::ClosedForm,
            PathArg::Prox => UpdatePath::ProxLinesearch,
        },
    };
    let out = bench_quadratic(&spec)?;
    let rows = out.rows.iter().map(|r| vec![r.cycle.to_string(), fmt_f64(r.q_ratio), fmt_f64(r.bound)]);
    write_csv(&a.out, &["cycle", "q_ratio", "bound"], rows)?;
    let status = if out.violations == 0 { "ok" } else { "bound_violated" };
    RunSummary {
        iterations: out.rows.len() * a.dim,
        bound_violations: out.violations,
        ..summary("bench-quadratic", status, started)
    }
    .with("m", out.m)
    .with("max_excess", out.max_excess)
    .print();
    if out.violations > 0 {
        return Err(CliError::Run(format!("{} cycles above their bound", out.violations)));
    }
    Ok(())
}

fn median(mut v: Vec<usize>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0 })
}

fn nonconvex(a: NonconvexArgs) -> CliResult<()> {
    let started = Instant::now();
    let inits = if a.init.is_empty() {
        random_inits(a.seed.seed, a.repeats, a.random_box.0, a.random_box.1)
    } else {
        a.init.clone()
    };
    let strategies: Vec<StrategyName> = a.strategies.iter().map(|&s| s.into()).collect();
    let spec = NonconvexBench {
        strategies: strategies.clone(),
        inits,
        beta: a.beta,
        mu: a.mu,
        tol: a.tol,
        max_iter: a.max_iter,
        seed: a.seed.seed,
    };
    let runs = bench_nonconvex(&spec)?;
    let rows = runs.iter().flat_map(|run| {
        run.trace
            .records
            .iter()
            .map(move |r| vec![run.strategy.as_str().to_string(), run.run.to_string(), r.k.to_string(), fmt_f64(r.f)])
    });
    write_csv(&a.out, &["strategy", "run", "iter", "error"], rows)?;
    let mut failed = 0;
    for run in &runs {
        let last = run.trace.last();
        let ok = run.trace.status == Status::Converged && run.trace.descent_violations == 0 && run.fejer.holds;
        failed += usize::from(!ok);
        RunSummary {
            iterations: run.trace.iterations,
            final_f: last.f,
            final_grad_norm: last.grad_norm,
            bound_violations: run.trace.descent_violations,
            ..summary("bench-nonconvex", run.trace.status.as_str(), started)
        }
        .with("strategy", run.strategy.as_str())
        .with("run", run.run)
        .with("retries", run.trace.retries)
        .with("fejer_holds", run.fejer.holds)
        .with("fejer_k0", run.fejer.k0)
        .print();
    }
    let medians: Map<_, _> = strategies
        .iter()
        .map(|s| {
            let its = runs.iter().filter(|r| r.strategy == *s).map(|r| r.trace.iterations).collect();
            (s.as_str().to_string(), json!(median(its)))
        })
        .collect();
    println!("{}", json!({ "command": "bench-nonconvex", "median_iterations": medians, "failed_runs": failed }));
    if failed > 0 {
        return Err(CliError::Run(format!("{failed} runs did not converge cleanly")));
    }
    Ok(())
}

fn convex_rate(a: ConvexRateArgs) -> CliResult<()> {
    let started = Instant::now();
    let spec = ConvexRateBench {
        dim: a.dim,
        lo: a.spectrum.0,
        hi: a.spectrum.1,
        lambda: a.lambda,
        iters: a.iters,
        accelerate: a.accelerate,
        seed: a.seed.seed,
    };
    let out = bench_convex_rate(&spec)?;
    let rows = out.rows.iter().map(|r| vec![r.k.to_string(), fmt_f64(r.f_gap), fmt_f64(r.bound)]);
    write_csv(&a.out, &["k", "f_gap", "bound"], rows)?;
    let last = out.rows.last();
    RunSummary {
        iterations: out.rows.len(),
        final_f: last.map_or(f64::NAN, |r| r.f_gap),
        bound_violations: out.violations,
        ..summary("bench-convex-rate", out.status.as_str(), started)
    }
    .with("accelerated", a.accelerate)
    .with("max_excess", out.max_excess)
    .with("slope_10_200", out.slope)
    .with("descent_violations", out.descent_violations)
    .print();
    if out.violations > 0 || out.descent_violations > 0 {
        return Err(CliError::Run(format!("{} iterates above the bound", out.violations)));
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> CliResult<()> {
    let suites = Suite::parse(&a.suite).map_err(CliError::Usage)?;
    let mut total = 0;
    for s in suites {
        let rep = s.run(a.seed.seed);
        total += rep.violations;
        println!("{}", serde_json::to_string(&rep).expect("report serializes"));
    }
    if total > 0 {
        return Err(CliError::Run(format!("{total} violations")));
    }
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let result = expand_config(args).and_then(|args| {
        let cli = match Cli::try_parse_from(args) {
            Ok(cli) => cli,
            Err(e) => {
                let _ = e.print();
                return if e.exit_code() == 0 { Ok(()) } else { Err(CliError::Parse) };
            }
        };
        match cli.command {
            Command::Minimize(a) => minimize(a),
            Command::BenchQuadratic(a) => quadratic(a),
            Command::BenchNonconvex(a) => nonconvex(a),
            Command::BenchConvexRate(a) => convex_rate(a),
            Command::Validate(a) => validate(a),
        }
    });
    match result {
        Ok(()) => 0,
        Err(CliError::Parse) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
