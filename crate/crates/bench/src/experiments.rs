//! The three benchmark experiments, independent of any I/O.

use dppm::quadratic::{run_cyclic, uniform_spectrum, QuadraticModel, StepRule, UpdatePath};
use dppm::{
    accelerated_dppm, check_fejer, dppm_minimize, quadratic_objective, sinewell_objective, DirectionStrategy,
    DlcConfig, FejerReport, GeometricSchedule, SolverConfig, Status, Trace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CliError, CliResult};

/// Slack allowed above a certified bound.
pub const BOUND_SLACK: f64 = 1e-10;

/// RNG for stream `stream` of `seed`; stream 0 draws problem data, stream
/// `r + 1` belongs to run `r`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadraticRule {
    Constant(f64),
    Schedule { lambda0: f64, c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBench {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub rule: QuadraticRule,
    pub cycles: usize,
    pub seed: u64,
    pub path: UpdatePath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRow {
    pub cycle: usize,
    pub q_ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOutcome {
    pub rows: Vec<RatioRow>,
    /// Smallest diagonal entry actually drawn.
    pub m: f64,
    pub max_excess: f64,
    pub violations: usize,
}

/// Cyclic conjugate DPPM on a seeded diagonal quadratic, one row per cycle.
pub fn bench_quadratic(spec: &QuadraticBench) -> CliResult<QuadraticOutcome> {
    if spec.dim == 0 || spec.lo <= 0.0 {
        return Err(CliError::Usage("need dim >= 1 and a positive spectrum".into()));
    }
    let mut rng = rng_for(spec.seed, 0);
    let diag = uniform_spectrum(&mut rng, spec.dim, spec.lo, spec.hi)?;
    let x0 = gaussian(&mut rng, spec.dim);
    let model = QuadraticModel::diagonal(&diag)?;
    let rule = match spec.rule {
        QuadraticRule::Constant(l) => StepRule::Constant(l),
        QuadraticRule::Schedule { lambda0, c } => StepRule::Schedule(GeometricSchedule::new(lambda0, c)?),
    };
    let run = run_cyclic(&model, &x0, rule, spec.cycles, spec.path)?;
    let m = model.m();
    let rows: Vec<RatioRow> = run
        .ratios
        .iter()
        .enumerate()
        .map(|(cycle, &q_ratio)| RatioRow { cycle, q_ratio, bound: rule.cycle_bound(m, cycle) })
        .collect();
    let max_excess = rows.iter().map(|r| r.q_ratio - r.bound).fold(f64::NEG_INFINITY, f64::max);
    let violations = rows.iter().filter(|r| r.q_ratio > r.bound + BOUND_SLACK).count();
    Ok(QuadraticOutcome { rows, m, max_excess, violations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyName {
    Gradient,
    Momentum,
    Dlc,
}

impl StrategyName {
    pub const ALL: [StrategyName; 3] = [StrategyName::Gradient, StrategyName::Momentum, StrategyName::Dlc];

    pub fn parse(s: &str) -> Result<Self, String> {
        match s.trim() {
            "gradient" => Ok(StrategyName::Gradient),
            "momentum" => Ok(StrategyName::Momentum),
            "dlc" => Ok(StrategyName::Dlc),
            other => Err(format!("unknown strategy '{other}' (gradient, momentum, dlc)")),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyName::Gradient => "gradient",
            StrategyName::Momentum => "momentum",
            StrategyName::Dlc => "dlc",
        }
    }

    pub fn build(&self, beta: f64, mu: f64, seed: u64) -> DirectionStrategy {
        match self {
            StrategyName::Gradient => DirectionStrategy::Gradient,
            StrategyName::Momentum => DirectionStrategy::Momentum { beta },
            StrategyName::Dlc => DirectionStrategy::Dlc(DlcConfig { mu, seed, ..DlcConfig::default() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonconvexBench {
    pub strategies: Vec<StrategyName>,
    pub inits: Vec<Vec<f64>>,
    pub beta: f64,
    pub mu: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

/// `count` points drawn uniformly from the box `[lo, hi]^3`.
pub fn random_inits(seed: u64, count: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, 0);
    (0..count).map(|_| (0..3).map(|_| rng.random_range(lo..=hi)).collect()).collect()
}

#[derive(Debug, Clone)]
pub struct NonconvexRun {
    pub strategy: StrategyName,
    pub run: usize,
    pub trace: Trace,
    pub fejer: FejerReport,
}

/// Sinewell runs for every (strategy, init) pair, in that order. Runs execute
/// on scoped threads, each seeded from `(seed, run)` alone.
pub fn bench_nonconvex(spec: &NonconvexBench) -> CliResult<Vec<NonconvexRun>> {
    let obj = sinewell_objective();
    for x in &spec.inits {
        if x.len() != 3 {
            return Err(CliError::Usage(format!("sinewell init needs 3 coordinates, got {}", x.len())));
        }
    }
    let jobs: Vec<(StrategyName, usize)> =
        spec.strategies.iter().flat_map(|&s| (0..spec.inits.len()).map(move |r| (s, r))).collect();
    let results: Vec<CliResult<NonconvexRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(name, run)| {
                let obj = &obj;
                scope.spawn(move || {
                    let seed = rng_for(spec.seed, run as u64 + 1).random::<u64>();
                    let strategy = name.build(spec.beta, spec.mu, seed);
                    let cfg =
                        SolverConfig { max_iter: spec.max_iter, tol_grad: spec.tol, seed, ..SolverConfig::default() };
                    let trace = dppm_minimize(obj, &spec.inits[run], &strategy, &cfg)?;
                    let fejer = check_fejer(&trace, &[0.0; 3]);
                    Ok(NonconvexRun { strategy: name, run, trace, fejer })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRateBench {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub lambda: f64,
    pub iters: usize,
    pub accelerate: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub k: usize,
    pub f_gap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct RateOutcome {
    pub rows: Vec<RateRow>,
    pub status: Status,
    pub descent_violations: usize,
    pub violations: usize,
    pub max_excess: f64,
    /// Log-log slope of the gap over `k` in `[10, 200]`.
    pub slope: Option<f64>,
}

/// Gradient DPPM with constant `t = lambda` on a seeded diagonal quadratic,
/// plain or accelerated, against its `O(1/k)` or `O(1/k^2)` bound.
pub fn bench_convex_rate(spec: &ConvexRateBench) -> CliResult<RateOutcome> {
    if spec.dim == 0 || spec.lo <= 0.0 {
        return Err(CliError::Usage("need dim >= 1 and a positive spectrum".into()));
    }
    let mut rng = rng_for(spec.seed, 0);
    let diag = uniform_spectrum(&mut rng, spec.dim, spec.lo, spec.hi)?;
    let x0 = gaussian(&mut rng, spec.dim);
    let obj = quadratic_objective(&diag)?;
    let cfg = SolverConfig {
        convex_mode: true,
        lambda_const: spec.lambda,
        max_iter: spec.iters,
        tol_grad: 0.0,
        seed: spec.seed,
        ..SolverConfig::default()
    };
    let r2: f64 = x0.iter().map(|v| v * v).sum();
    let trace = if spec.accelerate {
        accelerated_dppm(&obj, &x0, &DirectionStrategy::Gradient, &cfg)?
    } else {
        dppm_minimize(&obj, &x0, &DirectionStrategy::Gradient, &cfg)?
    };
    let rows: Vec<RateRow> = trace
        .records
        .iter()
        .skip(1)
        .map(|r| {
            let bound = match r.bound {
                Some(b) if spec.accelerate => b,
                _ => r2 / (2.0 * spec.lambda * r.k as f64),
            };
            RateRow { k: r.k, f_gap: r.f, bound }
        })
        .collect();
    let max_excess = rows.iter().map(|r| r.f_gap - r.bound).fold(f64::NEG_INFINITY, f64::max);
    let violations = rows.iter().filter(|r| r.f_gap > r.bound).count();
    let slope = loglog_slope(rows.iter().filter(|r| (10..=200).contains(&r.k)).map(|r| (r.k as f64, r.f_gap)));
    Ok(RateOutcome {
        rows,
        status: trace.status,
        descent_violations: trace.descent_violations,
        violations,
        max_excess,
        slope,
    })
}

/// Least-squares slope of `ln y` against `ln x` over the positive points.
pub fn loglog_slope(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.filter(|&(x, y)| x > 0.0 && y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
