//! Invariant suites checked against independent oracles.

use dppm::dlc::{DualQuadratic, Linearization};
use dppm::quadratic::{eigen_check, rank_one_inverse_apply, SymmetricMatrix};
use dppm::{
    check_fejer, detect_convex_segment, dppm_minimize, figure1_objective, golden_section_min, prox_step,
    quadratic_objective, select_t, sinewell_objective, DirectionStrategy, Objective, ProxConfig, SolverConfig,
    DESCENT_SLACK,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::experiments::{gaussian, random_inits, rng_for, StrategyName};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    RankOne,
    Prox,
    Dlc,
    Descent,
    Fejer,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::RankOne, Suite::Prox, Suite::Dlc, Suite::Descent, Suite::Fejer];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::RankOne => "lemma8",
            Suite::Prox => "prox",
            Suite::Dlc => "dlc",
            Suite::Descent => "descent",
            Suite::Fejer => "fejer",
        }
    }

    /// `all` expands to every suite.
    pub fn parse(s: &str) -> Result<Vec<Suite>, String> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .map(|x| vec![x])
            .ok_or_else(|| format!("unknown suite '{s}' (lemma8, prox, dlc, descent, fejer, all)"))
    }

    pub fn run(&self, seed: u64) -> SuiteReport {
        match self {
            Suite::RankOne => rank_one(seed, 100),
            Suite::Prox => prox(seed, 200),
            Suite::Dlc => dual(seed, 1000),
            Suite::Descent => descent(seed),
            Suite::Fejer => fejer(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checked: usize,
    pub violations: usize,
    /// Largest observed value of the suite's primary error measure.
    pub worst: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let v = gaussian(rng, n);
    let s = dot(&v, &v).sqrt();
    v.iter().map(|x| x / s).collect()
}

/// `A'A + n I` for a Gaussian `A`.
fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let m = a.transpose() * &a + DMatrix::identity(n, n) * n as f64;
    (&m + m.transpose()) * 0.5
}

/// Rank-one inverse formula against a dense LU inverse: per-coordinate error
/// at most 1e-10 and eigen residual at most 1e-12, over `count` matrices of
/// size 10 and `t` in {0.1, 1, 10}.
pub fn rank_one(seed: u64, count: usize) -> SuiteReport {
    let mut rng = rng_for(seed, 0);
    let n = 10;
    let (mut checked, mut violations, mut worst) = (0, 0, 0.0f64);
    for _ in 0..count {
        let q = random_spd(&mut rng, n);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| q.row(i).iter().copied().collect()).collect();
        let qs = SymmetricMatrix::from_rows(&rows).expect("symmetrized");
        let p = unit(&mut rng, n);
        let x = gaussian(&mut rng, n);
        for t in [0.1, 1.0, 10.0] {
            checked += 1;
            let pv = DVector::from_vec(p.clone());
            let m = DMatrix::identity(n, n) + (&pv * pv.transpose() * &q) * t;
            let Some(inv) = m.lu().try_inverse() else {
                violations += 1;
                continue;
            };
            let dense = inv * DVector::from_vec(x.clone());
            let ok = match (rank_one_inverse_apply(&qs, &p, t, &x), eigen_check(&qs, &p, t)) {
                (Ok(formula), Ok(check)) => {
                    let err = formula.iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    worst = worst.max(err);
                    err <= 1e-10 && check.residual <= 1e-12 && check.orthogonal_residual <= 1e-12
                }
                _ => false,
            };
            if !ok {
                violations += 1;
            }
        }
    }
    SuiteReport { suite: "lemma8", checked, violations, worst }
}

fn rosenbrock() -> Objective {
    Objective::new(
        2,
        |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
        |x| vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0])],
    )
}

/// Seeded (objective, point, unit descent direction) triples with a detected
/// convex segment.
pub fn prox_cases(seed: u64, count: usize) -> Vec<(Objective, Vec<f64>, Vec<f64>, f64)> {
    let mut rng = rng_for(seed, 0);
    let objectives = [
        sinewell_objective(),
        figure1_objective(),
        rosenbrock(),
        quadratic_objective(&[1.0, 4.0, 9.0, 0.5]).expect("positive"),
    ];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let obj = objectives[rng.random_range(0..objectives.len())].clone();
        let n = obj.dim();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = obj.grad(&x);
        let gn = dot(&g, &g).sqrt();
        let q = gaussian(&mut rng, n);
        if gn == 0.0 {
            continue;
        }
        let mix = rng.random_range(0.0..1.0);
        let raw: Vec<f64> = g.iter().zip(&q).map(|(gi, qi)| -gi / gn + mix * qi).collect();
        let s = dot(&raw, &raw).sqrt();
        let p: Vec<f64> = raw.iter().map(|r| r / s).collect();
        if dot(&p, &g) >= 0.0 {
            continue;
        }
        if let Ok(v) = detect_convex_segment(&obj, &x, &p, 2) {
            out.push((obj, x, p, v));
        }
    }
    out
}

/// Golden section and the full prox step against a dense grid argmin with
/// step `v * 1e-5`; interior steps must also have residual at most 1e-6.
pub fn prox(seed: u64, count: usize) -> SuiteReport {
    let (mut violations, mut worst) = (0, 0.0f64);
    for (obj, x, p, v) in prox_cases(seed, count) {
        let g = obj.grad(&x);
        let gdot = dot(&p, &g);
        let fx = obj.eval(&x);
        let ok = (|| {
            let t = select_t(v, gdot).ok()?;
            let phi = |w: f64| {
                let u: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + w * b).collect();
                w * w / (2.0 * t) + (obj.eval(&u) - fx)
            };
            let h = v * 1e-5;
            let (mut best, mut arg) = (f64::INFINITY, 0.0);
            for i in 0..=100_000 {
                let w = i as f64 * h;
                let val = phi(w);
                if val < best {
                    best = val;
                    arg = w;
                }
            }
            let w_gs = golden_section_min(phi, 0.0, v, 1e-10 * v).ok()?;
            let step = prox_step(&obj, &x, &p, &ProxConfig::default()).ok()?;
            let err = (w_gs - arg).abs().max((step.w_star - arg).abs()) / h;
            worst = worst.max(err);
            let residual_ok = !step.interior || step.residual.abs() <= 1e-6;
            Some(err <= 2.0 && residual_ok)
        })();
        if ok != Some(true) {
            violations += 1;
        }
    }
    SuiteReport { suite: "prox", checked: count, violations, worst }
}

/// Dual value evaluated straight from the vectors.
fn direct_value(lin: &Linearization, mu: f64, l1: f64, l2: f64) -> f64 {
    let s: Vec<f64> =
        (0..lin.grad_g0.len()).map(|i| lin.grad_g0[i] + l1 * lin.grad_g1[i] + l2 * lin.grad_g2[i]).collect();
    l1 * lin.g1 + l2 * lin.g2 - dot(&s, &s) / (2.0 * mu)
}

/// Exact maximum of the dual over the grid `{0, h, ..}^2 ∩ [0, hi]^2`. Each
/// row is a concave parabola in `l1`, so only the grid points next to its
/// vertex and the row ends are candidates.
pub fn grid_max(lin: &Linearization, mu: f64, hi: f64, h: f64) -> f64 {
    let steps = (hi / h).round() as i64;
    let g11 = dot(&lin.grad_g1, &lin.grad_g1);
    let mut best = f64::NEG_INFINITY;
    for j in 0..=steps {
        let l2 = j as f64 * h;
        let s: Vec<f64> = (0..lin.grad_g0.len()).map(|i| lin.grad_g0[i] + l2 * lin.grad_g2[i]).collect();
        let slope = lin.g1 - dot(&s, &lin.grad_g1) / mu;
        let mut idx = vec![0, steps];
        if g11 > 0.0 {
            let vertex = slope * mu / g11 / h;
            if vertex.is_finite() {
                let v = vertex.floor() as i64;
                idx.extend([v - 1, v, v + 1, v + 2]);
            }
        }
        for i in idx.into_iter().filter(|i| (0..=steps).contains(i)) {
            best = best.max(direct_value(lin, mu, i as f64 * h, l2));
        }
    }
    best
}

/// Active-set dual maximizer against the grid maximum over `[0, 50]^2` with
/// step 1e-2, on `count` random instances with `n = 5`.
pub fn dual(seed: u64, count: usize) -> SuiteReport {
    let mut rng = rng_for(seed, 0);
    let (mut violations, mut worst) = (0, f64::NEG_INFINITY);
    for _ in 0..count {
        let lin = Linearization {
            g1: rng.random_range(-5.0..5.0),
            g2: rng.random_range(-5.0..5.0),
            grad_g0: gaussian(&mut rng, 5),
            grad_g1: gaussian(&mut rng, 5),
            grad_g2: gaussian(&mut rng, 5),
        };
        let mu = rng.random_range(0.5..20.0);
        let Ok(lam) = DualQuadratic::from_linearization(&lin, mu).maximize() else {
            violations += 1;
            continue;
        };
        let d = direct_value(&lin, mu, lam.lambda1, lam.lambda2);
        let gap = grid_max(&lin, mu, 50.0, 1e-2) - d;
        worst = worst.max(gap);
        if gap > 1e-4 || lam.lambda1 < 0.0 || lam.lambda2 < 0.0 {
            violations += 1;
        }
    }
    SuiteReport { suite: "dlc", checked: count, violations, worst }
}

fn sinewell_runs(seed: u64) -> Vec<dppm::Trace> {
    let obj = sinewell_objective();
    let mut inits = vec![vec![0.0, 0.0, 30.0]];
    inits.extend(random_inits(seed, 3, 10.0, 40.0));
    let mut traces = Vec::new();
    for (run, x0) in inits.iter().enumerate() {
        let run_seed = rng_for(seed, run as u64 + 1).random::<u64>();
        for name in StrategyName::ALL {
            let cfg = SolverConfig { seed: run_seed, ..SolverConfig::default() };
            if let Ok(t) = dppm_minimize(&obj, x0, &name.build(0.6, 1000.0, run_seed), &cfg) {
                traces.push(t);
            }
        }
    }
    traces
}

/// Per-step descent inequality over sinewell runs of every strategy and over
/// constant-`t` quadratic runs.
pub fn descent(seed: u64) -> SuiteReport {
    let mut traces = sinewell_runs(seed);
    let mut rng = rng_for(seed, 99);
    for _ in 0..20 {
        let diag: Vec<f64> = (0..10).map(|_| rng.random_range(1.0..100.0)).collect();
        let obj = quadratic_objective(&diag).expect("positive");
        let x0 = gaussian(&mut rng, 10);
        let cfg = SolverConfig { convex_mode: true, lambda_const: 0.01, max_iter: 500, ..SolverConfig::default() };
        if let Ok(t) = dppm_minimize(&obj, &x0, &DirectionStrategy::Gradient, &cfg) {
            traces.push(t);
        }
    }
    let mut checked = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for t in &traces {
        for r in t.records.iter().skip(1) {
            checked += 1;
            worst = worst.max(r.descent_gap);
            if r.descent_gap > DESCENT_SLACK {
                violations += 1;
            }
        }
    }
    SuiteReport { suite: "descent", checked, violations, worst }
}

/// Sinewell runs must converge and end Fejér monotone towards the origin.
pub fn fejer(seed: u64) -> SuiteReport {
    let traces = sinewell_runs(seed);
    let mut violations = 12 - traces.len();
    let mut worst = 0.0f64;
    for t in &traces {
        let rep = check_fejer(t, &[0.0; 3]);
        worst = worst.max(rep.max_increase);
        if !rep.holds || t.status != dppm::Status::Converged {
            violations += 1;
        }
    }
    SuiteReport { suite: "fejer", checked: 12, violations, worst }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!(Suite::parse("all").unwrap().len(), 5);
        assert_eq!(Suite::parse("prox").unwrap(), vec![Suite::Prox]);
        assert!(Suite::parse("lemma9").is_err());
    }

    #[test]
    fn small_rank_one_and_dual_runs_are_clean() {
        assert_eq!(rank_one(3, 5).violations, 0);
        assert_eq!(dual(3, 20).violations, 0);
    }

    #[test]
    fn grid_max_finds_a_known_vertex() {
        // d(l1, l2) = l1 + l2 - (l1^2 + l2^2) / 2, maximum 1 at (1, 1)
        let lin = Linearization {
            g1: 1.0,
            g2: 1.0,
            grad_g0: vec![0.0, 0.0],
            grad_g1: vec![1.0, 0.0],
            grad_g2: vec![0.0, 1.0],
        };
        assert!((grid_max(&lin, 1.0, 5.0, 0.01) - 1.0).abs() < 1e-12);
    }
}
