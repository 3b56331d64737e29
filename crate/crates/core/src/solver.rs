//! The DPPM main loop, its accelerated variant and trace checks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dlc::{find_dlc_direction_with_rng, DlcConfig};
use crate::error::{DppmError, Result};
use crate::objective::Objective;
use crate::prox::{prox_step, ProxConfig, ProxStep};
use crate::vector::{add_scaled, dist, dot, is_finite, norm, normalized, random_unit, scale, sub};

/// Records kept per run before the trace starts thinning.
const MAX_RECORDS: usize = 1_000_000;

/// Slack of the per-step descent inequality.
pub const DESCENT_SLACK: f64 = 1e-10;

/// Rule producing the search direction at each iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionStrategy {
    Gradient,
    /// Normalized blend `beta * previous + (1 - beta) * gradient direction`.
    Momentum {
        beta: f64,
    },
    Dlc(DlcConfig),
    /// Unit vectors used in turn, each signed to point downhill.
    CyclicConjugate {
        basis: Vec<Vec<f64>>,
    },
}

impl DirectionStrategy {
    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            DirectionStrategy::Momentum { beta } if !(*beta > 0.0 && *beta < 1.0) => {
                Err(DppmError::InvalidParameter(format!("momentum beta must lie in (0, 1), got {beta}")))
            }
            DirectionStrategy::CyclicConjugate { basis } => {
                if basis.is_empty() {
                    return Err(DppmError::InvalidParameter("empty conjugate basis".into()));
                }
                for g in basis {
                    if g.len() != dim {
                        return Err(DppmError::DimensionMismatch { expected: dim, got: g.len() });
                    }
                    if (norm(g) - 1.0).abs() > 1e-10 {
                        return Err(DppmError::InvalidParameter("basis vectors must have unit length".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Coarse tag used in traces and reports.
    pub fn label(&self) -> &'static str {
        match self {
            DirectionStrategy::Gradient => "gradient",
            DirectionStrategy::Momentum { .. } => "momentum",
            DirectionStrategy::Dlc(_) => "dlc",
            DirectionStrategy::CyclicConjugate { .. } => "cyclic",
        }
    }
}

/// How the accepted direction of an iteration was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    Gradient,
    Momentum,
    Dlc,
    /// The DLC program failed and the gradient direction was used instead.
    DlcFallback,
    Conjugate,
    /// The strategy direction failed its segment or descent test and a
    /// perturbed copy was accepted.
    Perturbed,
    /// Cyclic position whose basis vector is orthogonal to the gradient.
    Skip,
}

impl DirectionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DirectionKind::Gradient => "gradient",
            DirectionKind::Momentum => "momentum",
            DirectionKind::Dlc => "dlc",
            DirectionKind::DlcFallback => "dlc_fallback",
            DirectionKind::Conjugate => "conjugate",
            DirectionKind::Perturbed => "perturbed",
            DirectionKind::Skip => "skip",
        }
    }
}

/// `lambda(k) = lambda0 * c^k` for cycle `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricSchedule {
    pub lambda0: f64,
    pub c: f64,
}

impl GeometricSchedule {
    pub fn new(lambda0: f64, c: f64) -> Result<Self> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(DppmError::InvalidSchedule(c));
        }
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(DppmError::InvalidParameter(format!("lambda0 must be positive, got {lambda0}")));
        }
        Ok(GeometricSchedule { lambda0, c })
    }

    pub fn lambda(&self, cycle: usize) -> f64 {
        self.lambda0 * self.c.powi(cycle as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol_grad: f64,
    pub tau: u32,
    /// Use a fixed `t` (or the schedule) instead of the segment probe.
    pub convex_mode: bool,
    pub lambda_const: f64,
    /// Per-cycle schedule, a cycle being `dim` iterations.
    pub lambda_schedule: Option<GeometricSchedule>,
    pub perturb_scale: f64,
    /// Perturbed redraws after a failed direction; the scale grows tenfold per redraw.
    pub max_retries: usize,
    pub seed: u64,
    pub tol_w: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 100_000,
            tol_grad: 1e-6,
            tau: 2,
            convex_mode: false,
            lambda_const: 1.0,
            lambda_schedule: None,
            perturb_scale: 0.01,
            max_retries: 10,
            seed: 0,
            tol_w: 1e-10,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol_grad >= 0.0) {
            return Err(DppmError::InvalidParameter(format!("tol_grad must be nonnegative, got {}", self.tol_grad)));
        }
        if self.convex_mode && !(self.lambda_const > 0.0 && self.lambda_const.is_finite()) {
            return Err(DppmError::InvalidParameter(format!(
                "lambda_const must be positive, got {}",
                self.lambda_const
            )));
        }
        if let Some(s) = self.lambda_schedule {
            GeometricSchedule::new(s.lambda0, s.c)?;
        }
        if !(self.perturb_scale >= 0.0) {
            return Err(DppmError::InvalidParameter(format!(
                "perturb_scale must be nonnegative, got {}",
                self.perturb_scale
            )));
        }
        Ok(())
    }

    fn t_at(&self, k: usize, dim: usize) -> Option<f64> {
        if !self.convex_mode {
            return None;
        }
        Some(match self.lambda_schedule {
            Some(s) => s.lambda(k / dim),
            None => self.lambda_const,
        })
    }
}

/// One iterate of a run. Record 0 is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub k: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    /// Step length that produced this iterate.
    pub w: f64,
    pub t: f64,
    pub v: f64,
    pub direction_kind: Option<DirectionKind>,
    /// `w / t + p'grad f(x)` at this iterate.
    pub residual: f64,
    /// `f(x) - (f(x_prev) - t |p'grad f(x)|^2)`; nonpositive up to slack.
    pub descent_gap: f64,
    /// Certified suboptimality bound, accelerated runs only.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIter,
    Degenerate,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<Record>,
    pub status: Status,
    /// Iterations performed, equal to the last record's `k`.
    pub iterations: usize,
    /// Perturbed redraws over the whole run.
    pub retries: usize,
    /// Accepted steps whose descent gap exceeds [`DESCENT_SLACK`].
    pub descent_violations: usize,
    /// Every `stride`-th iterate is stored (plus the last one).
    pub stride: usize,
}

impl Trace {
    pub fn last(&self) -> &Record {
        self.records.last().expect("trace always holds the starting point")
    }

    pub fn final_point(&self) -> &[f64] {
        &self.last().x
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f).collect()
    }
}

struct Recorder {
    records: Vec<Record>,
    stride: usize,
    pending: Option<Record>,
}

impl Recorder {
    fn new(max_iter: usize) -> Self {
        let stride = max_iter.saturating_add(1).div_ceil(MAX_RECORDS).max(1);
        Recorder { records: Vec::new(), stride, pending: None }
    }

    fn push(&mut self, record: Record) {
        if record.k.is_multiple_of(self.stride) {
            self.records.push(record);
            self.pending = None;
        } else {
            self.pending = Some(record);
        }
    }

    fn finish(mut self) -> (Vec<Record>, usize) {
        if let Some(r) = self.pending.take() {
            self.records.push(r);
        }
        (self.records, self.stride)
    }
}

fn start_record(obj: &Objective, x: &[f64]) -> Record {
    Record {
        k: 0,
        x: x.to_vec(),
        f: obj.eval(x),
        grad_norm: norm(&obj.grad(x)),
        w: 0.0,
        t: 0.0,
        v: 0.0,
        direction_kind: None,
        residual: 0.0,
        descent_gap: 0.0,
        bound: None,
    }
}

/// `-grad f(x) / |grad f(x)|`.
pub fn gradient_direction(obj: &Objective, x: &[f64]) -> Result<Vec<f64>> {
    obj.check_dim(x)?;
    let g = obj.grad(x);
    unit_descent(&g)
}

fn unit_descent(g: &[f64]) -> Result<Vec<f64>> {
    let n = norm(g);
    if n == 0.0 {
        return Err(DppmError::Stationary);
    }
    if !n.is_finite() {
        return Err(DppmError::NonFinite(n));
    }
    Ok(scale(-1.0 / n, g))
}

/// Normalized `beta * prev + (1 - beta) * gradient_direction`, falling back to
/// the gradient direction when the blend is not a descent direction.
pub fn momentum_direction(obj: &Objective, x: &[f64], prev_dir: Option<&[f64]>, beta: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(DppmError::InvalidParameter(format!("momentum beta must lie in (0, 1), got {beta}")));
    }
    obj.check_dim(x)?;
    let g = obj.grad(x);
    let d = unit_descent(&g)?;
    let Some(prev) = prev_dir else {
        return Ok(d);
    };
    obj.check_dim(prev)?;
    let blend = add_scaled(&scale(1.0 - beta, &d), beta, prev);
    match normalized(&blend) {
        Some(p) if dot(&p, &g) < 0.0 => Ok(p),
        _ => Ok(d),
    }
}

/// `normalize(dir + scale * q)` for a random unit `q` orthogonal to `dir`
/// (any unit `q` in one dimension). Orthogonal draws make the tilt angle
/// `atan(scale)` exact, so a growing scale sweeps directions away from `dir`.
pub fn perturb_direction<R: Rng + ?Sized>(dir: &[f64], scale: f64, rng: &mut R) -> Vec<f64> {
    if scale == 0.0 {
        return dir.to_vec();
    }
    let q = orthogonal_unit(dir, rng);
    normalized(&add_scaled(dir, scale, &q)).unwrap_or_else(|| dir.to_vec())
}

fn orthogonal_unit<R: Rng + ?Sized>(dir: &[f64], rng: &mut R) -> Vec<f64> {
    orthogonal_to(&[dir.to_vec()], rng).expect("complement of one vector is nonempty")
}

/// Random unit vector orthogonal to every vector in `span` (Gram-Schmidt on
/// a Gaussian draw), or `None` when `span` already fills the space.
fn orthogonal_to<R: Rng + ?Sized>(span: &[Vec<f64>], rng: &mut R) -> Option<Vec<f64>> {
    let dim = span.first()?.len();
    if dim == 1 {
        return Some(random_unit(rng, 1));
    }
    if span.len() >= dim {
        return None;
    }
    for _ in 0..16 {
        let mut q = random_unit(rng, dim);
        for _ in 0..2 {
            for b in span {
                let bb = dot(b, b);
                if bb > 0.0 {
                    q = add_scaled(&q, -dot(&q, b) / bb, b);
                }
            }
        }
        if norm(&q) > 1e-8 {
            return normalized(&q);
        }
    }
    None
}

/// Perturbation for a retry that keeps descent. `q` is drawn orthogonal to
/// `dir` and to the perturbations that already failed at this iterate, and
/// reflected when `dir + scale q` points uphill.
fn perturb_descent<R: Rng + ?Sized>(
    dir: &[f64],
    g: &[f64],
    scale: f64,
    failed: &mut Vec<Vec<f64>>,
    rng: &mut R,
) -> Option<Vec<f64>> {
    let q = match orthogonal_to(failed, rng) {
        Some(q) => q,
        None => {
            failed.truncate(1);
            orthogonal_to(failed, rng)?
        }
    };
    failed.push(q.clone());
    [scale, -scale].into_iter().filter_map(|s| normalized(&add_scaled(dir, s, &q))).find(|p| dot(p, g) < 0.0)
}

/// Cyclic position `k mod n`: the basis vector signed to point downhill, or
/// `None` when it is orthogonal to the gradient up to roundoff.
fn cyclic_direction(basis: &[Vec<f64>], g: &[f64], k: usize) -> Option<Vec<f64>> {
    let b = &basis[k % basis.len()];
    let s = dot(b, g);
    if s.abs() <= 1e-14 * norm(g) {
        return None;
    }
    Some(if s < 0.0 { b.clone() } else { scale(-1.0, b) })
}

struct Stepper<'a> {
    obj: &'a Objective,
    strategy: &'a DirectionStrategy,
    config: &'a SolverConfig,
    rng: StdRng,
    prev_dir: Option<Vec<f64>>,
    retries: usize,
}

enum Outcome {
    Step { step: ProxStep, kind: DirectionKind },
    Skip,
    Degenerate,
}

impl<'a> Stepper<'a> {
    fn new(obj: &'a Objective, strategy: &'a DirectionStrategy, config: &'a SolverConfig) -> Self {
        Stepper { obj, strategy, config, rng: StdRng::seed_from_u64(config.seed), prev_dir: None, retries: 0 }
    }

    fn base_direction(&mut self, x: &[f64], g: &[f64], k: usize) -> Result<Option<(Vec<f64>, DirectionKind)>> {
        Ok(Some(match self.strategy {
            DirectionStrategy::Gradient => (unit_descent(g)?, DirectionKind::Gradient),
            DirectionStrategy::Momentum { beta } => {
                let d = momentum_direction(self.obj, x, self.prev_dir.as_deref(), *beta)?;
                (d, DirectionKind::Momentum)
            }
            DirectionStrategy::Dlc(cfg) => {
                let r = find_dlc_direction_with_rng(self.obj, x, cfg, &mut self.rng)?;
                let kind = if r.converged { DirectionKind::Dlc } else { DirectionKind::DlcFallback };
                (r.direction, kind)
            }
            DirectionStrategy::CyclicConjugate { basis } => match cyclic_direction(basis, g, k) {
                Some(d) => (d, DirectionKind::Conjugate),
                None => return Ok(None),
            },
        }))
    }

    /// Direction and proximal step for iteration `k` from `x`, retrying with
    /// growing perturbations when the segment or descent test fails.
    fn advance(&mut self, x: &[f64], fx: f64, g: &[f64], k: usize) -> Result<Outcome> {
        let Some((base, base_kind)) = self.base_direction(x, g, k)? else {
            return Ok(Outcome::Skip);
        };
        let prox = ProxConfig {
            tau: self.config.tau,
            tol_w: self.config.tol_w,
            t_override: self.config.t_at(k, self.obj.dim()),
        };
        let mut scale = self.config.perturb_scale;
        let mut failed = vec![base.clone()];
        for attempt in 0..=self.config.max_retries {
            let (dir, kind) = if attempt == 0 {
                (base.clone(), base_kind)
            } else {
                self.retries += 1;
                let d = perturb_descent(&base, g, scale, &mut failed, &mut self.rng);
                scale *= 10.0;
                match d {
                    Some(d) => (d, DirectionKind::Perturbed),
                    None => continue,
                }
            };
            match prox_step(self.obj, x, &dir, &prox) {
                Ok(step) => {
                    let gap = descent_gap(fx, &step);
                    if gap <= DESCENT_SLACK && is_finite(&step.next) {
                        self.prev_dir = Some(dir.clone());
                        return Ok(Outcome::Step { step, kind });
                    }
                }
                Err(DppmError::DegenerateSegment | DppmError::NonDescent(_) | DppmError::NonFinite(_)) => {}
                Err(e) => return Err(e),
            }
            if self.config.perturb_scale == 0.0 {
                break;
            }
        }
        Ok(Outcome::Degenerate)
    }
}

fn descent_gap(fx: f64, step: &ProxStep) -> f64 {
    step.phi_next - (fx - step.t * step.gdot_next * step.gdot_next)
}

/// Minimizes `obj` from `x0` with DPPM steps along directions from `strategy`.
///
/// A step is accepted only when it satisfies the descent inequality
/// `f(x+) <= f(x) - t |p'grad f(x+)|^2` up to [`DESCENT_SLACK`]; otherwise, or
/// when the segment probe is degenerate, the direction is perturbed and
/// retried. Runs stop once `|grad f| <= tol_grad`.
pub fn dppm_minimize(
    obj: &Objective,
    x0: &[f64],
    strategy: &DirectionStrategy,
    config: &SolverConfig,
) -> Result<Trace> {
    obj.check_dim(x0)?;
    if !is_finite(x0) {
        return Err(DppmError::InvalidParameter("starting point must be finite".into()));
    }
    config.validate()?;
    strategy.validate(obj.dim())?;

    let mut stepper = Stepper::new(obj, strategy, config);
    let mut recorder = Recorder::new(config.max_iter);
    let mut x = x0.to_vec();
    let mut fx = obj.eval(&x);
    let mut g = obj.grad(&x);
    recorder.push(start_record(obj, &x));
    let mut violations = 0;
    let mut status = Status::MaxIter;
    let mut k = 0;

    while k < config.max_iter {
        if norm(&g) <= config.tol_grad {
            status = Status::Converged;
            break;
        }
        let outcome = stepper.advance(&x, fx, &g, k)?;
        k += 1;
        let record = match outcome {
            Outcome::Degenerate => {
                k -= 1;
                status = Status::Degenerate;
                break;
            }
            Outcome::Skip => Record { k, direction_kind: Some(DirectionKind::Skip), ..start_record(obj, &x) },
            Outcome::Step { step, kind, .. } => {
                let gap = descent_gap(fx, &step);
                if gap > DESCENT_SLACK {
                    violations += 1;
                }
                x = step.next;
                fx = step.phi_next;
                g = obj.grad(&x);
                Record {
                    k,
                    x: x.clone(),
                    f: fx,
                    grad_norm: norm(&g),
                    w: step.w_star,
                    t: step.t,
                    v: step.v,
                    direction_kind: Some(kind),
                    residual: step.residual,
                    descent_gap: gap,
                    bound: None,
                }
            }
        };
        recorder.push(record);
    }
    if status == Status::MaxIter && norm(&g) <= config.tol_grad {
        status = Status::Converged;
    }
    let (records, stride) = recorder.finish();
    Ok(Trace { records, status, iterations: k, retries: stepper.retries, descent_violations: violations, stride })
}

/// Accelerated DPPM for convex objectives with a constant `t`.
///
/// With `theta_k = 2 / (k + 1)` and `z_1 = x_0`, iteration `k` evaluates the
/// DPPM step `x_k = prox(y)` from `y = (1 - theta_k) x_{k-1} + theta_k z_k`
/// and extrapolates `z_{k+1} = (1 - 1/theta_k) x_{k-1} + (1/theta_k) x_k`.
/// Since `theta_1 = 1` the first step is a plain DPPM step. When the
/// objective carries its optimum, record `k` holds the bound
/// `(theta_k^2 / t) |x_0 - x*|^2`.
pub fn accelerated_dppm(
    obj: &Objective,
    x0: &[f64],
    strategy: &DirectionStrategy,
    config: &SolverConfig,
) -> Result<Trace> {
    obj.check_dim(x0)?;
    if !is_finite(x0) {
        return Err(DppmError::InvalidParameter("starting point must be finite".into()));
    }
    if !config.convex_mode || config.lambda_schedule.is_some() {
        return Err(DppmError::InvalidParameter("acceleration needs convex mode with a constant t".into()));
    }
    config.validate()?;
    strategy.validate(obj.dim())?;

    let t = config.lambda_const;
    let radius2 = obj.optimum_point().map(|xs| {
        let d = dist(x0, xs);
        d * d
    });
    let bound_at = |k: usize| {
        radius2.map(|r2| {
            let theta = 2.0 / (k as f64 + 1.0);
            theta * theta / t * r2
        })
    };

    let mut stepper = Stepper::new(obj, strategy, config);
    let mut recorder = Recorder::new(config.max_iter);
    let mut x = x0.to_vec();
    let mut z = x0.to_vec();
    let mut g = obj.grad(&x);
    recorder.push(Record { bound: bound_at(0), ..start_record(obj, &x) });
    let mut violations = 0;
    let mut status = Status::MaxIter;
    let mut k = 0;

    while k < config.max_iter {
        if norm(&g) <= config.tol_grad {
            status = Status::Converged;
            break;
        }
        let theta = 2.0 / (k as f64 + 2.0);
        let y = add_scaled(&scale(1.0 - theta, &x), theta, &z);
        let gy = obj.grad(&y);
        let fy = obj.eval(&y);
        let (next, record) = if norm(&gy) == 0.0 {
            (y.clone(), None)
        } else {
            match stepper.advance(&y, fy, &gy, k)? {
                Outcome::Degenerate => {
                    status = Status::Degenerate;
                    break;
                }
                Outcome::Skip => (y.clone(), None),
                Outcome::Step { step, kind, .. } => {
                    let gap = descent_gap(fy, &step);
                    if gap > DESCENT_SLACK {
                        violations += 1;
                    }
                    let partial = (step.w_star, step.t, step.v, kind, step.residual, gap);
                    (step.next, Some(partial))
                }
            }
        };
        k += 1;
        z = add_scaled(&x, 1.0 / theta, &sub(&next, &x));
        x = next;
        g = obj.grad(&x);
        let base = Record { k, bound: bound_at(k), ..start_record(obj, &x) };
        recorder.push(match record {
            Some((w, t, v, kind, residual, gap)) => {
                Record { w, t, v, direction_kind: Some(kind), residual, descent_gap: gap, ..base }
            }
            None => Record { direction_kind: Some(DirectionKind::Skip), ..base },
        });
    }
    if status == Status::MaxIter && norm(&g) <= config.tol_grad {
        status = Status::Converged;
    }
    let (records, stride) = recorder.finish();
    Ok(Trace { records, status, iterations: k, retries: stepper.retries, descent_violations: violations, stride })
}

/// Distance monotonicity of a trace towards a reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct FejerReport {
    pub holds: bool,
    /// First record index from which `|x_{k+1} - x*| <= |x_k - x*| + 1e-12`
    /// holds for every later record.
    pub k0: usize,
    /// Steps violating the inequality anywhere in the trace.
    pub violations: usize,
    pub max_increase: f64,
}

/// Checks `|x_{k+1} - x*| <= |x_k - x*| + 1e-12` along the stored records.
///
/// `holds` is false only when the final stored step still moves away from
/// `x_star`, so that no tail of the trace is monotone.
pub fn check_fejer(trace: &Trace, x_star: &[f64]) -> FejerReport {
    let d: Vec<f64> = trace.records.iter().map(|r| dist(&r.x, x_star)).collect();
    let mut k0 = 0;
    let mut violations = 0;
    let mut max_increase = 0.0f64;
    for i in 1..d.len() {
        let inc = d[i] - d[i - 1];
        max_increase = max_increase.max(inc);
        if inc > 1e-12 {
            violations += 1;
            k0 = i;
        }
    }
    FejerReport { holds: d.len() < 2 || k0 + 1 < d.len(), k0, violations, max_increase }
}
