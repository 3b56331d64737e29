//! Search for directionally-locally-convex (DLC) descent directions.
//!
//! At a non-critical point `x` we look for the shortest step `p` whose end
//! point drops below the tangent plane of `f` at `x`:
//!
//! ```text
//!     min  g0(p) = |p|^2 / 2
//!     s.t. g1(p) = f(x + p) + delta - f(x) - grad f(x)'p <= 0
//!          g2(p) = grad f(x)'p                            <= 0
//! ```
//!
//! The segment from `x` towards such a point carries a convex piece of `f`.
//! The program is solved by penalized linearization around the current
//! estimate `p0`. Each linearized subproblem has a two-variable concave dual
//! which is maximized exactly over the nonnegative quadrant by enumerating
//! its four active sets, independent of the dimension of `x`.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{DppmError, Result};
use crate::objective::Objective;
use crate::vector::{add_scaled, axpy, dot, is_finite, norm, normalized, random_unit, scale, sub};

/// Point `(lambda1, lambda2)` in the nonnegative quadrant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl DualPoint {
    pub const ZERO: DualPoint = DualPoint { lambda1: 0.0, lambda2: 0.0 };

    /// Builds a dual point, clamping negative (and `-0.0`) entries to `+0.0`.
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        DualPoint { lambda1: clamp_nonneg(lambda1), lambda2: clamp_nonneg(lambda2) }
    }

    fn as_array(self) -> [f64; 2] {
        [self.lambda1, self.lambda2]
    }
}

fn clamp_nonneg(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Anchor data of one DLC search: the point, its value and gradient, the
/// crossing margin `delta`, the proximal weight `mu` and the estimate `p0`.
#[derive(Debug, Clone)]
pub struct DlcSubproblem {
    pub x: Vec<f64>,
    pub fx: f64,
    pub gx: Vec<f64>,
    pub delta: f64,
    pub mu: f64,
    pub p0: Vec<f64>,
}

/// The three program functions evaluated at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintValues {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
}

/// Values and gradients of the constraints at `p0`.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub g1: f64,
    pub g2: f64,
    pub grad_g0: Vec<f64>,
    pub grad_g1: Vec<f64>,
    pub grad_g2: Vec<f64>,
}

impl DlcSubproblem {
    pub fn new(obj: &Objective, x: &[f64], delta: f64, mu: f64, p0: Vec<f64>) -> Result<Self> {
        obj.check_dim(x)?;
        obj.check_dim(&p0)?;
        if !(delta > 0.0) || !(mu > 0.0) {
            return Err(DppmError::InvalidParameter(format!(
                "delta and mu must be positive (delta = {delta}, mu = {mu})"
            )));
        }
        Ok(DlcSubproblem { x: x.to_vec(), fx: obj.eval(x), gx: obj.grad(x), delta, mu, p0 })
    }

    pub fn g_values(&self, obj: &Objective, p: &[f64]) -> ConstraintValues {
        let gp = dot(&self.gx, p);
        ConstraintValues {
            g0: 0.5 * dot(p, p),
            g1: obj.eval(&add_scaled(&self.x, 1.0, p)) + self.delta - self.fx - gp,
            g2: gp,
        }
    }

    pub fn linearize(&self, obj: &Objective) -> Linearization {
        let values = self.g_values(obj, &self.p0);
        let g_shift = obj.grad(&add_scaled(&self.x, 1.0, &self.p0));
        Linearization {
            g1: values.g1,
            g2: values.g2,
            grad_g0: self.p0.clone(),
            grad_g1: sub(&g_shift, &self.gx),
            grad_g2: self.gx.clone(),
        }
    }
}

/// Free-function form of [`DlcSubproblem::g_values`].
pub fn g_values(sub: &DlcSubproblem, p: &[f64], obj: &Objective) -> ConstraintValues {
    sub.g_values(obj, p)
}

/// Free-function form of [`DlcSubproblem::linearize`].
pub fn linearized_constraints(sub: &DlcSubproblem, obj: &Objective) -> Linearization {
    sub.linearize(obj)
}

/// The dual function of a linearized subproblem written in coefficient form:
///
/// ```text
///     d(l) = c'l - (a00 + 2 b'l + l'G l) / (2 mu)
/// ```
///
/// with `c_i = g_i(p0)`, `b_i = grad g0 . grad g_i`, `G_ij = grad g_i . grad g_j`
/// and `a00 = |grad g0|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualQuadratic {
    pub c: [f64; 2],
    pub b: [f64; 2],
    pub gram: [[f64; 2]; 2],
    pub a00: f64,
    pub mu: f64,
}

impl DualQuadratic {
    pub fn from_linearization(lin: &Linearization, mu: f64) -> Self {
        let g12 = dot(&lin.grad_g1, &lin.grad_g2);
        DualQuadratic {
            c: [lin.g1, lin.g2],
            b: [dot(&lin.grad_g0, &lin.grad_g1), dot(&lin.grad_g0, &lin.grad_g2)],
            gram: [[dot(&lin.grad_g1, &lin.grad_g1), g12], [g12, dot(&lin.grad_g2, &lin.grad_g2)]],
            a00: dot(&lin.grad_g0, &lin.grad_g0),
            mu,
        }
    }

    pub fn value(&self, lam: DualPoint) -> f64 {
        let l = lam.as_array();
        let quad = self.a00
            + 2.0 * (self.b[0] * l[0] + self.b[1] * l[1])
            + self.gram[0][0] * l[0] * l[0]
            + 2.0 * self.gram[0][1] * l[0] * l[1]
            + self.gram[1][1] * l[1] * l[1];
        self.c[0] * l[0] + self.c[1] * l[1] - quad / (2.0 * self.mu)
    }

    /// Exact maximizer over `l >= 0` by active-set enumeration.
    pub fn maximize(&self) -> Result<DualPoint> {
        let [[g11, g12], [_, g22]] = self.gram;
        let scale = g11.max(g22).max(f64::MIN_POSITIVE);
        let flat1 = g11 <= 1e-24 * scale;
        let flat2 = g22 <= 1e-24 * scale;
        let c_eps = 1e-12 * (1.0 + self.c[0].abs() + self.c[1].abs());

        // Recession directions e >= 0 with e1 a1 + e2 a2 = 0; the dual grows
        // without bound along them iff c'e > 0.
        if flat1 && self.c[0] > c_eps {
            return Err(DppmError::UnboundedDual);
        }
        if flat2 && self.c[1] > c_eps {
            return Err(DppmError::UnboundedDual);
        }
        let det = g11 * g22 - g12 * g12;
        let collinear = !flat1 && !flat2 && det <= 1e-12 * g11 * g22;
        if collinear && g12 < 0.0 {
            let e = [g22.sqrt(), g11.sqrt()];
            let slope = (self.c[0] * e[0] + self.c[1] * e[1]) / (e[0] + e[1]);
            if slope > c_eps {
                return Err(DppmError::UnboundedDual);
            }
        }

        let mu = self.mu;
        let mut candidates = vec![DualPoint::ZERO];
        if !flat1 {
            let l1 = (mu * self.c[0] - self.b[0]) / g11;
            if l1 > 0.0 {
                candidates.push(DualPoint::new(l1, 0.0));
            }
        }
        if !flat2 {
            let l2 = (mu * self.c[1] - self.b[1]) / g22;
            if l2 > 0.0 {
                candidates.push(DualPoint::new(0.0, l2));
            }
        }
        if !flat1 && !flat2 && !collinear {
            // G l = mu c - b
            let r1 = mu * self.c[0] - self.b[0];
            let r2 = mu * self.c[1] - self.b[1];
            let l1 = (g22 * r1 - g12 * r2) / det;
            let l2 = (g11 * r2 - g12 * r1) / det;
            if l1 >= 0.0 && l2 >= 0.0 {
                candidates.push(DualPoint::new(l1, l2));
            }
        }
        let best = candidates
            .into_iter()
            .map(|lam| (self.value(lam), lam))
            .filter(|(v, _)| v.is_finite())
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, lam)| lam)
            .unwrap_or(DualPoint::ZERO);
        Ok(best)
    }
}

/// Dual function value at `lam`; the constraint gradients enter the squared norm.
pub fn dual_value(lam: DualPoint, sub: &DlcSubproblem, lin: &Linearization) -> f64 {
    DualQuadratic::from_linearization(lin, sub.mu).value(lam)
}

pub fn maximize_dual(sub: &DlcSubproblem, lin: &Linearization) -> Result<DualPoint> {
    DualQuadratic::from_linearization(lin, sub.mu).maximize()
}

/// Primal minimizer of the Lagrangian for fixed multipliers:
/// `p = p0 - (grad g0 + l1 grad g1 + l2 grad g2) / mu`.
pub fn primal_recover(lam: DualPoint, sub: &DlcSubproblem, lin: &Linearization) -> Vec<f64> {
    let mut s = lin.grad_g0.clone();
    axpy(lam.lambda1, &lin.grad_g1, &mut s);
    axpy(lam.lambda2, &lin.grad_g2, &mut s);
    add_scaled(&sub.p0, -1.0 / sub.mu, &s)
}

/// One penalized-linearization step from `sub.p0`.
pub fn outer_step(sub: &DlcSubproblem, obj: &Objective) -> Result<(DualPoint, Vec<f64>, Linearization)> {
    let lin = sub.linearize(obj);
    let lam = maximize_dual(sub, &lin)?;
    let p = primal_recover(lam, sub, &lin);
    Ok((lam, p, lin))
}

/// How the first estimate `p0` is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitRule {
    /// `p0 = -grad f(x)`.
    NegativeGradient,
    /// `p0 = -grad f(x) + j * 0.5 * |grad f(x)| * q` with `q` a random unit
    /// vector and `j` drawn uniformly from `0..=9`.
    RandomPerturbed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlcConfig {
    /// Crossing margin; `None` selects `1e-6 * (1 + |f(x)|)`.
    pub delta: Option<f64>,
    pub mu: f64,
    pub max_outer: usize,
    pub tol_p: f64,
    pub init_rule: InitRule,
    pub seed: u64,
}

impl Default for DlcConfig {
    fn default() -> Self {
        DlcConfig {
            delta: None,
            mu: 1000.0,
            max_outer: 50_000,
            tol_p: 1e-10,
            init_rule: InitRule::RandomPerturbed,
            seed: 0,
        }
    }
}

/// Why a search fell back to the negative gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlcFailure {
    MaxOuter,
    UnboundedDual,
    BelowFloor,
    Infeasible,
    NonDescent,
}

#[derive(Debug, Clone)]
pub struct DlcResult {
    /// Unit direction; the normalized negative gradient when not converged.
    pub direction: Vec<f64>,
    /// Length of the final estimate `p+`.
    pub magnitude: f64,
    /// The final estimate itself.
    pub p: Vec<f64>,
    pub dual: DualPoint,
    pub converged: bool,
    pub outer_iters: usize,
    pub failure: Option<DlcFailure>,
}

pub fn find_dlc_direction(obj: &Objective, x: &[f64], config: &DlcConfig) -> Result<DlcResult> {
    let mut rng = StdRng::seed_from_u64(config.seed);
    find_dlc_direction_with_rng(obj, x, config, &mut rng)
}

pub fn find_dlc_direction_with_rng<R: Rng + ?Sized>(
    obj: &Objective,
    x: &[f64],
    config: &DlcConfig,
    rng: &mut R,
) -> Result<DlcResult> {
    obj.check_dim(x)?;
    let gx = obj.grad(x);
    let gnorm = norm(&gx);
    if gnorm == 0.0 {
        return Err(DppmError::Stationary);
    }
    let fx = obj.eval(x);
    let delta = config.delta.unwrap_or(1e-6 * (1.0 + fx.abs()));
    let fallback = scale(-1.0 / gnorm, &gx);

    let p0 = match config.init_rule {
        InitRule::NegativeGradient => scale(-1.0, &gx),
        InitRule::RandomPerturbed => {
            let j = rng.random_range(0..=9) as f64;
            let q = random_unit(rng, gx.len());
            let mut p = scale(-1.0, &gx);
            axpy(j * 0.5 * gnorm, &q, &mut p);
            p
        }
    };
    let mut problem = DlcSubproblem::new(obj, x, delta, config.mu, p0)?;
    // reuse the anchor evaluations
    problem.fx = fx;
    problem.gx = gx;

    let mut dual = DualPoint::ZERO;
    let mut failure = Some(DlcFailure::MaxOuter);
    let mut iters = 0;
    while iters < config.max_outer {
        iters += 1;
        let (lam, p_next, _) = match outer_step(&problem, obj) {
            Ok(step) => step,
            Err(DppmError::UnboundedDual) => {
                failure = Some(DlcFailure::UnboundedDual);
                break;
            }
            Err(e) => return Err(e),
        };
        if !is_finite(&p_next) {
            failure = Some(DlcFailure::Infeasible);
            break;
        }
        dual = lam;
        let moved = norm(&sub(&p_next, &problem.p0));
        let reference = norm(&problem.p0);
        problem.p0 = p_next;
        if moved <= config.tol_p * (1.0 + reference) {
            failure = None;
            break;
        }
    }

    let p = problem.p0.clone();
    let magnitude = norm(&p);
    if failure.is_none() {
        let values = problem.g_values(obj, &p);
        let tol = 1e-8 * (1.0 + fx.abs());
        if magnitude < 10.0 * (2.0 * delta).sqrt() {
            failure = Some(DlcFailure::BelowFloor);
        } else if values.g1 > tol || values.g2 > tol {
            failure = Some(DlcFailure::Infeasible);
        }
    }
    let direction = match (failure, normalized(&p)) {
        (None, Some(d)) if dot(&problem.gx, &d) < 0.0 => d,
        (None, _) => {
            failure = Some(DlcFailure::NonDescent);
            fallback
        }
        _ => fallback,
    };
    Ok(DlcResult { direction, magnitude, p, dual, converged: failure.is_none(), outer_iters: iters, failure })
}
