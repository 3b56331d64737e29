//! One-dimensional proximal step along a descent direction.
//!
//! Given a unit direction `p` at `x`, the step first probes `[x, x + p]` on a
//! uniform grid of `10^tau` cells to find the convex segment `[0, v]`, sets
//! `t = v / |p'grad f(x)|` so that the minimizer of the envelope
//!
//! ```text
//!     phi(w) = w^2 / (2t) + f(x + w p)
//! ```
//!
//! cannot leave `[0, v]`, and then minimizes `phi` there by golden-section
//! search. At an interior minimizer `w* / t + p'grad f(x + w* p) = 0`.

use crate::error::{DppmError, Result};
use crate::objective::Objective;
use crate::vector::{add_scaled, dot, norm};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Result of one proximal step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxStep {
    pub w_star: f64,
    pub t: f64,
    /// Convex-segment bound. With a constant `t` this is the bracket
    /// `t |p'grad f(x)|` instead of a probed value.
    pub v: f64,
    pub next: Vec<f64>,
    pub phi_next: f64,
    /// `w* / t + p'grad f(next)`.
    pub residual: f64,
    /// `p'grad f(x)`
    pub gdot: f64,
    /// `p'grad f(next)`
    pub gdot_next: f64,
    /// False when `w*` sits on the upper end of the bracket.
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxConfig {
    /// Probe resolution exponent: `[x, x + p]` is cut into `10^tau` cells.
    pub tau: u32,
    /// Golden-section tolerance relative to the bracket length.
    pub tol_w: f64,
    /// Constant `t` for objectives known to be convex; skips the probe.
    pub t_override: Option<f64>,
}

impl Default for ProxConfig {
    fn default() -> Self {
        ProxConfig { tau: 2, tol_w: 1e-10, t_override: None }
    }
}

fn check_unit(dir: &[f64]) -> Result<()> {
    let n = norm(dir);
    if (n - 1.0).abs() > 1e-8 {
        return Err(DppmError::InvalidParameter(format!("direction must have unit length, got {n}")));
    }
    Ok(())
}

/// Convex-segment bound on the unit probe `[x, x + dir]`.
pub fn detect_convex_segment(obj: &Objective, x: &[f64], dir: &[f64], tau: u32) -> Result<f64> {
    detect_convex_segment_on(obj, x, dir, tau, 1.0).map(|v| v.min(1.0))
}

/// Convex-segment bound on `[x, x + length * dir]`.
///
/// With `h = length / 10^tau` and `f_k = f(x + k h dir)`, finds the smallest
/// `k` in `1..10^tau` whose forward differences decrease,
/// `f_k - f_{k-1} > f_{k+1} - f_k`, and returns `(k - 1) h`, the last probe
/// point whose centered second difference is nonnegative; `length` when no
/// difference decreases. A decrease already at `k = 1` leaves no verified
/// convex cell and is reported as [`DppmError::DegenerateSegment`].
pub fn detect_convex_segment_on(obj: &Objective, x: &[f64], dir: &[f64], tau: u32, length: f64) -> Result<f64> {
    obj.check_dim(x)?;
    obj.check_dim(dir)?;
    check_unit(dir)?;
    if tau == 0 || tau > 7 {
        return Err(DppmError::InvalidParameter(format!("tau must lie in 1..=7, got {tau}")));
    }
    if !(length > 0.0) {
        return Err(DppmError::InvalidParameter(format!("probe length must be positive, got {length}")));
    }
    let cells = 10usize.pow(tau);
    let h = length / cells as f64;
    let at = |k: usize| -> Result<f64> {
        let w = k as f64 * h;
        let fx = obj.eval(&add_scaled(x, w, dir));
        if fx.is_finite() {
            Ok(fx)
        } else {
            Err(DppmError::NonFinite(w))
        }
    };
    let mut prev = at(0)?;
    let mut cur = at(1)?;
    for k in 1..cells {
        let next = at(k + 1)?;
        if cur - prev > next - cur {
            if k == 1 {
                return Err(DppmError::DegenerateSegment);
            }
            return Ok((k - 1) as f64 * h);
        }
        prev = cur;
        cur = next;
    }
    Ok(length)
}

/// Largest admissible proximal parameter `t = v / |gdot|` for a descent
/// direction with directional derivative `gdot < 0`.
pub fn select_t(v: f64, gdot: f64) -> Result<f64> {
    if !(gdot < 0.0) {
        return Err(DppmError::NonDescent(gdot));
    }
    if !(v > 0.0) {
        return Err(DppmError::DegenerateSegment);
    }
    Ok(v / gdot.abs())
}

/// Golden-section minimization of a unimodal `phi` on `[lo, hi]`.
///
/// The returned point lies within `tol` of the minimizer; it is the midpoint
/// of the final bracket, so it is strictly greater than `lo`.
pub fn golden_section_min<F>(phi: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (a, b) = golden_section_bracket(phi, lo, hi, tol)?;
    Ok(0.5 * (a + b))
}

/// Final bracket of the golden-section search, of length at most `2 tol`
/// unless the iteration cap is hit first.
pub fn golden_section_bracket<F>(phi: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) {
        return Err(DppmError::InvalidParameter(format!("empty bracket [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(DppmError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let eval = |w: f64| -> Result<f64> {
        let v = phi(w);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DppmError::NonFinite(w))
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    // the bracket shrinks by INV_PHI per evaluation; cap for tol below ulp
    let mut budget = 200;
    while b - a > 2.0 * tol && budget > 0 {
        budget -= 1;
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
        }
    }
    Ok((a, b))
}

/// Locates the root of an increasing `r` on `[lo, hi]` starting from the
/// bracket `[a, b]`, which is widened until `r` changes sign, and returns the
/// bisection end with `r >= 0`.
fn refine_root<F>(r: F, a: f64, b: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut width = (b - a).max(f64::EPSILON * hi.abs());
    while r(a) > 0.0 && a > lo {
        b = a;
        a = (a - width).max(lo);
        width *= 2.0;
    }
    while r(b) < 0.0 && b < hi {
        a = b;
        b = (b + width).min(hi);
        width *= 2.0;
    }
    if r(a) >= 0.0 {
        return a;
    }
    if r(b) <= 0.0 {
        return b;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if r(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    b
}

/// One DPPM update `x+ = x + w* dir` along a unit descent direction.
pub fn prox_step(obj: &Objective, x: &[f64], dir: &[f64], config: &ProxConfig) -> Result<ProxStep> {
    obj.check_dim(x)?;
    obj.check_dim(dir)?;
    check_unit(dir)?;
    let gdot = dot(dir, &obj.grad(x));
    if !(gdot < 0.0) {
        return Err(DppmError::NonDescent(gdot));
    }
    let (t, v) = match config.t_override {
        Some(t) => {
            if !(t > 0.0) {
                return Err(DppmError::InvalidParameter(format!("t must be positive, got {t}")));
            }
            (t, t * gdot.abs())
        }
        None => {
            let v = detect_convex_segment(obj, x, dir, config.tau)?;
            (select_t(v, gdot)?, v)
        }
    };
    let fx = obj.eval(x);
    // shifted by f(x) so the search compares differences of similar size
    let phi = |w: f64| w * w / (2.0 * t) + (obj.eval(&add_scaled(x, w, dir)) - fx);
    let tol = (config.tol_w * v).max(f64::MIN_POSITIVE);
    let (a, b) = golden_section_bracket(phi, 0.0, v, tol)?;
    // phi is flat to roundoff near its minimum, so the golden bracket cannot
    // pin w* much below sqrt(eps); the stationarity residual can
    let residual_at = |w: f64| w / t + dot(dir, &obj.grad(&add_scaled(x, w, dir)));
    let w_star = refine_root(residual_at, a, b, 0.0, v);
    let next = add_scaled(x, w_star, dir);
    let phi_next = obj.eval(&next);
    let gdot_next = dot(dir, &obj.grad(&next));
    Ok(ProxStep {
        w_star,
        t,
        v,
        phi_next,
        residual: w_star / t + gdot_next,
        gdot,
        gdot_next,
        interior: w_star < v - 2.0 * tol,
        next,
    })
}
