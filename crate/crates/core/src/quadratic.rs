//! Closed-form DPPM on strongly convex quadratics `f(x) = 1/2 x'Qx`.
//!
//! Along a unit direction `p` with constant `t`, the DPPM update is linear:
//!
//! ```text
//!     x+ = [I + t p p'Q]^{-1} x = x - t / (1 + t p'Qp) * p * (p'Qx)
//! ```
//!
//! Cycling through a Q-conjugate basis contracts the Q-norm by at least
//! `1 / (1 + lambda m)` per cycle, `m` being the smallest eigenvalue of `Q`.

use std::sync::Arc;

use rand::Rng;

use crate::error::{DppmError, Result};
use crate::objective::{quadratic_objective, Objective};
use crate::prox::{prox_step, ProxConfig};
use crate::solver::GeometricSchedule;
use crate::vector::{dot, norm, scale};

/// Symmetric matrix, either diagonal or dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub enum SymmetricMatrix {
    Diagonal(Vec<f64>),
    Dense { n: usize, data: Vec<f64> },
}

impl SymmetricMatrix {
    /// Dense matrix from rows; rejects non-square or asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(DppmError::InvalidParameter("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(DppmError::DimensionMismatch { expected: n, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(DppmError::InvalidParameter(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymmetricMatrix::Dense { n, data })
    }

    pub fn dim(&self) -> usize {
        match self {
            SymmetricMatrix::Diagonal(d) => d.len(),
            SymmetricMatrix::Dense { n, .. } => *n,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SymmetricMatrix::Diagonal(d) => d.iter().zip(x).map(|(q, v)| q * v).collect(),
            SymmetricMatrix::Dense { n, data } => data.chunks(*n).map(|row| dot(row, x)).collect(),
        }
    }

    /// `x'Qy`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            SymmetricMatrix::Diagonal(d) => d.iter().zip(x).zip(y).map(|((q, a), b)| q * a * b).sum(),
            SymmetricMatrix::Dense { .. } => dot(x, &self.mul_vec(y)),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(DppmError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

/// `sqrt(x'Qx)`
pub fn q_norm(q: &SymmetricMatrix, x: &[f64]) -> f64 {
    q.bilinear(x, x).max(0.0).sqrt()
}

fn denominator(q: &SymmetricMatrix, p: &[f64], t: f64) -> Result<f64> {
    let den = 1.0 + t * q.bilinear(p, p);
    if den.abs() <= 1e-12 || !den.is_finite() {
        return Err(DppmError::SingularUpdate(den));
    }
    Ok(den)
}

/// `[I + t p p'Q]^{-1} x = x - t / (1 + t p'Qp) * p * (p'Qx)`.
pub fn rank_one_inverse_apply(q: &SymmetricMatrix, p: &[f64], t: f64, x: &[f64]) -> Result<Vec<f64>> {
    q.check_dim(p)?;
    q.check_dim(x)?;
    let den = denominator(q, p, t)?;
    let coef = t / den * q.bilinear(p, x);
    Ok(x.iter().zip(p).map(|(xi, pi)| xi - coef * pi).collect())
}

/// `[I + t p p'Q] x = x + t (p'Qx) p`.
pub fn rank_one_apply(q: &SymmetricMatrix, p: &[f64], t: f64, x: &[f64]) -> Vec<f64> {
    let coef = t * q.bilinear(p, x);
    x.iter().zip(p).map(|(xi, pi)| xi + coef * pi).collect()
}

/// Outcome of [`eigen_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCheck {
    /// `1 / (1 + t p'Qp)`
    pub eigenvalue: f64,
    /// `|[I + t p p'Q]^{-1} p - eigenvalue * p|_inf`
    pub residual: f64,
    /// Round trip `|inverse(forward(r)) - r|_inf` for a probe `r` orthogonal to `p`.
    pub orthogonal_residual: f64,
}

/// Verifies that `p` is an eigenvector of `[I + t p p'Q]^{-1}` and that the
/// inverse undoes the forward map on a direction orthogonal to `p`.
pub fn eigen_check(q: &SymmetricMatrix, p: &[f64], t: f64) -> Result<EigenCheck> {
    q.check_dim(p)?;
    let eigenvalue = 1.0 / denominator(q, p, t)?;
    let image = rank_one_inverse_apply(q, p, t, p)?;
    let residual = image.iter().zip(p).map(|(a, b)| (a - eigenvalue * b).abs()).fold(0.0, f64::max);

    // e_j minus its projection on p, j the coordinate where p is smallest
    let j = (0..p.len()).min_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs())).unwrap_or(0);
    let mut probe = scale(-p[j] / dot(p, p), p);
    probe[j] += 1.0;
    let back = rank_one_inverse_apply(q, p, t, &rank_one_apply(q, p, t, &probe))?;
    let orthogonal_residual = back.iter().zip(&probe).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(EigenCheck { eigenvalue, residual, orthogonal_residual })
}

/// Strongly convex quadratic with its smallest eigenvalue and a unit
/// Q-conjugate basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    q: SymmetricMatrix,
    m: f64,
    basis: Vec<Vec<f64>>,
}

impl QuadraticModel {
    /// Diagonal `Q`; the conjugate basis is the standard basis.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        // reuse the spectrum validation
        quadratic_objective(diag)?;
        let n = diag.len();
        let basis = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        let m = diag.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(QuadraticModel { q: SymmetricMatrix::Diagonal(diag.to_vec()), m, basis })
    }

    /// General `Q` with a caller-supplied smallest eigenvalue `m` and basis.
    /// The basis must consist of `n` unit vectors with `|g_i'Q g_j| <= 1e-10`.
    pub fn with_basis(q: SymmetricMatrix, m: f64, basis: Vec<Vec<f64>>) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(DppmError::InvalidSpectrum { index: 0, value: m });
        }
        let n = q.dim();
        if basis.len() != n {
            return Err(DppmError::DimensionMismatch { expected: n, got: basis.len() });
        }
        for (i, g) in basis.iter().enumerate() {
            q.check_dim(g)?;
            if (norm(g) - 1.0).abs() > 1e-10 {
                return Err(DppmError::InvalidParameter(format!("basis vector {i} is not unit length")));
            }
            for (j, h) in basis.iter().enumerate().take(i) {
                let c = q.bilinear(g, h);
                if c.abs() > 1e-10 {
                    return Err(DppmError::InvalidParameter(format!(
                        "basis vectors {j} and {i} are not conjugate ({c:e})"
                    )));
                }
            }
        }
        Ok(QuadraticModel { q, m, basis })
    }

    pub fn q(&self) -> &SymmetricMatrix {
        &self.q
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.q.bilinear(x, x)
    }

    /// `1/2 x'Qx` as an [`Objective`], minimized at the origin.
    pub fn objective(&self) -> Objective {
        match &self.q {
            SymmetricMatrix::Diagonal(d) => quadratic_objective(d).expect("validated spectrum"),
            dense => {
                let n = dense.dim();
                let qe = Arc::new(dense.clone());
                let qg = Arc::clone(&qe);
                Objective::new(n, move |x| 0.5 * qe.bilinear(x, x), move |x| qg.mul_vec(x))
                    .with_name("quadratic")
                    .with_optimum(vec![0.0; n], 0.0)
            }
        }
    }
}

/// `n` draws uniform on `[0, 1]` mapped affinely onto `[lo, hi]`.
pub fn uniform_spectrum<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(DppmError::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(DppmError::InvalidParameter(format!("invalid spectrum range [{lo}, {hi}]")));
    }
    Ok((0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
}

/// Direction for one position of the conjugate cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum CyclicStep {
    Direction(Vec<f64>),
    /// The basis vector is Q-orthogonal to `x`; the iterate stays put.
    Skip,
}

/// Basis vector `g_i`, `i = k mod n`, signed so that `p'Qx < 0`. Skips when
/// `|g_i'Qx| <= 1e-14 |Qx|`.
pub fn cyclic_conjugate_direction(model: &QuadraticModel, x: &[f64], k: usize) -> CyclicStep {
    let g = &model.basis[k % model.basis.len()];
    let qx = model.q.mul_vec(x);
    let s = dot(g, &qx);
    if s.abs() <= 1e-14 * norm(&qx) || s == 0.0 {
        return CyclicStep::Skip;
    }
    CyclicStep::Direction(if s < 0.0 { g.clone() } else { scale(-1.0, g) })
}

/// Rate bounds for constant `lambda` over cycles of length `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RLinearBound {
    /// `1 / (1 + lambda m)`
    pub per_cycle: f64,
    /// `per_cycle^(1/n)`
    pub per_iteration: f64,
}

pub fn rlinear_bound(lambda: f64, m: f64, n: usize) -> Result<RLinearBound> {
    if !(lambda > 0.0) || !(m > 0.0) || n == 0 {
        return Err(DppmError::InvalidParameter(format!(
            "rate bound needs lambda > 0, m > 0, n >= 1 (got {lambda}, {m}, {n})"
        )));
    }
    let per_cycle = 1.0 / (1.0 + lambda * m);
    Ok(RLinearBound { per_cycle, per_iteration: per_cycle.powf(1.0 / n as f64) })
}

/// `lambda0 * c^cycle_k`, requiring `c > 1`.
pub fn superlinear_schedule(lambda0: f64, c: f64, cycle_k: usize) -> Result<f64> {
    Ok(GeometricSchedule::new(lambda0, c)?.lambda(cycle_k))
}

/// Cycle bound `1 / (1 + c^k lambda0 m)` of the geometric schedule.
pub fn superlinear_cycle_bound(lambda0: f64, c: f64, m: f64, cycle_k: usize) -> Result<f64> {
    Ok(1.0 / (1.0 + superlinear_schedule(lambda0, c, cycle_k)? * m))
}

/// Step-size rule for [`run_cyclic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Constant(f64),
    Schedule(GeometricSchedule),
}

impl StepRule {
    pub fn lambda(&self, cycle: usize) -> f64 {
        match self {
            StepRule::Constant(l) => *l,
            StepRule::Schedule(s) => s.lambda(cycle),
        }
    }

    /// Per-cycle contraction bound for this rule.
    pub fn cycle_bound(&self, m: f64, cycle: usize) -> f64 {
        1.0 / (1.0 + self.lambda(cycle) * m)
    }
}

/// How each update of [`run_cyclic`] is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePath {
    ClosedForm,
    /// Through the golden-section proximal step with `t` fixed.
    ProxLinesearch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicRun {
    /// `|x_{(k+1)n}|_Q / |x_{kn}|_Q` per cycle; 0 once the iterate is exactly 0.
    pub ratios: Vec<f64>,
    /// `|x_j|_Q` for every iterate, starting with `x_0`.
    pub q_norms: Vec<f64>,
    /// Iterates at cycle boundaries, starting with `x_0`.
    pub cycle_points: Vec<Vec<f64>>,
    pub skips: usize,
}

impl CyclicRun {
    pub fn final_point(&self) -> &[f64] {
        self.cycle_points.last().expect("run holds the starting point")
    }
}

/// Runs `cycles` full passes of cyclic conjugate DPPM from `x0`.
pub fn run_cyclic(
    model: &QuadraticModel,
    x0: &[f64],
    rule: StepRule,
    cycles: usize,
    path: UpdatePath,
) -> Result<CyclicRun> {
    model.q.check_dim(x0)?;
    if let StepRule::Constant(l) = rule {
        if !(l > 0.0 && l.is_finite()) {
            return Err(DppmError::InvalidParameter(format!("lambda must be positive, got {l}")));
        }
    }
    let n = model.dim();
    let objective = (path == UpdatePath::ProxLinesearch).then(|| model.objective());
    let mut x = x0.to_vec();
    let mut q_norms = vec![q_norm(&model.q, &x)];
    let mut cycle_points = vec![x.clone()];
    let mut ratios = Vec::with_capacity(cycles);
    let mut skips = 0;
    for cycle in 0..cycles {
        let t = rule.lambda(cycle);
        let start = q_norm(&model.q, &x);
        for i in 0..n {
            match cyclic_conjugate_direction(model, &x, cycle * n + i) {
                CyclicStep::Skip => skips += 1,
                CyclicStep::Direction(p) => {
                    x = match &objective {
                        None => rank_one_inverse_apply(&model.q, &p, t, &x)?,
                        Some(obj) => {
                            let cfg = ProxConfig { t_override: Some(t), ..ProxConfig::default() };
                            prox_step(obj, &x, &p, &cfg)?.next
                        }
                    };
                }
            }
            q_norms.push(q_norm(&model.q, &x));
        }
        let end = q_norm(&model.q, &x);
        ratios.push(if start > 0.0 { end / start } else { 0.0 });
        cycle_points.push(x.clone());
    }
    Ok(CyclicRun { ratios, q_norms, cycle_points, skips })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag21() -> SymmetricMatrix {
        SymmetricMatrix::Diagonal(vec![2.0, 1.0])
    }

    #[test]
    fn rank_one_hand_values() {
        let x = rank_one_inverse_apply(&diag21(), &[1.0, 0.0], 1.0, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && x[1] == 1.0);
        assert_eq!(rank_one_inverse_apply(&diag21(), &[0.6, 0.8], 0.0, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn singular_update() {
        let q = SymmetricMatrix::Diagonal(vec![1.0]);
        assert!(matches!(rank_one_inverse_apply(&q, &[1.0], -1.0, &[1.0]), Err(DppmError::SingularUpdate(_))));
    }

    #[test]
    fn eigenvalues() {
        let id = SymmetricMatrix::Diagonal(vec![1.0; 3]);
        let c = eigen_check(&id, &[0.0, 0.6, 0.8], 3.0).unwrap();
        assert!((c.eigenvalue - 0.25).abs() < 1e-15);
        let c = eigen_check(&diag21(), &[1.0, 0.0], 1.0).unwrap();
        assert!((c.eigenvalue - 1.0 / 3.0).abs() < 1e-15);
        assert!(c.residual <= 1e-12 && c.orthogonal_residual <= 1e-12);
    }

    #[test]
    fn q_norms() {
        let q = SymmetricMatrix::Diagonal(vec![4.0]);
        assert_eq!(q_norm(&q, &[0.0]), 0.0);
        assert_eq!(q_norm(&q, &[1.0]), 2.0);
        let m = QuadraticModel::diagonal(&[3.0, 5.0]).unwrap();
        let x = [0.7, -1.3];
        assert!((q_norm(m.q(), &x).powi(2) - 2.0 * m.objective().eval(&x)).abs() < 1e-12);
    }

    #[test]
    fn cyclic_sign_rule() {
        let m = QuadraticModel::diagonal(&[2.0, 1.0]).unwrap();
        assert_eq!(cyclic_conjugate_direction(&m, &[1.0, 0.0], 0), CyclicStep::Direction(vec![-1.0, 0.0]));
        assert_eq!(cyclic_conjugate_direction(&m, &[1.0, 0.0], 1), CyclicStep::Skip);
        assert_eq!(cyclic_conjugate_direction(&m, &[-1.0, 2.0], 3), CyclicStep::Direction(vec![0.0, -1.0]));
    }

    #[test]
    fn rate_bounds() {
        assert!((rlinear_bound(0.1, 30.0, 1).unwrap().per_cycle - 0.25).abs() < 1e-15);
        assert!((rlinear_bound(10.0, 30.0, 500).unwrap().per_cycle - 1.0 / 301.0).abs() < 1e-15);
        assert!(rlinear_bound(1e-12, 30.0, 2).unwrap().per_cycle > 1.0 - 1e-10);
        let b = rlinear_bound(0.1, 30.0, 4).unwrap();
        assert!((b.per_iteration.powi(4) - b.per_cycle).abs() < 1e-14);
        assert!(rlinear_bound(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(superlinear_schedule(0.1, 10.0, 0).unwrap(), 0.1);
        assert!((superlinear_schedule(0.1, 10.0, 2).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(superlinear_schedule(0.1, 1.0, 0).unwrap_err(), DppmError::InvalidSchedule(1.0));
        let bounds: Vec<f64> = (0..6).map(|k| superlinear_cycle_bound(0.1, 10.0, 30.0, k).unwrap()).collect();
        assert!(bounds.windows(2).all(|w| w[1] < w[0]));
        assert!(bounds[5] < 1e-5);
    }

    #[test]
    fn one_cycle_on_diagonal() {
        let m = QuadraticModel::diagonal(&[2.0, 5.0]).unwrap();
        let run = run_cyclic(&m, &[1.0, -1.0], StepRule::Constant(0.5), 1, UpdatePath::ClosedForm).unwrap();
        let x = run.final_point();
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!((x[1] + 1.0 / 3.5).abs() < 1e-15);
        assert!(run.ratios[0] <= rlinear_bound(0.5, 2.0, 2).unwrap().per_cycle);
    }

    #[test]
    fn dense_matrix_validation() {
        assert!(SymmetricMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(SymmetricMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        let q = SymmetricMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(q.mul_vec(&[1.0, 0.0]), vec![2.0, 1.0]);
        let basis = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(QuadraticModel::with_basis(q, 1.0, basis).is_err());
    }
}
