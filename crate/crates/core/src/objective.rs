//! Differentiable objectives and the built-in test problems.

use std::fmt;
use std::sync::Arc;

use crate::error::{DppmError, Result};
use crate::vector::norm;

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A function `f: R^n -> R` together with its gradient.
///
/// Objectives are immutable once built and cheap to clone. The optional
/// optimum metadata is only read by benchmarks and invariant checks; the
/// solvers never look at it.
#[derive(Clone)]
pub struct Objective {
    name: String,
    dim: usize,
    eval: Arc<EvalFn>,
    grad: Arc<GradFn>,
    optimum_value: Option<f64>,
    optimum_point: Option<Vec<f64>>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("optimum_value", &self.optimum_value)
            .finish_non_exhaustive()
    }
}

impl Objective {
    /// Objective with an analytic gradient.
    pub fn new<F, G>(dim: usize, eval: F, grad: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Objective {
            name: "custom".to_string(),
            dim,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            optimum_value: None,
            optimum_point: None,
        }
    }

    /// Objective with only a function handle. The gradient falls back to
    /// central differences with step `1e-6 * (1 + |x|)`.
    pub fn from_fn<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let eval: Arc<EvalFn> = Arc::new(eval);
        let inner = Arc::clone(&eval);
        let grad = move |x: &[f64]| {
            let h = 1e-6 * (1.0 + norm(x));
            central_difference(inner.as_ref(), x, h)
        };
        Objective {
            name: "custom".to_string(),
            dim,
            eval,
            grad: Arc::new(grad),
            optimum_value: None,
            optimum_point: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_optimum(mut self, point: Vec<f64>, value: f64) -> Self {
        debug_assert_eq!(point.len(), self.dim);
        self.optimum_point = Some(point);
        self.optimum_value = Some(value);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        (self.grad)(x)
    }

    pub fn optimum_value(&self) -> Option<f64> {
        self.optimum_value
    }

    pub fn optimum_point(&self) -> Option<&[f64]> {
        self.optimum_point.as_deref()
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(DppmError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }
}

fn central_difference(f: &EvalFn, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = probe[i];
            probe[i] = xi + h;
            let fp = f(&probe);
            probe[i] = xi - h;
            let fm = f(&probe);
            probe[i] = xi;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `f(x) = 1/2 sum q_i x_i^2` with a positive diagonal.
pub fn quadratic_objective(diag: &[f64]) -> Result<Objective> {
    if diag.is_empty() {
        return Err(DppmError::InvalidParameter("empty spectrum".into()));
    }
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, q)| !(**q > 0.0 && q.is_finite())) {
        return Err(DppmError::InvalidSpectrum { index, value });
    }
    let n = diag.len();
    let q_eval: Arc<[f64]> = diag.into();
    let q_grad = Arc::clone(&q_eval);
    Ok(Objective::new(
        n,
        move |x| 0.5 * q_eval.iter().zip(x).map(|(q, v)| q * v * v).sum::<f64>(),
        move |x| q_grad.iter().zip(x).map(|(q, v)| q * v).collect(),
    )
    .with_name("quadratic")
    .with_optimum(vec![0.0; n], 0.0))
}

/// `f(x) = |x|^2 + 4 sin^2(x_3)` on `R^3`: nonconvex along the third axis
/// wherever `cos(2 x_3) < -1/4`, with its only critical point at the origin.
pub fn sinewell_objective() -> Objective {
    Objective::new(
        3,
        |x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + 4.0 * x[2].sin().powi(2),
        |x| vec![2.0 * x[0], 2.0 * x[1], 2.0 * x[2] + 4.0 * (2.0 * x[2]).sin()],
    )
    .with_name("sinewell")
    .with_optimum(vec![0.0; 3], 0.0)
}

/// One-dimensional `f(x) = 4(x-1)^2 - x^3 + 1`. From `x = 0` it is convex up
/// to the inflection at `4/3` and drops below its tangent line at `x = 4`.
pub fn figure1_objective() -> Objective {
    Objective::new(
        1,
        |x| 4.0 * (x[0] - 1.0).powi(2) - x[0].powi(3) + 1.0,
        |x| vec![8.0 * (x[0] - 1.0) - 3.0 * x[0] * x[0]],
    )
    .with_name("figure1")
}

/// Largest coordinate-wise relative error between the analytic gradient and a
/// central difference with step `h`, measured as `|fd - g| / (1 + |g|)`.
pub fn check_gradient(obj: &Objective, x: &[f64], h: f64) -> Result<f64> {
    obj.check_dim(x)?;
    if !(h > 0.0) {
        return Err(DppmError::InvalidParameter(format!("step h must be positive, got {h}")));
    }
    let analytic = obj.grad(x);
    let numeric = central_difference(obj.eval.as_ref(), x, h);
    Ok(analytic.iter().zip(&numeric).map(|(g, fd)| (fd - g).abs() / (1.0 + g.abs())).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quadratic_values() {
        let q = quadratic_objective(&[1.0, 1.0]).unwrap();
        assert_eq!(q.eval(&[0.0, 0.0]), 0.0);
        assert_eq!(q.grad(&[0.0, 0.0]), vec![0.0, 0.0]);

        let q = quadratic_objective(&[2.0]).unwrap();
        assert_eq!(q.eval(&[1.0]), 1.0);
        assert_eq!(q.grad(&[1.0]), vec![2.0]);
        assert_eq!(q.optimum_value(), Some(0.0));
    }

    #[test]
    fn quadratic_rejects_bad_spectrum() {
        assert_eq!(quadratic_objective(&[1.0, 0.0]).unwrap_err(), DppmError::InvalidSpectrum { index: 1, value: 0.0 });
        assert!(matches!(quadratic_objective(&[-3.0]), Err(DppmError::InvalidSpectrum { index: 0, .. })));
        assert!(quadratic_objective(&[]).is_err());
    }

    #[test]
    fn sinewell_values() {
        let f = sinewell_objective();
        assert_eq!(f.eval(&[0.0, 0.0, 0.0]), 0.0);
        let x = [0.0, 0.0, PI];
        assert!((f.eval(&x) - PI * PI).abs() < 1e-12);
        let g = f.grad(&x);
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
        assert!((g[2] - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn figure1_values() {
        let f = figure1_objective();
        assert_eq!(f.eval(&[0.0]), 5.0);
        assert_eq!(f.grad(&[0.0]), vec![-8.0]);
        // f'' = 8 - 6x vanishes at the inflection 4/3
        let h = 1e-4;
        let x = 4.0 / 3.0;
        let second = (f.eval(&[x + h]) - 2.0 * f.eval(&[x]) + f.eval(&[x - h])) / (h * h);
        assert!(second.abs() < 1e-5);
        // tangent at 0 is 5 - 8x; f minus tangent is x^2 (4 - x)
        let crossing = f.eval(&[4.0]) - (5.0 - 8.0 * 4.0);
        assert!(crossing.abs() < 1e-12);
    }

    #[test]
    fn gradient_checks() {
        let q = quadratic_objective(&[2.0, 3.0]).unwrap();
        assert!(check_gradient(&q, &[1.0, 1.0], 1e-5).unwrap() <= 1e-6);
        let s = sinewell_objective();
        assert!(check_gradient(&s, &[1.0, 2.0, 3.0], 1e-5).unwrap() <= 1e-6);
        assert!(check_gradient(&s, &[1.0, 2.0, 3.0], 0.0).is_err());
        assert!(check_gradient(&s, &[1.0, 2.0], 1e-5).is_err());
    }

    #[test]
    fn stationary_at_optimum() {
        for obj in [quadratic_objective(&[1.0, 5.0, 9.0]).unwrap(), sinewell_objective()] {
            let x = obj.optimum_point().unwrap().to_vec();
            assert!(norm(&obj.grad(&x)) <= 1e-10);
        }
    }

    #[test]
    fn finite_difference_fallback() {
        let f = Objective::from_fn(2, |x| x[0].powi(2) + 3.0 * x[0] * x[1]);
        let g = f.grad(&[1.0, 2.0]);
        assert!((g[0] - 8.0).abs() < 1e-6);
        assert!((g[1] - 3.0).abs() < 1e-6);
    }
}
