//! Directional proximal point method (DPPM) for unconstrained minimization of
//! continuously differentiable functions.
//!
//! Each iteration picks a unit descent direction, measures the convex segment
//! of the objective along it and then solves the one-dimensional envelope
//! problem
//!
//! ```text
//!     min_{w >= 0}  w^2 / (2t) + f(x + w p)
//! ```
//!
//! by golden-section search. Directions come from a [`DirectionStrategy`]:
//! the negative gradient, a normalized momentum blend, cyclic conjugate
//! vectors, or a directionally-locally-convex (DLC) direction obtained from a
//! two-variable dual quadratic program ([`dlc`]).
//!
//! The [`quadratic`] module carries the closed-form machinery for strongly
//! convex quadratics (rank-one inverse update, cyclic conjugate directions and
//! the R-linear / R-superlinear rate bounds).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dlc;
mod error;
pub mod objective;
pub mod prox;
pub mod quadratic;
pub mod solver;
pub mod vector;

pub use dlc::{find_dlc_direction, DlcConfig, DlcResult, DualPoint, InitRule};
pub use error::{DppmError, Result};
pub use objective::{check_gradient, figure1_objective, quadratic_objective, sinewell_objective, Objective};
pub use prox::{
    detect_convex_segment, detect_convex_segment_on, golden_section_bracket, golden_section_min, prox_step, select_t,
    ProxConfig, ProxStep,
};
pub use quadratic::{
    cyclic_conjugate_direction, eigen_check, q_norm, rank_one_inverse_apply, rlinear_bound, run_cyclic,
    superlinear_cycle_bound, superlinear_schedule, CyclicRun, CyclicStep, EigenCheck, QuadraticModel, RLinearBound,
    StepRule, SymmetricMatrix, UpdatePath,
};
pub use solver::{
    accelerated_dppm, check_fejer, dppm_minimize, gradient_direction, momentum_direction, perturb_direction,
    DirectionKind, DirectionStrategy, FejerReport, GeometricSchedule, Record, SolverConfig, Status, Trace,
    DESCENT_SLACK,
};
