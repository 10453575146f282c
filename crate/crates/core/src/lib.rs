//! Positive solutions of the three-point integral boundary-value problem
//!
//! ```text
//! u''(t) + a(t) f(u(t)) = 0,   0 < t < T,
//! u(0) = beta u(eta),   u(T) = alpha * integral_0^eta u(s) ds.
//! ```
//!
//! The crate evaluates the closed-form linear solution, the cone constants,
//! the sufficient conditions for one or two positive solutions, and searches
//! for the solutions themselves by fixed-point iteration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cone_constants;
pub mod criteria;
pub mod error;
pub mod expr;
pub mod grid;
pub mod linear_kernel;
pub mod numfmt;
pub mod operator;
pub mod problem;
pub mod quadrature;
pub mod solver;

pub use cone_constants::{check_coefficients, gamma, CoefficientCheck, ConeConstants};
pub use error::{Error, Result};
pub use expr::{parse, EvalError, Expr, ParseError};
pub use grid::{GridFunction, Mesh};
pub use linear_kernel::{
    check_cone_bound, check_nonexistence_region, fd_oracle_solve, solve_linear, Admissibility, BvpParams, ConeReport,
};
pub use operator::{apply_a, check_cone_mapping, fixed_point_residual, ConeMappingReport, OperatorContext};
