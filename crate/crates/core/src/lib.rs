//! Solver for first-kind Volterra integral equations with piecewise-continuous
//! kernels, and a storage load-leveling pipeline built on it.
//!
//! The linear equation
//!
//! ```text
//! sum_i int_{alpha_{i-1}(t)}^{alpha_i(t)} K_i(t,s) x(s) ds = f(t),   0 <= t <= T
//! ```
//!
//! is discretized by piecewise-linear collocation on a uniform mesh and
//! solved node by node. See [`linear`] for the sweep, [`nonlinear`] for the
//! modified Newton-Kantorovich iteration and [`dispatch`] for the
//! application to storage charge/discharge strategies.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cases;
pub mod cli;
pub mod dispatch;
pub mod error;
pub mod forecast;
pub mod io;
pub mod kernel;
pub mod linear;
pub mod mesh;
pub mod nonlinear;
pub mod series;
pub mod synthetic;

pub use dispatch::{DispatchCase, DispatchStrategy, StrategyScore};
pub use error::{Error, Result};
pub use forecast::ForecastRequest;
pub use kernel::{BoundaryCurve, KernelSegment, KernelSpec, PiecewiseKernel};
pub use linear::{PiecewiseLinearSolution, RightHandSide, SolverOptions};
pub use mesh::Mesh;
pub use nonlinear::{IterationTrace, NonlinearOptions, NonlinearProblem, Nonlinearity};
pub use series::LoadSeries;
