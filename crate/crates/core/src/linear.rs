//! Direct collocation solver for linear first-kind Volterra equations
//!
//! ```text
//! alpha * x(t) + sum_i  int_{alpha_{i-1}(t)}^{alpha_i(t)} K_i(t,s) x(s) ds = f(t)
//! ```
//!
//! with `alpha = 0` for the unregularized equation. The unknown is sought as
//! a continuous piecewise-linear function on the collocation mesh. `x(0)`
//! comes from differentiating the equation at `t = 0`; every later node
//! `x_k` follows from collocating at `t_k`, which involves only `x_0..x_k`,
//! so the whole solve is one forward sweep.
//!
//! Integrals use the composite midpoint rule on breakpoints aligned with the
//! kernel's discontinuity curves (see [`crate::mesh`]).

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::PiecewiseKernel;
use crate::mesh::{check_horizons, quadrature_points, Mesh};

/// Largest allowed `|f(0)|` for callable right-hand sides.
pub const CALLABLE_ORIGIN_TOLERANCE: f64 = 1e-9;

/// Relative finite-difference step (times the horizon) for callables
/// without a supplied `f'(0)`.
const CALLABLE_FD_STEP: f64 = 1e-5;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `f(t)` of the equation, with `f(0) = 0`.
#[derive(Clone)]
pub enum RightHandSide {
    Callable {
        f: ScalarFn,
        derivative_at_zero: Option<f64>,
    },
    /// Samples at mesh nodes; `times[0] == 0` and `values[0] == 0` exactly.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl fmt::Debug for RightHandSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RightHandSide::Callable {
                derivative_at_zero, ..
            } => f
                .debug_struct("Callable")
                .field("derivative_at_zero", derivative_at_zero)
                .finish_non_exhaustive(),
            RightHandSide::Sampled { times, values } => f
                .debug_struct("Sampled")
                .field("len", &times.len())
                .field("values", values)
                .finish(),
        }
    }
}

impl RightHandSide {
    pub fn callable<F>(f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::build_callable(Arc::new(f), None)
    }

    /// Callable with a known `f'(0)`.
    pub fn callable_with_derivative<F>(f: F, derivative_at_zero: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::build_callable(Arc::new(f), Some(derivative_at_zero))
    }

    fn build_callable(f: ScalarFn, derivative_at_zero: Option<f64>) -> Result<Self> {
        let at_zero = f(0.0);
        if !(at_zero.abs() <= CALLABLE_ORIGIN_TOLERANCE) {
            return Err(Error::config(format!(
                "right-hand side needs f(0) = 0, got {at_zero}"
            )));
        }
        Ok(RightHandSide::Callable {
            f,
            derivative_at_zero,
        })
    }

    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::config(format!(
                "sampled right-hand side has {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::config(
                "sampled right-hand side needs at least two samples",
            ));
        }
        if times[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::config(format!(
                "sampled right-hand side must start with f(0) = 0, got f({}) = {}",
                times[0], values[0]
            )));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::config(format!(
                "sample times not increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("non-finite sample at index {i}")));
        }
        Ok(RightHandSide::Sampled { times, values })
    }

    /// Samples `f` at the mesh nodes.
    pub fn sample_on(mesh: &Mesh, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values: Vec<f64> = mesh.nodes().iter().map(|&t| f(t)).collect();
        values[0] = 0.0;
        Self::sampled(mesh.nodes().to_vec(), values)
    }

    /// `f(t)`; sampled data is interpolated linearly.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            RightHandSide::Callable { f, .. } => f(t),
            RightHandSide::Sampled { times, values } => interpolate(times, values, t),
        }
    }

    /// `f'(0)`: supplied value, else a one-sided second-order difference.
    pub fn derivative_at_zero(&self, horizon: f64) -> f64 {
        match self {
            RightHandSide::Callable {
                derivative_at_zero: Some(d),
                ..
            } => *d,
            RightHandSide::Callable { f, .. } => {
                let step = CALLABLE_FD_STEP * horizon;
                (-3.0 * f(0.0) + 4.0 * f(step) - f(2.0 * step)) / (2.0 * step)
            }
            RightHandSide::Sampled { times, values } => {
                if times.len() == 2 {
                    return (values[1] - values[0]) / times[1];
                }
                let (t1, t2) = (times[1], times[2]);
                let (f0, f1, f2) = (values[0], values[1], values[2]);
                f1 * t2 / (t1 * (t2 - t1)) - f2 * t1 / (t2 * (t2 - t1)) - f0 * (t1 + t2) / (t1 * t2)
            }
        }
    }

    /// Values at the mesh nodes. Sampled data must sit on exactly those nodes.
    pub fn node_values(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        match self {
            RightHandSide::Callable { f, .. } => {
                let mut v: Vec<f64> = mesh.nodes().iter().map(|&t| f(t)).collect();
                v[0] = 0.0;
                Ok(v)
            }
            RightHandSide::Sampled { times, values } => {
                let nodes = mesh.nodes();
                let aligned = times.len() == nodes.len()
                    && times
                        .iter()
                        .zip(nodes)
                        .all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
                if !aligned {
                    return Err(Error::config(format!(
                        "sampled right-hand side ({} samples) is not on the {}-interval mesh",
                        times.len(),
                        mesh.intervals()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

pub(crate) fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let j = times.partition_point(|&x| x < t);
    if times[j] == t {
        return values[j];
    }
    let (a, b) = (times[j - 1], times[j]);
    values[j - 1] + (values[j] - values[j - 1]) * (t - a) / (b - a)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Lavrentiev parameter; 0 solves the first-kind equation as is.
    pub alpha: f64,
    pub denominator_tolerance: f64,
    /// Midpoint subcells per breakpoint cell.
    pub refinement: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            alpha: 0.0,
            denominator_tolerance: 1e-12,
            refinement: 1,
        }
    }
}

impl SolverOptions {
    pub fn with_alpha(alpha: f64) -> Self {
        SolverOptions {
            alpha,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.denominator_tolerance > 0.0) {
            return Err(Error::config("denominator tolerance must be positive"));
        }
        if self.refinement == 0 {
            return Err(Error::config("quadrature refinement must be positive"));
        }
        Ok(())
    }
}

/// Continuous piecewise-linear function through `(t_i, x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearSolution {
    mesh: Mesh,
    coefficients: Vec<f64>,
}

impl PiecewiseLinearSolution {
    pub fn new(mesh: Mesh, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != mesh.nodes().len() {
            return Err(Error::config(format!(
                "{} coefficients for a mesh with {} nodes",
                coefficients.len(),
                mesh.nodes().len()
            )));
        }
        Ok(PiecewiseLinearSolution { mesh, coefficients })
    }

    /// Interpolates `x` at the mesh nodes.
    pub fn interpolate(mesh: Mesh, x: impl Fn(f64) -> f64) -> Self {
        let coefficients = mesh.nodes().iter().map(|&t| x(t)).collect();
        PiecewiseLinearSolution { mesh, coefficients }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let horizon = self.mesh.horizon();
        let slack = 1e-12 * horizon.max(1.0);
        if !(t >= -slack && t <= horizon + slack) {
            return Err(Error::Domain(format!("t={t} outside [0, {horizon}]")));
        }
        Ok(self.value_at(t))
    }

    /// Unchecked evaluation; exact at nodes, clamped outside the mesh.
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        interpolate(self.mesh.nodes(), &self.coefficients, t)
    }

    /// Value of the hat expansion inside 1-based interval `j`.
    #[inline]
    pub(crate) fn value_in(&self, j: usize, s: f64) -> f64 {
        hat_value(self.mesh.nodes(), &self.coefficients, j, s)
    }

    pub fn max_abs_error(&self, exact: impl Fn(f64) -> f64) -> f64 {
        self.mesh
            .nodes()
            .iter()
            .zip(&self.coefficients)
            .map(|(&t, &x)| (x - exact(t)).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
fn hat_value(nodes: &[f64], x: &[f64], j: usize, s: f64) -> f64 {
    let (a, b) = (nodes[j - 1], nodes[j]);
    x[j - 1] + (x[j] - x[j - 1]) * (s - a) / (b - a)
}

/// `x(0) = f'(0) / sum_i K_i(0,0) [alpha_i'(0) - alpha_{i-1}'(0)]`.
pub fn solve_x0(kernel: &PiecewiseKernel, rhs: &RightHandSide) -> Result<f64> {
    solve_x0_with(kernel, rhs, SolverOptions::default().denominator_tolerance)
}

pub(crate) fn solve_x0_with(
    kernel: &PiecewiseKernel,
    rhs: &RightHandSide,
    tolerance: f64,
) -> Result<f64> {
    let denominator = kernel.x0_denominator();
    if !(denominator.abs() > tolerance) {
        return Err(Error::SingularProblem { denominator });
    }
    Ok(rhs.derivative_at_zero(kernel.horizon()) / denominator)
}

/// One-point midpoint estimate of `x_1` that ignores `x_0`:
/// `x_1 = f_1 / sum_i (alpha_i(t_1) - alpha_{i-1}(t_1)) K_i(t_1, mid_i)`.
pub fn solve_first_node(kernel: &PiecewiseKernel, rhs: &RightHandSide, mesh: &Mesh) -> Result<f64> {
    check_horizons(mesh, kernel)?;
    let t1 = mesh.nodes()[1];
    let bounds = kernel.segment_bounds(t1)?;
    let denominator: f64 = kernel
        .segments()
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            (bounds[i + 1] - bounds[i]) * seg.value(t1, 0.5 * (bounds[i] + bounds[i + 1]))
        })
        .sum();
    if !(denominator.abs() > SolverOptions::default().denominator_tolerance) {
        return Err(Error::SingularProblem { denominator });
    }
    Ok(rhs.node_values(mesh)?[1] / denominator)
}

/// Midpoint sample with the kernel value folded into the weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct WeightedPoint {
    pub interval: usize,
    pub s: f64,
    pub weight: f64,
}

/// Row `k` integrates `K(t_k, .)` over `[0, t_k]`. Row 0 is empty.
pub(crate) fn weighted_rows(
    mesh: &Mesh,
    kernel: &PiecewiseKernel,
    refinement: usize,
) -> Vec<Vec<WeightedPoint>> {
    mesh.nodes()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            if k == 0 {
                return Vec::new();
            }
            quadrature_points(mesh, kernel, t, refinement)
                .into_iter()
                .map(|p| WeightedPoint {
                    interval: p.interval,
                    s: p.s,
                    weight: p.width * kernel.segments()[p.segment].value(t, p.s),
                })
                .collect()
        })
        .collect()
}

/// The forward sweep over `k = 1..=N`. `rows[k]` must come from
/// [`weighted_rows`] on the same mesh.
pub(crate) fn march(
    mesh: &Mesh,
    rows: &[Vec<WeightedPoint>],
    f: &[f64],
    x0: f64,
    options: &SolverOptions,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    let nodes = mesh.nodes();
    let n = mesh.intervals();
    let tol = options.denominator_tolerance;
    let mut x = vec![0.0; n + 1];
    x[0] = x0;
    if !x0.is_finite() {
        return Err(Error::Instability { step: 0 });
    }
    for k in 1..=n {
        let (left, hk) = (nodes[k - 1], nodes[k] - nodes[k - 1]);
        let mut history = 0.0;
        let mut own = 0.0;
        let mut slope_part = 0.0;
        for p in &rows[k] {
            if p.interval < k {
                history += p.weight * hat_value(nodes, &x, p.interval, p.s);
            } else {
                own += p.weight;
                slope_part += p.weight * (p.s - left) / hk;
            }
        }
        if !(slope_part.abs() > tol) {
            if options.alpha > 0.0 {
                warnings.push(format!(
                    "step {k}: collocation divisor {slope_part:e} underflows, regularization term carries the step"
                ));
            } else {
                return Err(Error::SingularStep {
                    step: k,
                    divisor: slope_part,
                });
            }
        }
        let divisor = slope_part + options.alpha;
        if !(divisor.abs() > tol) {
            return Err(Error::SingularStep { step: k, divisor });
        }
        let xk = (f[k] - history - x[k - 1] * (own - slope_part)) / divisor;
        if !xk.is_finite() {
            return Err(Error::Instability { step: k });
        }
        x[k] = xk;
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub solution: PiecewiseLinearSolution,
    pub warnings: Vec<String>,
}

pub fn solve(
    kernel: &PiecewiseKernel,
    rhs: &RightHandSide,
    mesh: &Mesh,
    options: &SolverOptions,
) -> Result<PiecewiseLinearSolution> {
    solve_detailed(kernel, rhs, mesh, options).map(|o| o.solution)
}

/// [`solve`] that also returns non-fatal warnings.
pub fn solve_detailed(
    kernel: &PiecewiseKernel,
    rhs: &RightHandSide,
    mesh: &Mesh,
    options: &SolverOptions,
) -> Result<SolveOutcome> {
    options.check()?;
    check_horizons(mesh, kernel)?;
    let f = rhs.node_values(mesh)?;
    let x0 = solve_x0_with(kernel, rhs, options.denominator_tolerance)?;
    let rows = weighted_rows(mesh, kernel, options.refinement);
    let mut warnings = Vec::new();
    let x = march(mesh, &rows, &f, x0, options, &mut warnings)?;
    Ok(SolveOutcome {
        solution: PiecewiseLinearSolution::new(mesh.clone(), x)?,
        warnings,
    })
}

/// Midpoint quadrature of `int_0^t K(t,s) x_N(s) ds` on aligned breakpoints.
pub fn forward_apply(
    kernel: &PiecewiseKernel,
    solution: &PiecewiseLinearSolution,
    t: f64,
) -> Result<f64> {
    forward_apply_refined(kernel, solution, t, 1)
}

pub fn forward_apply_refined(
    kernel: &PiecewiseKernel,
    solution: &PiecewiseLinearSolution,
    t: f64,
    refinement: usize,
) -> Result<f64> {
    check_horizons(solution.mesh(), kernel)?;
    solution.eval(t)?;
    let t = t.clamp(0.0, kernel.horizon());
    Ok(quadrature_points(solution.mesh(), kernel, t, refinement)
        .into_iter()
        .map(|p| {
            p.width
                * kernel.segments()[p.segment].value(t, p.s)
                * solution.value_in(p.interval, p.s)
        })
        .sum())
}

/// Largest `|alpha x_k + (A x_N)(t_k) - f_k|` over the nodes.
pub fn max_node_residual(
    kernel: &PiecewiseKernel,
    rhs: &RightHandSide,
    solution: &PiecewiseLinearSolution,
    options: &SolverOptions,
) -> Result<f64> {
    let f = rhs.node_values(solution.mesh())?;
    let mut worst: f64 = 0.0;
    for (k, &t) in solution.mesh().nodes().iter().enumerate() {
        let lhs = options.alpha * solution.coefficients()[k]
            + forward_apply_refined(kernel, solution, t, options.refinement)?;
        worst = worst.max((lhs - f[k]).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub max_node_error: f64,
    /// `log(e_prev / e) / log(N / N_prev)`; absent for the first row or when
    /// either error is at the round-off floor.
    pub observed_order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Every error is at the round-off floor: the solution is reproduced
    /// exactly and no order can be observed.
    pub exact: bool,
}

impl ConvergenceStudy {
    pub fn terminal_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.observed_order)
    }

    pub fn from_errors(pairs: &[(usize, f64)], floor: f64) -> Self {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(pairs.len());
        for (idx, &(n, err)) in pairs.iter().enumerate() {
            let observed_order = if idx == 0 {
                None
            } else {
                let (prev_n, prev_err) = pairs[idx - 1];
                if prev_err > floor && err > floor {
                    Some((prev_err / err).ln() / (n as f64 / prev_n as f64).ln())
                } else {
                    None
                }
            };
            rows.push(ConvergenceRow {
                n,
                max_node_error: err,
                observed_order,
            });
        }
        let exact = pairs.iter().all(|&(_, e)| e <= floor);
        ConvergenceStudy { rows, exact }
    }
}

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.len() < 2 {
        return Err(Error::config(
            "convergence study needs at least two mesh sizes",
        ));
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("mesh sizes must be positive and increasing"));
    }
    Ok(())
}

/// Max-node error of uniform-mesh solves against a known solution.
pub fn convergence_study(
    kernel: &PiecewiseKernel,
    rhs: &RightHandSide,
    true_solution: impl Fn(f64) -> f64,
    n_list: &[usize],
    options: &SolverOptions,
) -> Result<ConvergenceStudy> {
    check_n_list(n_list)?;
    if matches!(rhs, RightHandSide::Sampled { .. }) {
        return Err(Error::config(
            "convergence study needs a callable right-hand side",
        ));
    }
    let mut pairs = Vec::with_capacity(n_list.len());
    let mut scale: f64 = 1.0;
    for &n in n_list {
        let mesh = Mesh::uniform(kernel.horizon(), n)?;
        let solution = solve(kernel, rhs, &mesh, options)?;
        scale = mesh
            .nodes()
            .iter()
            .map(|&t| true_solution(t).abs())
            .fold(scale, f64::max);
        pairs.push((n, solution.max_abs_error(&true_solution)));
    }
    Ok(ConvergenceStudy::from_errors(
        &pairs,
        round_off_floor(scale),
    ))
}

pub(crate) fn round_off_floor(scale: f64) -> f64 {
    1e-10 * scale.max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseStudyRow {
    pub n: usize,
    pub max_node_error: f64,
}

/// Solves with `f(t_k) + U(-delta, delta)` for `k >= 1` on each mesh size.
/// The draws for mesh size `N` come from ChaCha stream `N` of `seed`.
pub fn noise_study(
    kernel: &PiecewiseKernel,
    f: impl Fn(f64) -> f64,
    true_solution: impl Fn(f64) -> f64,
    n_list: &[usize],
    delta: f64,
    seed: u64,
    options: &SolverOptions,
) -> Result<Vec<NoiseStudyRow>> {
    check_n_list(n_list)?;
    if !(delta >= 0.0) {
        return Err(Error::config("noise level must be nonnegative"));
    }
    n_list
        .iter()
        .map(|&n| {
            let mesh = Mesh::uniform(kernel.horizon(), n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            let mut values: Vec<f64> = mesh.nodes().iter().map(|&t| f(t)).collect();
            values[0] = 0.0;
            if delta > 0.0 {
                for v in values.iter_mut().skip(1) {
                    *v += rng.gen_range(-delta..=delta);
                }
            }
            let rhs = RightHandSide::sampled(mesh.nodes().to_vec(), values)?;
            let solution = solve(kernel, &rhs, &mesh, options)?;
            Ok(NoiseStudyRow {
                n,
                max_node_error: solution.max_abs_error(&true_solution),
            })
        })
        .collect()
}
