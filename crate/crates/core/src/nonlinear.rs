//! Nonlinear first-kind equations
//!
//! ```text
//! sum_i int_{alpha_{i-1}(t)}^{alpha_i(t)} K_i(t,s) G_i(s, x(s)) ds = f(t)
//! ```
//!
//! solved by the modified Newton-Kantorovich scheme: the derivative operator
//! is frozen at the initial guess `x_init`, so every iteration is a linear
//! equation with the fixed kernel `K_i(t,s) G_ix(s, x_init(s))` and a new
//! right-hand side
//!
//! ```text
//! Psi_m(t) = f(t) + sum_i int K_i(t,s) [G_ix(s, x_init(s)) x_m(s) - G_i(s, x_m(s))] ds
//! ```
//!
//! handled by the collocation sweep of [`crate::linear`].

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KernelSegment, PiecewiseKernel};
use crate::linear::{march, weighted_rows, PiecewiseLinearSolution, RightHandSide, SolverOptions};
use crate::mesh::{check_horizons, quadrature_points, Mesh, QuadPoint};

pub type NonlinearFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Relative step of the central-difference fallback for `G_x`.
const FD_RELATIVE_STEP: f64 = 1e-6;

/// `G(s, x)` together with its partial derivative in `x`.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    g: NonlinearFn,
    dg: Option<NonlinearFn>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("closed_form_derivative", &self.dg.is_some())
            .finish()
    }
}

impl Nonlinearity {
    pub fn new<G, D>(name: impl Into<String>, g: G, dg: D) -> Self
    where
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Nonlinearity {
            name: name.into(),
            g: Arc::new(g),
            dg: Some(Arc::new(dg)),
        }
    }

    /// `G_x` falls back to a central difference with step `1e-6 max(1, |x|)`.
    pub fn without_derivative<G>(name: impl Into<String>, g: G) -> Self
    where
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Nonlinearity {
            name: name.into(),
            g: Arc::new(g),
            dg: None,
        }
    }

    pub fn identity() -> Self {
        Self::new("identity", |_, x| x, |_, _| 1.0)
    }

    pub fn square() -> Self {
        Self::new("square", |_, x| x * x, |_, x| 2.0 * x)
    }

    pub fn cube() -> Self {
        Self::new("cube", |_, x| x * x * x, |_, x| 3.0 * x * x)
    }

    /// Odd power law `sign(x) |x|^p`.
    pub fn power(p: f64) -> Self {
        Self::new(
            format!("power:{p}"),
            move |_, x: f64| x.signum() * x.abs().powf(p),
            move |_, x: f64| p * x.abs().powf(p - 1.0),
        )
    }

    /// `c tanh(x / c)`: linear for small `x`, saturating at `+-c`.
    pub fn saturating(c: f64) -> Self {
        Self::new(
            format!("saturating:{c}"),
            move |_, x: f64| c * (x / c).tanh(),
            move |_, x: f64| {
                let th = (x / c).tanh();
                1.0 - th * th
            },
        )
    }

    /// Built-in catalog: `identity`, `square`, `cube`, `power:<p>`,
    /// `saturating:<c>`.
    pub fn builtin(id: &str) -> Result<Self> {
        let parse = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite())
                .ok_or_else(|| Error::config(format!("bad parameter in nonlinearity '{id}'")))
        };
        match id {
            "identity" | "linear" => Ok(Self::identity()),
            "square" => Ok(Self::square()),
            "cube" => Ok(Self::cube()),
            _ => {
                if let Some(p) = id.strip_prefix("power:") {
                    let p = parse(p)?;
                    if p < 1.0 {
                        return Err(Error::config("power nonlinearity needs p >= 1"));
                    }
                    Ok(Self::power(p))
                } else if let Some(c) = id.strip_prefix("saturating:") {
                    let c = parse(c)?;
                    if !(c > 0.0) {
                        return Err(Error::config("saturation level must be positive"));
                    }
                    Ok(Self::saturating(c))
                } else {
                    Err(Error::config(format!("unknown nonlinearity '{id}'")))
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn value(&self, s: f64, x: f64) -> f64 {
        (self.g)(s, x)
    }

    #[inline]
    pub fn derivative(&self, s: f64, x: f64) -> f64 {
        match &self.dg {
            Some(dg) => dg(s, x),
            None => {
                let step = FD_RELATIVE_STEP * x.abs().max(1.0);
                ((self.g)(s, x + step) - (self.g)(s, x - step)) / (2.0 * step)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct NonlinearProblem {
    kernel: PiecewiseKernel,
    nonlinearities: Vec<Nonlinearity>,
    rhs: RightHandSide,
}

impl NonlinearProblem {
    /// One nonlinearity per kernel segment.
    pub fn new(
        kernel: PiecewiseKernel,
        nonlinearities: Vec<Nonlinearity>,
        rhs: RightHandSide,
    ) -> Result<Self> {
        if nonlinearities.len() != kernel.segment_count() {
            return Err(Error::config(format!(
                "{} nonlinearities for a kernel with {} segments",
                nonlinearities.len(),
                kernel.segment_count()
            )));
        }
        Ok(NonlinearProblem {
            kernel,
            nonlinearities,
            rhs,
        })
    }

    /// Same nonlinearity on every segment.
    pub fn uniform(kernel: PiecewiseKernel, g: Nonlinearity, rhs: RightHandSide) -> Result<Self> {
        let n = kernel.segment_count();
        Self::new(kernel, vec![g; n], rhs)
    }

    pub fn kernel(&self) -> &PiecewiseKernel {
        &self.kernel
    }

    pub fn nonlinearities(&self) -> &[Nonlinearity] {
        &self.nonlinearities
    }

    pub fn rhs(&self) -> &RightHandSide {
        &self.rhs
    }

    /// Checks that every `G_i` and `G_ix` is finite on a `samples x samples`
    /// grid of `[0, T] x [x_lo, x_hi]`.
    pub fn check_finite(&self, x_lo: f64, x_hi: f64, samples: usize) -> Result<()> {
        let samples = samples.max(2);
        let horizon = self.kernel.horizon();
        for (i, g) in self.nonlinearities.iter().enumerate() {
            for a in 0..samples {
                let s = horizon * a as f64 / (samples - 1) as f64;
                for b in 0..samples {
                    let x = x_lo + (x_hi - x_lo) * b as f64 / (samples - 1) as f64;
                    if !g.value(s, x).is_finite() || !g.derivative(s, x).is_finite() {
                        return Err(Error::Evaluation(format!(
                            "G_{}({s}, {x}) or its derivative is not finite",
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `K_i(0,0) [alpha_i'(0) - alpha_{i-1}'(0)]` per segment.
    fn origin_weights(&self) -> Vec<f64> {
        let k = &self.kernel;
        (1..=k.segment_count())
            .map(|i| {
                k.segments()[i - 1].value(0.0, 0.0)
                    * (k.curve_derivative(i, 0.0) - k.curve_derivative(i - 1, 0.0))
            })
            .collect()
    }
}

/// The frozen kernel with segments `K_i(t,s) G_ix(s, x0(s))` and the same
/// boundary curves.
pub fn linearized_kernel(
    problem: &NonlinearProblem,
    x0: &PiecewiseLinearSolution,
) -> Result<PiecewiseKernel> {
    check_horizons(x0.mesh(), &problem.kernel)?;
    let nodes = x0.mesh().nodes();
    for (i, g) in problem.nonlinearities.iter().enumerate() {
        let probes = nodes
            .iter()
            .copied()
            .chain(nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        for s in probes {
            let v = g.derivative(s, x0.value_at(s));
            if !v.is_finite() {
                return Err(Error::Evaluation(format!(
                    "G_{}x({s}, x0({s})) = {v} is not finite",
                    i + 1
                )));
            }
        }
    }
    let guess = Arc::new(x0.clone());
    let segments = problem
        .kernel
        .segments()
        .iter()
        .zip(&problem.nonlinearities)
        .map(|(seg, g)| {
            let (seg, g, guess) = (seg.clone(), g.clone(), Arc::clone(&guess));
            KernelSegment::new(move |t, s| seg.value(t, s) * g.derivative(s, guess.value_at(s)))
        })
        .collect();
    PiecewiseKernel::new(
        segments,
        problem.kernel.boundaries().to_vec(),
        problem.kernel.horizon(),
    )
}

/// `(F x)(t) = sum_i int K_i(t,s) G_i(s, x(s)) ds - f(t)` by the aligned
/// midpoint rule.
pub fn residual(problem: &NonlinearProblem, x: &PiecewiseLinearSolution, t: f64) -> Result<f64> {
    residual_refined(problem, x, t, 1)
}

pub fn residual_refined(
    problem: &NonlinearProblem,
    x: &PiecewiseLinearSolution,
    t: f64,
    refinement: usize,
) -> Result<f64> {
    check_horizons(x.mesh(), &problem.kernel)?;
    x.eval(t)?;
    let t = t.clamp(0.0, problem.kernel.horizon());
    let points = quadrature_points(x.mesh(), &problem.kernel, t, refinement);
    Ok(apply_nonlinear(problem, &points, t, x) - problem.rhs.value(t))
}

fn apply_nonlinear(
    problem: &NonlinearProblem,
    points: &[QuadPoint],
    t: f64,
    x: &PiecewiseLinearSolution,
) -> f64 {
    points
        .iter()
        .map(|p| {
            let k = problem.kernel.segments()[p.segment].value(t, p.s);
            p.width * k * problem.nonlinearities[p.segment].value(p.s, x.value_in(p.interval, p.s))
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonlinearOptions {
    /// Stop when the max-norm of the nodal update is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub solver: SolverOptions,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions {
            tolerance: 1e-8,
            max_iterations: 50,
            solver: SolverOptions {
                refinement: 4,
                ..SolverOptions::default()
            },
        }
    }
}

/// How `x(0)` of each iterate is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OriginRule {
    /// Derivative formula applied to `Psi_m`.
    DerivativeFormula,
    /// Frozen kernel is degenerate at the origin; `x(0)` solves
    /// `sum_i w_i G_i(0, x) = f'(0)` once.
    ScalarEquation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationTrace {
    /// `||x_{m+1} - x_m||` over the nodes, one entry per iteration.
    pub update_norms: Vec<f64>,
    /// `max_k |(F x_m)(t_k)|` at the start of each iteration.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
    pub max_iterations_hit: bool,
    pub diverged: bool,
    pub origin_rule: OriginRule,
    /// Fingerprint of the frozen kernel's quadrature weights.
    pub kernel_checksum: u64,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.update_norms.len()
    }
}

/// FNV-1a over the bit patterns.
pub(crate) fn checksum(values: impl IntoIterator<Item = f64>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

/// Checksum of the frozen kernel's row weights for `x_init` on `mesh`.
pub fn frozen_kernel_checksum(
    problem: &NonlinearProblem,
    mesh: &Mesh,
    x_init: &PiecewiseLinearSolution,
    refinement: usize,
) -> Result<u64> {
    let frozen = linearized_kernel(problem, x_init)?;
    let rows = weighted_rows(mesh, &frozen, refinement);
    Ok(checksum(rows.iter().flatten().map(|p| p.weight)))
}

pub fn solve(
    problem: &NonlinearProblem,
    mesh: &Mesh,
    x_init: &PiecewiseLinearSolution,
    options: &NonlinearOptions,
) -> Result<(PiecewiseLinearSolution, IterationTrace)> {
    options.solver.check()?;
    if !(options.tolerance > 0.0) || options.max_iterations == 0 {
        return Err(Error::config(
            "nonlinear solve needs a positive tolerance and iteration cap",
        ));
    }
    check_horizons(mesh, &problem.kernel)?;
    if x_init.mesh() != mesh {
        return Err(Error::config(
            "initial guess is not defined on the problem mesh",
        ));
    }

    let refinement = options.solver.refinement;
    let horizon = problem.kernel.horizon();
    let nodes = mesh.nodes();
    let f = problem.rhs.node_values(mesh)?;

    // Built once; the modified scheme never re-linearizes.
    let frozen = linearized_kernel(problem, x_init)?;
    let frozen_rows = weighted_rows(mesh, &frozen, refinement);
    let kernel_checksum = checksum(frozen_rows.iter().flatten().map(|p| p.weight));
    let raw_rows: Vec<Vec<QuadPoint>> = nodes
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            if k == 0 {
                Vec::new()
            } else {
                quadrature_points(mesh, &problem.kernel, t, refinement)
            }
        })
        .collect();
    let raw_weights: Vec<Vec<f64>> = raw_rows
        .iter()
        .zip(nodes)
        .map(|(row, &t)| {
            row.iter()
                .map(|p| p.width * problem.kernel.segments()[p.segment].value(t, p.s))
                .collect()
        })
        .collect();
    let frozen_factor: Vec<Vec<f64>> = raw_rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|p| {
                    problem.nonlinearities[p.segment]
                        .derivative(p.s, x_init.value_in(p.interval, p.s))
                })
                .collect()
        })
        .collect();

    let weights0 = problem.origin_weights();
    let gx_init0: Vec<f64> = problem
        .nonlinearities
        .iter()
        .map(|g| g.derivative(0.0, x_init.coefficients()[0]))
        .collect();
    let frozen_den: f64 = weights0.iter().zip(&gx_init0).map(|(w, d)| w * d).sum();
    let fprime0 = problem.rhs.derivative_at_zero(horizon);
    let tol = options.solver.denominator_tolerance;
    let (origin_rule, fixed_origin) = if frozen_den.abs() > tol {
        (OriginRule::DerivativeFormula, None)
    } else {
        let x0 = solve_origin(
            problem,
            &weights0,
            fprime0,
            x_init.coefficients()[0],
            frozen_den,
        )?;
        (OriginRule::ScalarEquation, Some(x0))
    };

    let mut trace = IterationTrace {
        update_norms: Vec::new(),
        residual_norms: Vec::new(),
        converged: false,
        max_iterations_hit: false,
        diverged: false,
        origin_rule,
        kernel_checksum,
    };

    let mut current = x_init.clone();
    let mut psi = vec![0.0; nodes.len()];
    for iteration in 1..=options.max_iterations {
        let mut residual_norm: f64 = 0.0;
        for k in 1..nodes.len() {
            let mut applied = 0.0;
            let mut correction = 0.0;
            for ((p, &w), &gx) in raw_rows[k]
                .iter()
                .zip(&raw_weights[k])
                .zip(&frozen_factor[k])
            {
                let xm = current.value_in(p.interval, p.s);
                let g = problem.nonlinearities[p.segment].value(p.s, xm);
                applied += w * g;
                correction += w * (gx * xm - g);
            }
            residual_norm = residual_norm.max((applied - f[k]).abs());
            psi[k] = f[k] + correction;
        }
        let x0_next = match fixed_origin {
            Some(x0) => x0,
            None => {
                let xm0 = current.coefficients()[0];
                let psi_prime0: f64 = fprime0
                    + problem
                        .nonlinearities
                        .iter()
                        .zip(&weights0)
                        .zip(&gx_init0)
                        .map(|((g, w), gx)| w * (gx * xm0 - g.value(0.0, xm0)))
                        .sum::<f64>();
                psi_prime0 / frozen_den
            }
        };

        let mut warnings = Vec::new();
        let next = march(
            mesh,
            &frozen_rows,
            &psi,
            x0_next,
            &options.solver,
            &mut warnings,
        )
        .map_err(|e| Error::Iteration {
            iteration,
            source: Box::new(e),
        })?;
        let update = next
            .iter()
            .zip(current.coefficients())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trace.update_norms.push(update);
        trace.residual_norms.push(residual_norm);
        current = PiecewiseLinearSolution::new(mesh.clone(), next)?;

        if update <= options.tolerance {
            trace.converged = true;
            return Ok((current, trace));
        }
        if !update.is_finite() || growing(&trace.update_norms, 3) {
            trace.diverged = true;
            return Err(Error::Divergence(Box::new(trace)));
        }
    }
    trace.max_iterations_hit = true;
    Ok((current, trace))
}

/// Last `streak` updates each larger than the one before.
fn growing(norms: &[f64], streak: usize) -> bool {
    norms.len() > streak
        && norms[norms.len() - streak - 1..]
            .windows(2)
            .all(|w| w[1] > w[0])
}

/// Solves `sum_i w_i G_i(0, x) = f'(0)` for `x`, starting from `start`.
fn solve_origin(
    problem: &NonlinearProblem,
    weights: &[f64],
    fprime0: f64,
    start: f64,
    frozen_den: f64,
) -> Result<f64> {
    let phi = |x: f64| -> f64 {
        problem
            .nonlinearities
            .iter()
            .zip(weights)
            .map(|(g, w)| w * g.value(0.0, x))
            .sum::<f64>()
            - fprime0
    };
    let dphi = |x: f64| -> f64 {
        problem
            .nonlinearities
            .iter()
            .zip(weights)
            .map(|(g, w)| w * g.derivative(0.0, x))
            .sum()
    };
    scalar_root(phi, dphi, start, 1e-12 * fprime0.abs().max(1.0)).ok_or(Error::SingularProblem {
        denominator: frozen_den,
    })
}

/// Root of `phi` near `start`: Newton first, then outward bracketing and
/// bisection. `accept` is the residual accepted from Newton.
fn scalar_root(
    phi: impl Fn(f64) -> f64,
    dphi: impl Fn(f64) -> f64,
    start: f64,
    accept: f64,
) -> Option<f64> {
    let mut x = start;
    for _ in 0..100 {
        let value = phi(x);
        if value.abs() <= accept {
            return Some(x);
        }
        let slope = dphi(x);
        if !(slope.abs() > 0.0) || !slope.is_finite() {
            break;
        }
        let next = x - value / slope;
        if !next.is_finite() {
            break;
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    if phi(x).abs() <= accept {
        return Some(x);
    }

    let mut width = start.abs().max(1.0);
    for _ in 0..60 {
        let (lo, hi) = (start - width, start + width);
        let (flo, fhi) = (phi(lo), phi(hi));
        if flo.is_finite() && fhi.is_finite() && flo * fhi <= 0.0 {
            let (mut lo, mut hi, mut flo) = (lo, hi, flo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = phi(mid);
                if fm == 0.0 || (hi - lo) <= 1e-15 * mid.abs().max(1.0) {
                    return Some(mid);
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        width *= 2.0;
    }
    None
}

/// Initial guess from the problem linearized about `x = 0`:
/// `sum_i int K_i G_ix(s,0) x ds = f - sum_i int K_i G_i(s,0) ds`.
///
/// When that is singular (for example `G = x^3`), the linear equation is
/// solved for `y = G(s, x)` and inverted node by node, using the `G_i` of
/// the band that contains `s` at `t = T`. The second element then carries
/// a warning.
pub fn default_initial_guess(
    problem: &NonlinearProblem,
    mesh: &Mesh,
    options: &SolverOptions,
) -> Result<(PiecewiseLinearSolution, Option<String>)> {
    let zero = PiecewiseLinearSolution::interpolate(mesh.clone(), |_| 0.0);
    let attempt = || -> Result<PiecewiseLinearSolution> {
        let frozen = linearized_kernel(problem, &zero)?;
        let rows = weighted_rows(mesh, &frozen, options.refinement);
        let mut f = problem.rhs.node_values(mesh)?;
        for (k, &t) in mesh.nodes().iter().enumerate().skip(1) {
            let offset: f64 = quadrature_points(mesh, &problem.kernel, t, options.refinement)
                .iter()
                .map(|p| {
                    p.width
                        * problem.kernel.segments()[p.segment].value(t, p.s)
                        * problem.nonlinearities[p.segment].value(p.s, 0.0)
                })
                .sum();
            f[k] -= offset;
        }
        let weights0 = problem.origin_weights();
        let den: f64 = weights0
            .iter()
            .zip(&problem.nonlinearities)
            .map(|(w, g)| w * g.derivative(0.0, 0.0))
            .sum();
        if !(den.abs() > options.denominator_tolerance) {
            return Err(Error::SingularProblem { denominator: den });
        }
        let fprime0 = problem.rhs.derivative_at_zero(problem.kernel.horizon())
            - weights0
                .iter()
                .zip(&problem.nonlinearities)
                .map(|(w, g)| w * g.value(0.0, 0.0))
                .sum::<f64>();
        let mut warnings = Vec::new();
        let x = march(mesh, &rows, &f, fprime0 / den, options, &mut warnings)?;
        PiecewiseLinearSolution::new(mesh.clone(), x)
    };
    match attempt() {
        Ok(guess) => Ok((guess, None)),
        Err(first) => {
            let y = crate::linear::solve(&problem.kernel, &problem.rhs, mesh, options)?;
            let horizon = problem.kernel.horizon();
            let x = mesh
                .nodes()
                .iter()
                .zip(y.coefficients())
                .map(|(&s, &target)| {
                    let g = &problem.nonlinearities[problem.kernel.segment_index(horizon, s)];
                    scalar_root(
                        |x| g.value(s, x) - target,
                        |x| g.derivative(s, x),
                        target,
                        1e-12 * target.abs().max(1e-300),
                    )
                    .unwrap_or(target)
                })
                .collect();
            Ok((
                PiecewiseLinearSolution::new(mesh.clone(), x)?,
                Some(format!(
                    "linearization at zero failed ({first}); initial guess inverts G on the solution of the linear equation"
                )),
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem1Diagnostics {
    /// First update norm, the `eta` bound of the convergence theorem.
    pub eta: f64,
    /// Geometric rate fitted to the update norms.
    pub rate_estimate: f64,
    /// `h` with `1 - sqrt(1 - 2h) = rate`; only defined for rates in (0, 1).
    pub h_estimate: Option<f64>,
    pub bound_satisfied: bool,
}

/// Empirical check of the Kantorovich-type convergence bound. The rate is
/// a least-squares fit of `ln ||dx_m||` against `m`; the bound holds when
/// the fitted `h` is below 1/2 and every update norm stays inside the
/// envelope `eta * q^(m-1)` with `q = 1 - sqrt(1 - 2h)`.
pub fn theorem1_diagnostics(trace: &IterationTrace) -> Result<Theorem1Diagnostics> {
    let norms = &trace.update_norms;
    if norms.len() < 3 {
        return Err(Error::DiagnosticUnavailable(format!(
            "need at least 3 iterations, trace has {}",
            norms.len()
        )));
    }
    let eta = norms[0];
    let points: Vec<(f64, f64)> = norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(m, &v)| (m as f64, v.ln()))
        .collect();
    if points.len() < 2 {
        return Err(Error::DiagnosticUnavailable(
            "update norms are not positive".into(),
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let rate_estimate = (sxy / sxx).exp();

    let h_estimate = (rate_estimate > 0.0 && rate_estimate < 1.0)
        .then(|| 0.5 * (1.0 - (1.0 - rate_estimate).powi(2)));
    let bound_satisfied = match h_estimate {
        Some(h) if h < 0.5 => {
            let q = 1.0 - (1.0 - 2.0 * h).sqrt();
            norms
                .iter()
                .enumerate()
                .all(|(m, &v)| v <= eta * q.powi(m as i32) * (1.0 + 1e-9))
        }
        _ => false,
    };
    Ok(Theorem1Diagnostics {
        eta,
        rate_estimate,
        h_estimate,
        bound_satisfied,
    })
}
