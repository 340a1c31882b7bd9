//! Manufactured-solution cases with closed-form right-hand sides, used by
//! the `convergence-report` command.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::PiecewiseKernel;
use crate::linear::PiecewiseLinearSolution;
use crate::linear::{
    convergence_study, noise_study, ConvergenceStudy, NoiseStudyRow, RightHandSide, SolverOptions,
};
use crate::mesh::Mesh;
use crate::nonlinear::{self, NonlinearOptions, NonlinearProblem, Nonlinearity};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub const CASE_NAMES: [&str; 6] = [
    "unit-constant",
    "banded-linear",
    "banded-sin",
    "banded-sin-long",
    "banded-exp",
    "cubic",
];

const BAND_VALUES: [f64; 3] = [1.0, 0.9, 0.85];
const BAND_RATIOS: [f64; 2] = [0.25, 0.75];

/// `sum_i v_i [F(r_i t) - F(r_{i-1} t)]` for the three-band kernel.
pub fn banded_integral(antiderivative: impl Fn(f64) -> f64, t: f64) -> f64 {
    let b = [0.0, BAND_RATIOS[0] * t, BAND_RATIOS[1] * t, t];
    BAND_VALUES
        .iter()
        .enumerate()
        .map(|(i, v)| v * (antiderivative(b[i + 1]) - antiderivative(b[i])))
        .sum()
}

#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub kernel: PiecewiseKernel,
    pub f: Scalar,
    pub f_prime0: f64,
    pub exact: Scalar,
    /// `Some` for nonlinear cases, with the scale of the initial guess
    /// `x_init = scale * exact`.
    pub nonlinearity: Option<(Nonlinearity, f64)>,
}

impl ManufacturedCase {
    pub fn by_name(name: &str) -> Result<Self> {
        let banded = |horizon: f64| PiecewiseKernel::three_band_efficiency(horizon);
        let case = |kernel, f: Scalar, f_prime0, exact: Scalar| ManufacturedCase {
            name: name.to_string(),
            kernel,
            f,
            f_prime0,
            exact,
            nonlinearity: None,
        };
        Ok(match name {
            "unit-constant" => case(
                PiecewiseKernel::constant(1.0, 1.0)?,
                Arc::new(|t| t),
                1.0,
                Arc::new(|_| 1.0),
            ),
            "banded-linear" => case(
                banded(1.0)?,
                Arc::new(|t| 0.4421875 * t * t),
                0.0,
                Arc::new(|s| s),
            ),
            "banded-sin" | "banded-sin-long" => {
                let horizon = if name == "banded-sin" { 1.0 } else { 10.0 };
                case(
                    banded(horizon)?,
                    Arc::new(|t| banded_integral(|s: f64| -s.cos(), t)),
                    0.0,
                    Arc::new(f64::sin),
                )
            }
            "banded-exp" => case(
                banded(1.0)?,
                Arc::new(|t| banded_integral(f64::exp, t)),
                banded(1.0)?.x0_denominator(),
                Arc::new(f64::exp),
            ),
            "cubic" => ManufacturedCase {
                nonlinearity: Some((Nonlinearity::cube(), 0.8)),
                ..case(
                    PiecewiseKernel::constant(1.0, 1.0)?,
                    Arc::new(|t| t.powi(4) / 4.0),
                    0.0,
                    Arc::new(|s| s),
                )
            },
            _ => {
                return Err(Error::config(format!(
                    "unknown case '{name}'; known: {}",
                    CASE_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn rhs(&self) -> Result<RightHandSide> {
        let f = Arc::clone(&self.f);
        RightHandSide::callable_with_derivative(move |t| f(t), self.f_prime0)
    }

    /// Max-node errors over `n_list`.
    pub fn convergence(&self, n_list: &[usize], alpha: f64) -> Result<ConvergenceStudy> {
        let rhs = self.rhs()?;
        let exact = Arc::clone(&self.exact);
        match &self.nonlinearity {
            None => convergence_study(
                &self.kernel,
                &rhs,
                move |s| exact(s),
                n_list,
                &SolverOptions::with_alpha(alpha),
            ),
            Some((g, scale)) => {
                let problem = NonlinearProblem::uniform(self.kernel.clone(), g.clone(), rhs)?;
                let mut options = NonlinearOptions::default();
                options.solver.alpha = alpha;
                let mut pairs = Vec::with_capacity(n_list.len());
                for &n in n_list {
                    let mesh = Mesh::uniform(self.kernel.horizon(), n)?;
                    let init =
                        PiecewiseLinearSolution::interpolate(mesh.clone(), |s| scale * exact(s));
                    let (solution, _) = nonlinear::solve(&problem, &mesh, &init, &options)?;
                    pairs.push((n, solution.max_abs_error(|s| exact(s))));
                }
                Ok(ConvergenceStudy::from_errors(&pairs, 1e-10))
            }
        }
    }

    /// Errors with uniform noise of half-width `delta` added to `f`.
    pub fn noise(&self, n_list: &[usize], delta: f64, seed: u64, alpha: f64) -> Result<NoiseStudy> {
        if self.nonlinearity.is_some() {
            return Err(Error::config("noise studies cover linear cases only"));
        }
        let (f, exact) = (Arc::clone(&self.f), Arc::clone(&self.exact));
        let rows = noise_study(
            &self.kernel,
            move |t| f(t),
            move |s| exact(s),
            n_list,
            delta,
            seed,
            &SolverOptions::with_alpha(alpha),
        )?;
        Ok(NoiseStudy::new(delta, seed, rows))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseStudy {
    pub delta: f64,
    pub seed: u64,
    pub rows: Vec<NoiseStudyRow>,
    /// Mesh size with the smallest error.
    pub best_n: usize,
    /// The minimum is attained strictly inside the scanned range.
    pub interior_minimum: bool,
}

impl NoiseStudy {
    pub fn new(delta: f64, seed: u64, rows: Vec<NoiseStudyRow>) -> Self {
        let best = rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.max_node_error.total_cmp(&b.1.max_node_error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        NoiseStudy {
            delta,
            seed,
            best_n: rows.get(best).map_or(0, |r| r.n),
            interior_minimum: best > 0 && best + 1 < rows.len(),
            rows,
        }
    }
}
