//! Storage load leveling.
//!
//! The storage must absorb the imbalance between load and base generation.
//! Its charge/discharge power `x` (positive = discharge to the grid) is the
//! solution of the integral equation whose right-hand side is the cumulative
//! energy imbalance
//!
//! ```text
//! f(t) = int_0^t (load - base) dt'    [MWh]
//! ```
//!
//! and whose kernel carries the efficiency of the stored energy. Time is
//! shifted so the first sample sits at 0; the kernel horizon is the series
//! span in hours. Storage capacity and power limits are not modelled.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::PiecewiseKernel;
use crate::linear::{solve_detailed, RightHandSide, SolverOptions};
use crate::mesh::Mesh;
use crate::series::{error_metrics, LoadSeries};

#[derive(Clone, Debug)]
pub struct DispatchCase {
    name: String,
    load: LoadSeries,
    base_generation: LoadSeries,
    kernel: PiecewiseKernel,
    options: SolverOptions,
}

impl DispatchCase {
    pub fn new(
        name: impl Into<String>,
        load: LoadSeries,
        base_generation: LoadSeries,
        kernel: PiecewiseKernel,
        options: SolverOptions,
    ) -> Result<Self> {
        let name = name.into();
        options.check()?;
        if load.len() < 3 {
            return Err(Error::config("dispatch needs at least three samples"));
        }
        if !load.same_grid(&base_generation) {
            return Err(Error::config(
                "load and base generation are on different grids",
            ));
        }
        let span = load.span();
        if (kernel.horizon() - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::config(format!(
                "kernel horizon {} differs from the series span {span} h",
                kernel.horizon()
            )));
        }
        Ok(DispatchCase {
            name,
            load,
            base_generation,
            kernel,
            options,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn load(&self) -> &LoadSeries {
        &self.load
    }

    pub fn base_generation(&self) -> &LoadSeries {
        &self.base_generation
    }

    pub fn kernel(&self) -> &PiecewiseKernel {
        &self.kernel
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// The same case with another load series (for example the actual load
    /// behind a forecast) and regularization parameter.
    pub fn with_load(&self, load: LoadSeries, alpha: f64) -> Result<Self> {
        Self::new(
            self.name.clone(),
            load,
            self.base_generation.clone(),
            self.kernel.clone(),
            SolverOptions {
                alpha,
                ..self.options
            },
        )
    }

    fn mesh(&self) -> Result<Mesh> {
        Mesh::uniform(self.load.span(), self.load.len() - 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispatchStrategy {
    /// Power on the input grid, MW; positive = discharge.
    pub power: LoadSeries,
    pub alpha: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrategyScore {
    pub rmse: f64,
    pub mae: f64,
}

/// Cumulative trapezoid integral of `load - base` on the normalized mesh.
pub fn build_rhs(case: &DispatchCase) -> Result<RightHandSide> {
    let mesh = case.mesh()?;
    let imbalance: Vec<f64> = case
        .load
        .values()
        .iter()
        .zip(case.base_generation.values())
        .map(|(l, b)| l - b)
        .collect();
    let nodes = mesh.nodes();
    let mut f = vec![0.0; nodes.len()];
    for k in 1..nodes.len() {
        f[k] = f[k - 1] + 0.5 * (nodes[k] - nodes[k - 1]) * (imbalance[k - 1] + imbalance[k]);
    }
    RightHandSide::sampled(nodes.to_vec(), f)
}

pub fn compute_strategy(case: &DispatchCase) -> Result<DispatchStrategy> {
    let wrap = |e: Error| Error::Case {
        case: case.name.clone(),
        source: Box::new(e),
    };
    let mesh = case.mesh().map_err(wrap)?;
    let rhs = build_rhs(case).map_err(wrap)?;
    let outcome = solve_detailed(&case.kernel, &rhs, &mesh, &case.options).map_err(wrap)?;
    let power = case
        .load
        .with_values(outcome.solution.into_coefficients())
        .map_err(wrap)?;
    Ok(DispatchStrategy {
        power,
        alpha: case.options.alpha,
        warnings: outcome.warnings,
    })
}

pub fn score_strategy(
    candidate: &DispatchStrategy,
    benchmark: &DispatchStrategy,
) -> Result<StrategyScore> {
    if !candidate.power.same_grid(&benchmark.power) {
        return Err(Error::config(
            "candidate and benchmark strategies are on different grids",
        ));
    }
    let (mae, rmse) = error_metrics(candidate.power.values(), benchmark.power.values());
    Ok(StrategyScore { rmse, mae })
}

/// Net load seen by base generation, `load - strategy`.
pub fn leveled_load(case: &DispatchCase, strategy: &DispatchStrategy) -> Result<LoadSeries> {
    if !case.load.same_grid(&strategy.power) {
        return Err(Error::config("strategy is not on the load grid"));
    }
    let net = case
        .load
        .values()
        .iter()
        .zip(strategy.power.values())
        .map(|(l, x)| l - x)
        .collect();
    case.load.with_values(net)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub alpha: f64,
    pub score: Option<StrategyScore>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSearch {
    pub best_alpha: f64,
    pub best_score: StrategyScore,
    pub table: Vec<GridRow>,
}

/// Scores the case at every alpha against `benchmark`. Alphas are solved in
/// parallel; ties go to the alpha listed first.
pub fn alpha_grid_search(
    case: &DispatchCase,
    benchmark: &DispatchStrategy,
    alphas: &[f64],
) -> Result<GridSearch> {
    if alphas.is_empty() {
        return Err(Error::config("alpha grid is empty"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(Error::config(format!("alpha must be >= 0, got {a}")));
    }
    let table: Vec<GridRow> = alphas
        .par_iter()
        .map(|&alpha| {
            let scored = case
                .with_load(case.load.clone(), alpha)
                .and_then(|c| compute_strategy(&c))
                .and_then(|s| score_strategy(&s, benchmark));
            match scored {
                Ok(score) => GridRow {
                    alpha,
                    score: Some(score),
                    error: None,
                },
                Err(e) => GridRow {
                    alpha,
                    score: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let best = table
        .iter()
        .filter_map(|r| r.score.map(|s| (r.alpha, s)))
        .fold(None::<(f64, StrategyScore)>, |acc, (a, s)| match acc {
            Some((_, b)) if b.rmse <= s.rmse => acc,
            _ => Some((a, s)),
        });
    match best {
        Some((best_alpha, best_score)) => Ok(GridSearch {
            best_alpha,
            best_score,
            table,
        }),
        None => Err(Error::Search(format!(
            "all {} alpha values failed; first: {}",
            table.len(),
            table[0].error.as_deref().unwrap_or("")
        ))),
    }
}

/// Parses `0.5` or `grid:0,0.1,0.5`.
pub fn parse_alpha_spec(spec: &str) -> Result<Vec<f64>> {
    let body = spec.strip_prefix("grid:").unwrap_or(spec);
    let alphas = body
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad alpha '{a}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if !spec.starts_with("grid:") && alphas.len() != 1 {
        return Err(Error::config("several alphas need the 'grid:' prefix"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(Error::config(format!("alpha must be >= 0, got {a}")));
    }
    Ok(alphas)
}
