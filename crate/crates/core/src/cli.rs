//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for configuration and input-format errors,
//! 3 for numerical failures. Reports are pretty JSON with a fixed key order
//! and no wall-clock data, so identical runs give identical bytes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cases::{ManufacturedCase, NoiseStudy};
use crate::dispatch::{
    alpha_grid_search, compute_strategy, leveled_load, parse_alpha_spec, score_strategy,
    DispatchCase, GridRow, StrategyScore,
};
use crate::error::{Error, Result};
use crate::forecast::{forecast_metrics, seasonal_naive, ForecastMetrics, ForecastRequest};
use crate::io;
use crate::kernel::{KernelSpec, PiecewiseKernel};
use crate::linear::{self, ConvergenceRow, PiecewiseLinearSolution, RightHandSide, SolverOptions};
use crate::mesh::Mesh;
use crate::nonlinear::{
    self, IterationTrace, NonlinearOptions, NonlinearProblem, Nonlinearity, Theorem1Diagnostics,
};

#[derive(Debug, Parser)]
#[command(
    name = "volterra-dispatch",
    version,
    about = "Volterra equation solver and storage dispatch"
)]
pub struct Cli {
    /// Suppress informational output on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Seed for noise injection in studies.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an equation given a kernel file and right-hand side samples.
    Solve(SolveArgs),
    /// Compute a storage charge/discharge strategy from load and base generation.
    Dispatch(DispatchArgs),
    /// Seasonal-naive load forecast.
    Forecast(ForecastArgs),
    /// Error table of a manufactured-solution case over several mesh sizes.
    ConvergenceReport(ConvergenceArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    /// `t,f` CSV starting at t = 0, f = 0.
    #[arg(long)]
    pub rhs: PathBuf,
    /// Mesh intervals; defaults to the rows of the right-hand side file.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub nonlinear: bool,
    /// Built-in nonlinearity: identity, square, cube, power:<p>, saturating:<c>.
    #[arg(long, default_value = "identity")]
    pub g: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Midpoint subcells per quadrature cell (default 1 linear, 4 nonlinear).
    #[arg(long)]
    pub refinement: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DispatchArgs {
    #[arg(long)]
    pub load: PathBuf,
    #[arg(long)]
    pub base: PathBuf,
    /// Kernel file; the three-band efficiency kernel when omitted.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// A single value or `grid:a1,a2,...`.
    #[arg(long, default_value = "0")]
    pub alpha: String,
    /// Actual load; its alpha = 0 strategy is the benchmark for scoring.
    #[arg(long)]
    pub benchmark_load: Option<PathBuf>,
    #[arg(long)]
    pub out_strategy: Option<PathBuf>,
    #[arg(long)]
    pub out_net: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub history: PathBuf,
    #[arg(long, default_value_t = 24)]
    pub horizon: usize,
    #[arg(long, default_value_t = 24)]
    pub period: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub score_against: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    /// unit-constant, banded-linear, banded-sin, banded-sin-long, banded-exp or cubic.
    #[arg(long, default_value = "banded-linear")]
    pub case: String,
    #[arg(long, default_value = "16,32,64,128", value_delimiter = ',')]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Half-width of uniform noise on f; adds a noise study to the report.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
    step: Option<usize>,
    iteration: Option<usize>,
    trace: Option<IterationTrace>,
}

#[derive(Debug, Serialize)]
struct ErrorReport {
    command: &'static str,
    status: &'static str,
    error: ErrorBody,
}

#[derive(Debug, Serialize)]
struct NonlinearSection {
    g: String,
    initial_guess_warning: Option<String>,
    trace: IterationTrace,
    diagnostics: Option<Theorem1Diagnostics>,
    diagnostics_unavailable: Option<String>,
}

#[derive(Debug, Serialize)]
struct SolveReport {
    command: &'static str,
    status: &'static str,
    n: usize,
    horizon: f64,
    alpha: f64,
    refinement: usize,
    resampled_rhs: bool,
    x0: f64,
    max_node_residual: f64,
    warnings: Vec<String>,
    nonlinear: Option<NonlinearSection>,
}

#[derive(Debug, Serialize)]
struct DispatchReport {
    command: &'static str,
    status: &'static str,
    samples: usize,
    step_hours: f64,
    span_hours: f64,
    chosen_alpha: f64,
    rmse: Option<f64>,
    mae: Option<f64>,
    grid: Option<Vec<GridRow>>,
    load_variance: f64,
    net_variance: f64,
    load_peak: f64,
    net_peak: f64,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ForecastReport {
    command: &'static str,
    status: &'static str,
    horizon: usize,
    period: usize,
    metrics: Option<ForecastMetrics>,
}

#[derive(Debug, Serialize)]
struct ConvergenceReport {
    command: &'static str,
    status: &'static str,
    case: String,
    alpha: f64,
    rows: Vec<ConvergenceRow>,
    exact: bool,
    terminal_order: Option<f64>,
    noise: Option<NoiseStudy>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Dispatch(_) => "dispatch",
            Command::Forecast(_) => "forecast",
            Command::ConvergenceReport(_) => "convergence-report",
        }
    }

    fn report_path(&self) -> Option<&Path> {
        match self {
            Command::Solve(a) => a.report.as_deref(),
            Command::Dispatch(a) => a.report.as_deref(),
            Command::Forecast(a) => a.report.as_deref(),
            Command::ConvergenceReport(a) => a.report.as_deref(),
        }
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a, cli.quiet),
        Command::Dispatch(a) => dispatch(a, cli.quiet),
        Command::Forecast(a) => forecast(a),
        Command::ConvergenceReport(a) => convergence(a, cli.seed, cli.quiet),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(path) = cli.command.report_path() {
                let trace = match &e {
                    Error::Divergence(t) => Some((**t).clone()),
                    _ => None,
                };
                let report = ErrorReport {
                    command: cli.command.name(),
                    status: "error",
                    error: ErrorBody {
                        kind: e.kind(),
                        message: e.to_string(),
                        step: e.step(),
                        iteration: e.iteration(),
                        trace,
                    },
                };
                if let Err(w) = io::write_json(path, &report) {
                    eprintln!("error: cannot write report: {w}");
                }
            }
            e.exit_code()
        }
    }
}

fn read_kernel(path: &Path, fallback_horizon: f64) -> Result<PiecewiseKernel> {
    KernelSpec::from_json(&std::fs::read_to_string(path)?)?.build(Some(fallback_horizon))
}

fn solve(args: &SolveArgs, quiet: bool) -> Result<()> {
    let (times, values) = io::read_rhs(&args.rhs)?;
    let horizon = times[times.len() - 1];
    let kernel = read_kernel(&args.kernel, horizon)?;
    let intervals = args.n.unwrap_or(times.len() - 1);
    let mesh = Mesh::uniform(horizon, intervals)?;
    let file_rhs = RightHandSide::sampled(times, values)?;
    // samples off the mesh are interpolated linearly onto the nodes
    let (rhs, resampled_rhs) = match file_rhs.node_values(&mesh) {
        Ok(_) => (file_rhs, false),
        Err(_) => (
            RightHandSide::sample_on(&mesh, |t| file_rhs.value(t))?,
            true,
        ),
    };
    let mut solver = SolverOptions::with_alpha(args.alpha);

    let (solution, warnings, nonlinear_section, residual) = if args.nonlinear {
        solver.refinement = args
            .refinement
            .unwrap_or(NonlinearOptions::default().solver.refinement);
        let g = Nonlinearity::builtin(&args.g)?;
        let problem = NonlinearProblem::uniform(kernel.clone(), g, rhs.clone())?;
        let options = NonlinearOptions {
            tolerance: args.tol,
            max_iterations: args.max_iter,
            solver,
        };
        let (init, initial_guess_warning) =
            nonlinear::default_initial_guess(&problem, &mesh, &solver)?;
        let (solution, trace) = nonlinear::solve(&problem, &mesh, &init, &options)?;
        let (diagnostics, diagnostics_unavailable) = match nonlinear::theorem1_diagnostics(&trace) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let residual = mesh
            .nodes()
            .iter()
            .map(|&t| {
                nonlinear::residual_refined(&problem, &solution, t, solver.refinement).map(f64::abs)
            })
            .try_fold(0.0, |acc: f64, r| r.map(|r| acc.max(r)))?;
        let mut warnings = Vec::new();
        if trace.max_iterations_hit {
            warnings.push(format!(
                "no convergence within {} iterations",
                args.max_iter
            ));
        }
        let section = NonlinearSection {
            g: args.g.clone(),
            initial_guess_warning,
            trace,
            diagnostics,
            diagnostics_unavailable,
        };
        (solution, warnings, Some(section), residual)
    } else {
        solver.refinement = args.refinement.unwrap_or(1);
        let outcome = linear::solve_detailed(&kernel, &rhs, &mesh, &solver)?;
        let residual = linear::max_node_residual(&kernel, &rhs, &outcome.solution, &solver)?;
        (outcome.solution, outcome.warnings, None, residual)
    };

    if let Some(out) = &args.out {
        io::write_solution(out, mesh.nodes(), solution.coefficients())?;
    }
    let report = SolveReport {
        command: "solve",
        status: "ok",
        n: intervals,
        horizon,
        alpha: args.alpha,
        refinement: solver.refinement,
        resampled_rhs,
        x0: solution.coefficients()[0],
        max_node_residual: residual,
        warnings,
        nonlinear: nonlinear_section,
    };
    if let Some(path) = &args.report {
        io::write_json(path, &report)?;
    }
    if !quiet {
        print_solution_summary(&solution, residual);
    }
    Ok(())
}

fn print_solution_summary(solution: &PiecewiseLinearSolution, residual: f64) {
    let c = solution.coefficients();
    println!(
        "N={} x(0)={} x(T)={} max node residual={residual:.3e}",
        solution.mesh().intervals(),
        c[0],
        c[c.len() - 1]
    );
}

fn dispatch(args: &DispatchArgs, quiet: bool) -> Result<()> {
    let load = io::read_series(&args.load)?;
    let base = io::read_series(&args.base)?;
    let kernel = match &args.kernel {
        Some(path) => read_kernel(path, load.span())?,
        None => PiecewiseKernel::three_band_efficiency(load.span())?,
    };
    let alphas = parse_alpha_spec(&args.alpha)?;
    let case = DispatchCase::new(
        args.load.display().to_string(),
        load,
        base,
        kernel,
        SolverOptions::with_alpha(alphas[0]),
    )?;

    let benchmark = match &args.benchmark_load {
        Some(path) => {
            let actual = io::read_series(path)?;
            Some(compute_strategy(&case.with_load(actual, 0.0)?)?)
        }
        None => None,
    };
    let (chosen_alpha, grid) = match (&benchmark, alphas.len()) {
        (_, 1) => (alphas[0], None),
        (Some(bench), _) => {
            let search = alpha_grid_search(&case, bench, &alphas)?;
            (search.best_alpha, Some(search.table))
        }
        (None, _) => {
            return Err(Error::config(
                "an alpha grid needs --benchmark-load to score against",
            ))
        }
    };

    let case = case.with_load(case.load().clone(), chosen_alpha)?;
    let strategy = compute_strategy(&case)?;
    let net = leveled_load(&case, &strategy)?;
    let score: Option<StrategyScore> = benchmark
        .as_ref()
        .map(|b| score_strategy(&strategy, b))
        .transpose()?;

    if let Some(path) = &args.out_strategy {
        io::write_series(path, &strategy.power)?;
    }
    if let Some(path) = &args.out_net {
        io::write_series(path, &net)?;
    }
    let report = DispatchReport {
        command: "dispatch",
        status: "ok",
        samples: case.load().len(),
        step_hours: case.load().step().unwrap_or(0.0),
        span_hours: case.load().span(),
        chosen_alpha,
        rmse: score.map(|s| s.rmse),
        mae: score.map(|s| s.mae),
        grid,
        load_variance: case.load().variance(),
        net_variance: net.variance(),
        load_peak: case.load().peak(),
        net_peak: net.peak(),
        warnings: strategy.warnings.clone(),
    };
    if let Some(path) = &args.report {
        io::write_json(path, &report)?;
    }
    if !quiet {
        match score {
            Some(s) => println!("alpha={chosen_alpha} rmse={:.4} mae={:.4}", s.rmse, s.mae),
            None => println!("alpha={chosen_alpha}"),
        }
    }
    Ok(())
}

fn forecast(args: &ForecastArgs) -> Result<()> {
    let history = io::read_series(&args.history)?;
    let request = ForecastRequest::new(history, args.horizon, args.period)?;
    let fc = seasonal_naive(&request)?;
    if let Some(path) = &args.out {
        io::write_series(path, &fc)?;
    }
    let metrics = match &args.score_against {
        Some(path) => {
            let m = forecast_metrics(&fc, &io::read_series(path)?)?;
            println!("mae={} rmse={}", m.mae, m.rmse);
            Some(m)
        }
        None => None,
    };
    if let Some(path) = &args.report {
        let report = ForecastReport {
            command: "forecast",
            status: "ok",
            horizon: args.horizon,
            period: args.period,
            metrics,
        };
        io::write_json(path, &report)?;
    }
    Ok(())
}

fn convergence(args: &ConvergenceArgs, seed: u64, quiet: bool) -> Result<()> {
    let case = ManufacturedCase::by_name(&args.case)?;
    let study = case.convergence(&args.n_list, args.alpha)?;
    let noise = args
        .noise
        .map(|delta| case.noise(&args.n_list, delta, seed, args.alpha))
        .transpose()?;
    if !quiet {
        println!("{:>6}  {:>12}  {:>8}", "N", "max error", "order");
        for row in &study.rows {
            let order = row
                .observed_order
                .map_or("-".to_string(), |p| format!("{p:.3}"));
            println!("{:>6}  {:>12.4e}  {:>8}", row.n, row.max_node_error, order);
        }
        if let Some(n) = &noise {
            println!(
                "noise delta={} seed={}: smallest error at N={}",
                n.delta, n.seed, n.best_n
            );
        }
    }
    let report = ConvergenceReport {
        command: "convergence-report",
        status: "ok",
        case: args.case.clone(),
        alpha: args.alpha,
        terminal_order: study.terminal_order(),
        exact: study.exact,
        rows: study.rows,
        noise,
    };
    if let Some(path) = &args.report {
        io::write_json(path, &report)?;
    }
    Ok(())
}
