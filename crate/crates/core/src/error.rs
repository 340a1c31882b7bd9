use thiserror::Error;

use crate::nonlinear::IterationTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Format { row: Option<usize>, message: String },

    /// The x(0) denominator built from K_i(0,0) and the boundary slopes vanished.
    #[error("singular problem: x(0) denominator {denominator:e} is below tolerance")]
    SingularProblem { denominator: f64 },

    #[error("singular step at k={step}: divisor {divisor:e} is below tolerance")]
    SingularStep { step: usize, divisor: f64 },

    #[error("numerical instability at k={step}: non-finite coefficient")]
    Instability { step: usize },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("nonlinear iteration diverged after {} iterations", .0.iterations())]
    Divergence(Box<IterationTrace>),

    #[error("nonlinear iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),

    #[error("search error: {0}")]
    Search(String),

    #[error("dispatch case '{case}': {source}")]
    Case {
        case: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable kind, used in JSON reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "configuration",
            Error::Domain(_) => "domain",
            Error::Format { .. } => "format",
            Error::SingularProblem { .. } => "singular-problem",
            Error::SingularStep { .. } => "singular-step",
            Error::Instability { .. } => "instability",
            Error::Evaluation(_) => "evaluation",
            Error::Divergence(_) => "divergence",
            Error::Iteration { source, .. } | Error::Case { source, .. } => source.kind(),
            Error::DiagnosticUnavailable(_) => "diagnostic-unavailable",
            Error::Search(_) => "search",
            Error::Io(_) => "io",
        }
    }

    /// Step index for step-local numerical failures.
    pub fn step(&self) -> Option<usize> {
        match self {
            Error::SingularStep { step, .. } | Error::Instability { step } => Some(*step),
            Error::Iteration { source, .. } | Error::Case { source, .. } => source.step(),
            _ => None,
        }
    }

    pub fn iteration(&self) -> Option<usize> {
        match self {
            Error::Iteration { iteration, .. } => Some(*iteration),
            Error::Case { source, .. } => source.iteration(),
            _ => None,
        }
    }

    /// CLI exit code: 2 for configuration/format problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Format { .. } | Error::Io(_) => 2,
            Error::Iteration { source, .. } | Error::Case { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            row,
            message: msg.into(),
        }
    }
}
