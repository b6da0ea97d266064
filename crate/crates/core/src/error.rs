use thiserror::Error;

/// Errors raised anywhere in the counting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("margin vectors must be non-empty")]
    EmptyMargins,

    #[error("row total {rows} differs from column total {cols}")]
    SumMismatch { rows: u64, cols: u64 },

    #[error("{side} entry {index} is {value}; every margin must be at least 1")]
    NonPositive {
        side: &'static str,
        index: usize,
        value: i64,
    },

    #[error("scaling factor must be positive and finite, got {0}")]
    InvalidAlpha(f64),

    #[error("scaled total {total} cannot keep {rows} rows and {cols} columns positive")]
    Infeasible { total: u64, rows: usize, cols: usize },

    #[error("matrix entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("typical matrix solver did not converge after {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("quadratic form is not positive definite on the chosen hyperplane")]
    NotPositiveDefinite,

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("estimated {estimate:.3e} dynamic-programming states exceeds budget {budget}")]
    BudgetExceeded { estimate: f64, budget: u64 },

    #[error("integration dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("quadrature grid {grid} is below the minimum {min} points per axis")]
    GridTooCoarse { grid: usize, min: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyMargins
            | Error::SumMismatch { .. }
            | Error::NonPositive { .. }
            | Error::Infeasible { .. } => "invalid_margins",
            Error::InvalidAlpha(_) => "invalid_alpha",
            Error::NegativeEntry { .. } => "negative_entry",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::IndexOutOfRange(_) => "index_out_of_range",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::DimensionTooLarge { .. } => "dimension_too_large",
            Error::GridTooCoarse { .. } => "grid_too_coarse",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// Whether the input was valid but the computation could not finish.
    pub fn is_computational(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NotPositiveDefinite
                | Error::BudgetExceeded { .. }
                | Error::DimensionTooLarge { .. }
        )
    }
}
