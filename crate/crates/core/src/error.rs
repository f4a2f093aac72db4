use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("all kernel weights are zero at x = {x}; point is outside the estimable range")]
    AllZeroWeights { x: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("estimated cell probability is zero at x = {x}; interval undefined")]
    EmptyCell { x: f64 },

    #[error("table has an empty cell; {0}")]
    EmptyTableCell(String),

    #[error("odds ratio denominator n12*n21 is zero")]
    EmptyDenominator,

    #[error("table has a zero margin")]
    DegenerateMargin,

    #[error("logistic regression: {0}")]
    Separation(String),

    #[error("logistic regression did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("bootstrap needs at least {required} resamples for alpha = {alpha}, got {got}")]
    InsufficientResamples { required: usize, got: usize, alpha: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input file contains no observations")]
    EmptyFile,

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AllZeroWeights { .. } => "all_zero_weights",
            Error::DegenerateData(_) => "degenerate_data",
            Error::EmptyCell { .. } => "empty_cell",
            Error::EmptyTableCell(_) => "empty_table_cell",
            Error::EmptyDenominator => "empty_denominator",
            Error::DegenerateMargin => "degenerate_margin",
            Error::Separation(_) => "separation",
            Error::NoConvergence { .. } => "no_convergence",
            Error::InsufficientResamples { .. } => "insufficient_resamples",
            Error::InvalidInput(_) => "invalid_input",
            Error::Parse { .. } => "parse_error",
            Error::EmptyFile => "empty_file",
            Error::Io(_) => "io_error",
        }
    }

    /// True for input/configuration problems, false for numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InsufficientResamples { .. }
                | Error::Parse { .. }
                | Error::EmptyFile
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
