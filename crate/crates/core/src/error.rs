use thiserror::Error;

/// Errors raised by measure arithmetic, approximant construction and bound evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("lattice coordinate {value} exceeds the supported range ±2^40")]
    CoordinateOverflow { value: i128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a symmetric lattice distribution: {0}")]
    NotSymmetricDistribution(String),

    /// The exponent is too large for scaling and squaring (more than 60 halvings needed).
    #[error("exponent norm {norm} too large for scaling and squaring")]
    ExponentTooLarge { norm: f64 },

    /// Numerical refusal: the result lost too many digits to cancellation.
    #[error("catastrophic cancellation in {context}: ratio {ratio:e} below {threshold:e}")]
    Cancellation {
        context: String,
        ratio: f64,
        threshold: f64,
    },

    /// Resource refusal: the sparse product set would be too large to form.
    #[error("convolution needs {products:e} atom products, above the limit {limit:e}")]
    SupportTooLarge { products: f64, limit: f64 },

    #[error("binomial coefficient C({n}, {k}) overflows 128-bit arithmetic")]
    BinomialOverflow { n: u64, k: u64 },

    #[error("line decomposition failed: {0}")]
    NotLineDecomposable(String),

    #[error("unknown identifier: {0}")]
    UnknownId(String),

    /// Numerical refusal: the measured quantity is not resolved above its error interval.
    #[error("error interval dominates: {0}")]
    ErrorDominated(String),

    #[error("degenerate coefficient {coefficient} at n={n}")]
    DegenerateCoefficient { n: u64, coefficient: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for the refusal class: cancellation, error domination or a computation too large
    /// to attempt.
    pub fn is_numerical_refusal(&self) -> bool {
        matches!(
            self,
            Error::Cancellation { .. }
                | Error::ErrorDominated(_)
                | Error::ExponentTooLarge { .. }
                | Error::SupportTooLarge { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
