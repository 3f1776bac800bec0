use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty request: {0}")]
    EmptyRequest(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("conjugate point: distance {distance} reaches pi/sqrt(kappa) = {limit}")]
    ConjugatePoint { distance: f64, limit: f64 },

    #[error("degenerate operator: truncated determinant vanishes (smallest pivot {pivot:e}); use the deflated determinant")]
    DegenerateOperator { pivot: f64 },

    #[error("ill-separated kernel: eigenvalue {eigenvalue:e} lies within a factor 10 of kernel_tol {kernel_tol:e}")]
    IllSeparatedKernel { eigenvalue: f64, kernel_tol: f64 },

    #[error("degenerate segment {segment}: endpoints are conjugate")]
    DegenerateSegment { segment: usize },

    #[error("cut locus: segment {segment} of length {length} is beyond the injectivity radius {limit}")]
    CutLocus {
        segment: usize,
        length: f64,
        limit: f64,
    },

    #[error("integration error: {0}")]
    Integration(String),

    #[error("non-positive operator: det J changes sign or vanishes at s = {at}")]
    NonPositiveOperator { at: f64 },

    #[error("wrong route: {0}")]
    WrongRoute(String),

    #[error("degenerate route required: {0}")]
    DegenerateRoute(String),

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("insufficient degree: tail bound {tail:e} exceeds {allowed:e} at L = {degree}")]
    InsufficientDegree {
        degree: usize,
        tail: f64,
        allowed: f64,
    },

    #[error("precision loss: spectral sum cancels {digits:.1} decimal digits")]
    PrecisionLoss { digits: f64 },

    #[error("trace mismatch: spectral sum {spectral} vs curvature integral {curvature}")]
    TraceMismatch { spectral: f64, curvature: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable identifier written into reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyRequest(_) => "EmptyRequest",
            Error::Domain(_) => "Domain",
            Error::ConjugatePoint { .. } => "ConjugatePoint",
            Error::DegenerateOperator { .. } => "DegenerateOperator",
            Error::IllSeparatedKernel { .. } => "IllSeparatedKernel",
            Error::DegenerateSegment { .. } => "DegenerateSegment",
            Error::CutLocus { .. } => "CutLocus",
            Error::Integration(_) => "Integration",
            Error::NonPositiveOperator { .. } => "NonPositiveOperator",
            Error::WrongRoute(_) => "WrongRoute",
            Error::DegenerateRoute(_) => "DegenerateRoute",
            Error::OutOfScope(_) => "OutOfScope",
            Error::InsufficientDegree { .. } => "InsufficientDegree",
            Error::PrecisionLoss { .. } => "PrecisionLoss",
            Error::TraceMismatch { .. } => "TraceMismatch",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {value}")))
    }
}
