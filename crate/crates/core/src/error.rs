use thiserror::Error;

/// Errors raised by the geometry and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?} (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { point: Vec<f64>, min_eig: f64 },
    #[error("point length {got} does not match dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ambiguous rank at {point:?}: singular value {value:e} inside the ambiguity band")]
    RankDeficiencyAmbiguous { point: Vec<f64>, value: f64 },
    #[error("rank is not constant near {point:?}")]
    RankNotConstant { point: Vec<f64> },
    #[error("map has rank zero at {point:?}")]
    ZeroRank { point: Vec<f64> },
    #[error("vector is not horizontal (kernel component {0:e})")]
    NotHorizontal(f64),
    #[error("vector field is not normal to the range (range component {0:e})")]
    VNotNormal(f64),
    #[error("trajectory left the chart domain at t = {t}")]
    DomainExit { t: f64 },
    #[error("trajectory blew up at t = {t}")]
    BlowUp { t: f64 },
    #[error("splitting unavailable: {0}")]
    SplitUnavailable(String),
    #[error("normal field extension required")]
    RequiresNormalFieldExtension,
    #[error("no leaf parametrization supplied")]
    LeafUnavailable,
    #[error("complex structure is not parallel (residual {0:e})")]
    RequiresKaehler(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
