use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular (det = {det:e})")]
    Singular { det: f64 },

    #[error("matrix has an eigenvalue with nonpositive real part ({re:e}); principal logarithm undefined")]
    NonPositiveSpectrum { re: f64 },

    #[error("logarithm series diverges: spectral radius of (M - I) is {radius}")]
    SeriesDiverges { radius: f64 },

    #[error("matrix exponential overflowed")]
    Overflow,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model is not ergodic (kappa = {kappa})")]
    NonErgodic { kappa: f64 },

    #[error("Riccati step too large: component reached {value:e} at t = {t}")]
    StepTooLarge { t: f64, value: f64 },

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("exact sampler requires b12 = b21 = 0 (got b12 = {b12}, b21 = {b21})")]
    NotDiagonal { b12: f64, b21: f64 },

    #[error("singular regression design: {0}")]
    SingularDesign(String),

    #[error("gamma estimate not admissible: eigenvalues {0}")]
    NonAdmissibleGamma(String),

    #[error("diffusion normal equations ill-conditioned (det = {det:e})")]
    IllConditioned { det: f64 },

    #[error("sandwich matrix V is singular (smallest singular value {smallest_sv:e})")]
    SingularV { smallest_sv: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    ConfigParse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
