use thiserror::Error;

/// Errors raised by model evaluation, estimation and I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its admissible domain (non-positive variance,
    /// a stratified selection probability outside (0,1), ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input values (e.g. a non-binary outcome for a logistic model).
    #[error("input error: {0}")]
    Input(String),

    /// The normalizing integral of a biased-sampling density vanished.
    /// This is how case-only designs surface.
    #[error("degenerate conditioning: normalizing mass {mass:e} at x = {x:?}")]
    DegenerateConditioning { mass: f64, x: Vec<f64> },

    /// A non-finite value appeared during numerical evaluation.
    #[error("numeric error: {what} at {location}")]
    Numeric { what: String, location: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    /// Zero is not interior to the convex hull of the constraint rows.
    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },

    /// A constraint family was requested that does not match the design.
    #[error("wrong constraint variant: {0}")]
    WrongVariant(String),

    /// The stacked constraint matrix is rank deficient.
    #[error("rank deficient constraints (rank {rank} of {dim}): {advice}")]
    RankDeficient { rank: usize, dim: usize, advice: String },

    #[error("estimation error: {0}")]
    Estimation(String),

    /// Data ingestion problem with its location in the file.
    #[error("data error at row {row}, column '{column}': {message}")]
    Data { row: usize, column: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short snake-case tag for failure counts.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Input(_) => "input",
            Error::DegenerateConditioning { .. } => "degenerate_conditioning",
            Error::Numeric { .. } => "numeric",
            Error::Singular(_) => "singular",
            Error::Infeasible(_) => "infeasible",
            Error::NonConvergence { .. } => "non_convergence",
            Error::WrongVariant(_) => "wrong_variant",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::Estimation(_) => "estimation",
            Error::Data { .. } => "data",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
