use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] purimode_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("validation failed for criteria {0:?}")]
    ValidationFailed(Vec<usize>),
}

impl CliError {
    /// Short machine-readable kind for the error report.
    pub fn kind(&self) -> &'static str {
        use purimode_core::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::ValidationFailed(_) => "validation",
            CliError::Core(e) => match e {
                E::Domain(_) => "domain",
                E::Config(_) => "config",
                E::FitFailure { .. } => "fit_failure",
                E::DegeneratePole(_) => "degenerate_pole",
                E::Assembly(_) => "assembly",
                E::UnsupportedTerm(_) => "unsupported_term",
                E::Dimension { .. } => "dimension",
                E::Stiffness { .. } => "stiffness",
                E::ResourceLimit(_) => "resource_limit",
                E::NoConvergence(_) => "no_convergence",
                E::Io(_) => "io",
                E::Parse(_) => "parse",
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
