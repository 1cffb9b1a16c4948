use barrier_repl_core::hedger::HedgeError;
use barrier_repl_core::pricer::PricerError;
use barrier_repl_core::simulator::SimError;
use barrier_repl_core::spanning::SpanError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code.
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<PricerError> for CliError {
    fn from(e: PricerError) -> Self {
        match e {
            PricerError::Claim(c) => CliError::Config(c.to_string()),
            PricerError::InvalidLaw(_) | PricerError::InvalidSmoothing | PricerError::Unsupported(_) => {
                CliError::Config(e.to_string())
            }
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<HedgeError> for CliError {
    fn from(e: HedgeError) -> Self {
        match e {
            HedgeError::Charfun(c) => CliError::Numerical(c.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<SpanError> for CliError {
    fn from(e: SpanError) -> Self {
        match e {
            SpanError::InvalidGrid(_) => CliError::Config(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
