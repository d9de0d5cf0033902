//! Error channel for the driver: every failure is either an input
//! problem (bad flags, config, or data files → exit 2) or a numeric
//! problem (estimation/recursion breakdown → exit 3).

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Configuration, flag, or data-file problem.
    Input(String),
    /// Numerical or convergence failure during computation.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qlsarma::Error> for CliError {
    fn from(e: qlsarma::Error) -> Self {
        use qlsarma::Error as E;
        match e {
            E::InvalidParameter(_) | E::Shape(_) | E::Domain(_) | E::Collinear(_) => {
                CliError::Input(e.to_string())
            }
            E::Numeric(_)
            | E::NonStationary(_)
            | E::SingularInformation(_)
            | E::NonConvergence(_)
            | E::Degenerate(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
