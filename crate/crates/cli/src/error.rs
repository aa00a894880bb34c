use std::fmt;

use hetflow::config::ConfigError;
use hetflow::io::IoError;
use hetflow::linear::LinearError;
use hetflow::model::ModelError;
use hetflow::optimize::OptimizeError;
use hetflow::ring::RingError;
use hetflow::sim::SimError;

/// Failure of a command, classified by process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or incomplete configuration (exit 2).
    Config(String),
    /// Numerical or output failure (exit 3).
    Compute(String),
    /// A simulation stopped on a collision (exit 4).
    Collision(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
            CliError::Collision(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Compute(m) => write!(f, "computation error: {m}"),
            CliError::Collision(m) => write!(f, "simulation aborted: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::GapCollision { .. } => CliError::Collision(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<LinearError> for CliError {
    fn from(e: LinearError) -> Self {
        match e {
            LinearError::Model(m) => m.into(),
            LinearError::EmptyChain
            | LinearError::InvalidPair { .. }
            | LinearError::InvalidBound { .. } => CliError::Config(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Collision { .. } => CliError::Collision(e.to_string()),
            SimError::Model(m) => m.into(),
            SimError::InvalidStep { .. }
            | SimError::DurationTooShort { .. }
            | SimError::InvalidTarget { .. }
            | SimError::InitialStateMismatch { .. } => CliError::Config(e.to_string()),
            SimError::NumericalFailure { .. } => CliError::Compute(e.to_string()),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::Sim(s) => s.into(),
            OptimizeError::Linear(l) => l.into(),
            OptimizeError::Model(m) => m.into(),
            OptimizeError::InvalidIndex { .. } | OptimizeError::InvalidProblem(_) => {
                CliError::Config(e.to_string())
            }
            OptimizeError::Infeasible(_) | OptimizeError::AllInfeasible => {
                CliError::Compute(e.to_string())
            }
        }
    }
}

impl From<RingError> for CliError {
    fn from(e: RingError) -> Self {
        match e {
            RingError::Linear(l) => l.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Compute(e.to_string())
    }
}
