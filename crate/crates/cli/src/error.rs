use pqv_core::encoder::EncodeError;
use pqv_core::eval::EvalError;
use pqv_core::generate::GenerateError;
use pqv_core::grid::GridError;
use pqv_core::nn::NnError;
use pqv_core::stability::StabilityError;
use pqv_core::train::TrainError;

/// Every failure carries the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Other(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("validation failure: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

/// Oracle and network disagree on an assessed point.
pub const DISAGREEMENT: u8 = 5;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::NonConvergence { .. } => CliError::Convergence(e.to_string()),
            GridError::Parse(_) | GridError::Validation(_) => CliError::Config(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<StabilityError> for CliError {
    fn from(e: StabilityError) -> Self {
        CliError::Convergence(e.to_string())
    }
}

impl From<EncodeError> for CliError {
    fn from(e: EncodeError) -> Self {
        match e {
            EncodeError::Io(_) => CliError::Other(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Io(_) => CliError::Other(e.to_string()),
            NnError::Config(_) => CliError::Config(e.to_string()),
            NnError::Shape(_) | NnError::Format(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Config(e.to_string()),
            TrainError::EmptySplit(_) => CliError::Validation(e.to_string()),
            TrainError::Diverged { .. } => CliError::Convergence(e.to_string()),
            TrainError::Nn(e) => e.into(),
        }
    }
}

impl From<GenerateError> for CliError {
    fn from(e: GenerateError) -> Self {
        match e {
            GenerateError::TooFew { .. } => CliError::Convergence(e.to_string()),
            GenerateError::Config(_) => CliError::Config(e.to_string()),
            GenerateError::Encode(e) => e.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Invalid(_) => CliError::Validation(e.to_string()),
            EvalError::Io(_) => CliError::Other(e.to_string()),
            EvalError::Nn(e) => e.into(),
            EvalError::Train(e) => e.into(),
            EvalError::Encode(e) => e.into(),
            EvalError::Stability(e) => e.into(),
        }
    }
}
