use muxctl_core::circuit::CircuitError;
use muxctl_core::compiler::CompileError;
use muxctl_core::cz::CzError;
use muxctl_core::leakage::LeakageError;
use muxctl_core::mux::MuxError;
use muxctl_core::pulse::PulseError;
use muxctl_core::resources::ResourceError;

/// Failure with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("compilation error: {0}")]
    Compile(String),
    #[error("simulation error: {0}")]
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Compile(_) => 3,
            CliError::Simulation(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<CompileError> for CliError {
    fn from(e: CompileError) -> Self {
        CliError::Compile(e.to_string())
    }
}

impl From<PulseError> for CliError {
    fn from(e: PulseError) -> Self {
        match e {
            PulseError::MissingAssignment(_) | PulseError::OffGrid { .. } | PulseError::InvalidInput(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Compile(e.to_string()),
        }
    }
}

impl From<MuxError> for CliError {
    fn from(e: MuxError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<LeakageError> for CliError {
    fn from(e: LeakageError) -> Self {
        match e {
            LeakageError::InvalidInput(_) => CliError::Validation(e.to_string()),
            _ => CliError::Simulation(e.to_string()),
        }
    }
}

impl From<CzError> for CliError {
    fn from(e: CzError) -> Self {
        CliError::Simulation(e.to_string())
    }
}

impl From<ResourceError> for CliError {
    fn from(e: ResourceError) -> Self {
        CliError::Validation(e.to_string())
    }
}
