use std::fmt;
use std::path::PathBuf;

use floquet_spectra::FloquetError;
use serde_json::json;

pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INSTABILITY: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_OTHER: i32 = 6;

#[derive(Debug)]
pub enum CliError {
    Config { field: String, message: String },
    Core(FloquetError),
    Io { path: PathBuf, message: String },
    VerificationFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config { field: field.to_string(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, err: impl fmt::Display) -> Self {
        CliError::Io { path: path.into(), message: err.to_string() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Core(e) => match self.exit_code() {
                EXIT_CONFIG => "config",
                EXIT_INSTABILITY => "instability",
                EXIT_INTEGRATION => "integration",
                _ => match e {
                    FloquetError::NonDiagonalizable { .. } => "non_diagonalizable",
                    _ => "numerical",
                },
            },
            CliError::Io { .. } => "io",
            CliError::VerificationFailed { .. } => "verification",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::VerificationFailed { .. } => EXIT_VERIFY_FAILED,
            CliError::Core(e) => match e {
                FloquetError::InvalidSystem(_) | FloquetError::InvalidArgument(_) | FloquetError::BeyondRwaThreshold { .. } => EXIT_CONFIG,
                FloquetError::Unstable { .. } | FloquetError::UnstableParameters { .. } | FloquetError::ResonantDenominator { .. } => {
                    EXIT_INSTABILITY
                }
                FloquetError::Integration { .. } | FloquetError::QuadratureNonConvergence { .. } | FloquetError::NotSettled(_) => {
                    EXIT_INTEGRATION
                }
                _ => EXIT_OTHER,
            },
        }
    }

    /// Single-line JSON report written to stderr.
    pub fn report(&self) -> String {
        let mut error = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Config { field, .. } => error["field"] = json!(field),
            CliError::Io { path, .. } => error["path"] = json!(path.display().to_string()),
            _ => {}
        }
        json!({ "error": error, "exit_code": self.exit_code() }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, message } => write!(f, "invalid `{field}`: {message}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::VerificationFailed { failed, total } => write!(f, "{failed} of {total} verification checks failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<FloquetError> for CliError {
    fn from(e: FloquetError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
