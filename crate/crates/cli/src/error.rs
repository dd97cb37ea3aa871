use gdmp_core::GdmpError;
use serde::Serialize;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const DIVERGENCE: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{message}")]
    Input { message: String },
    #[error(transparent)]
    Core(#[from] GdmpError),
    /// Outputs were written but the simulation blew up.
    #[error("simulation diverged at step {step} (t = {t:.6} s)")]
    Diverged { step: usize, t: f64 },
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input { message: message.into() }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::input(format!("{}: {e}", path.display()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input { .. } => "input",
            CliError::Core(e) => e.kind(),
            CliError::Diverged { .. } => "divergence",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => exit::INPUT,
            CliError::Diverged { .. } => exit::DIVERGENCE,
            CliError::Core(e) => match e {
                GdmpError::InvalidParameter(_) | GdmpError::InsufficientData(_) | GdmpError::Parse(_) | GdmpError::Io(_) => {
                    exit::INPUT
                }
                GdmpError::Divergence { .. } => exit::DIVERGENCE,
                _ => exit::INFEASIBLE,
            },
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorDoc { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() })
            .expect("error serializes")
    }
}
