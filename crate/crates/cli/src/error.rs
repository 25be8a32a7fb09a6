use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Numerical(#[from] roughroad::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("manifest mismatch: {0}")]
    Manifest(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } | CliError::Manifest(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Numerical(e) => numerical_kind(e),
            CliError::Io { .. } => "io",
            CliError::Manifest(_) => "manifest",
        }
    }

    /// One line for stderr: `error: kind=<kind> message=<json string>`.
    pub fn machine_line(&self) -> String {
        let message = serde_json::to_string(&self.to_string()).unwrap_or_default();
        format!("error: kind={} message={message}", self.kind())
    }
}

fn numerical_kind(e: &roughroad::Error) -> &'static str {
    use roughroad::Error as E;
    match e {
        E::Domain { .. } => "domain",
        E::InvalidVelocity { .. } => "invalid_velocity",
        E::InvalidKernel(_) => "invalid_kernel",
        E::GridMismatch { .. } => "grid_mismatch",
        E::NotBracketed { .. } => "not_bracketed",
        E::NoConvergence { .. } => "no_convergence",
        E::FluxOutOfRange { .. } => "flux_out_of_range",
        E::ConstraintViolation { .. } => "constraint_violation",
        E::Ambiguous { .. } => "ambiguous",
        E::HomogeneousRoad => "homogeneous_road",
        E::WindowOutOfRange { .. } => "window_out_of_range",
        E::Blowup { .. } => "blowup",
        E::SeedCollapse => "seed_collapse",
        E::NonMonotone { .. } => "non_monotone",
        E::InadmissibleTrace { .. } => "inadmissible_trace",
        E::NoProfile { .. } => "no_profile",
        E::UnsupportedCase { .. } => "unsupported_case",
        E::DegenerateKink { .. } => "degenerate_kink",
        E::Cfl { .. } => "cfl",
        E::StateOutOfBounds { .. } => "state_out_of_bounds",
        E::InvalidInput(_) => "invalid_input",
    }
}
