//! Command-line front end for the `nvs-core` scattering pipeline.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;

use nvs_core::NvsError;
use serde_json::json;
use thiserror::Error;

pub use config::{Experiment, ExperimentConfig};
pub use experiment::run_experiment;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Numerical(#[from] NvsError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Numerical(NvsError::Io(_)) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    /// Short machine-readable tag for the failure.
    pub fn reason(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Numerical(e) => match e {
                NvsError::InvalidGrid(_) => "invalid-grid",
                NvsError::InvalidParameter(_) => "invalid-parameter",
                NvsError::ShapeMismatch { .. } => "shape-mismatch",
                NvsError::PositivityViolation { .. } => "positivity",
                NvsError::FarFieldViolation { .. } => "far-field",
                NvsError::BoundaryLeakage { .. } => "boundary-leakage",
                NvsError::ExcludedSpectralParameter { .. } => "excluded-k",
                NvsError::Resonance { .. } => "resonance",
                NvsError::NonConvergence { .. } => "non-convergence",
                NvsError::Divergence { .. } => "divergence",
                NvsError::ForwardFailures { .. } => "forward-failures",
                NvsError::ProvenanceMismatch(_) => "provenance",
                NvsError::SupportViolation(_) => "support",
                NvsError::MaskTooLarge { .. } => "mask",
                NvsError::Precondition(_) => "precondition",
                NvsError::SizeGuard(_) => "size-guard",
                NvsError::Format(_) => "format",
                NvsError::Io(_) => "io",
            },
        }
    }

    /// One-line JSON error record for stderr.
    pub fn to_json(&self) -> String {
        json!({
            "error": self.reason(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Installs the global rayon pool; 0 picks the number of cores.
pub fn init_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .or_else(|e| {
            // A pool already exists, which is fine when the size matches.
            if threads == 0 || rayon::current_num_threads() == threads {
                Ok(())
            } else {
                Err(CliError::Config(format!("cannot set thread count: {e}")))
            }
        })
}
