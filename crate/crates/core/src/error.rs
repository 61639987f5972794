use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum NvsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("conductivity floor violated: min gamma {min} < delta0 {floor}")]
    PositivityViolation { min: f64, floor: f64 },

    #[error("far-field normalization violated: max |gamma - 1| on the outer annulus is {deviation:e}")]
    FarFieldViolation { deviation: f64 },

    #[error("field does not decay at the grid boundary (leakage ratio {ratio:e})")]
    BoundaryLeakage { ratio: f64 },

    #[error("spectral parameter k = {re}{im:+}i is excluded ({reason})")]
    ExcludedSpectralParameter { re: f64, im: f64, reason: String },

    #[error("resonant Green's function symbol at k = {re}{im:+}i (|symbol| = {symbol:e})")]
    Resonance { re: f64, im: f64, symbol: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("Neumann series diverges: term ratio {ratio} at order {order}")]
    Divergence { order: usize, ratio: f64 },

    #[error("forward transform failed at {} k-node(s): {}", failures.len(), summarize(failures))]
    ForwardFailures { failures: Vec<(usize, String)> },

    #[error("provenance mismatch: {0}")]
    ProvenanceMismatch(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("division mask covers {fraction:.4} of the nodes (limit 0.01)")]
    MaskTooLarge { fraction: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("oracle size guard: {0}")]
    SizeGuard(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn summarize(failures: &[(usize, String)]) -> String {
    failures
        .iter()
        .take(3)
        .map(|(i, m)| format!("node {i}: {m}"))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, NvsError>;
