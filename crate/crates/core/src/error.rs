use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the failure class the
/// command line maps onto exit codes (input, instability, divergence).
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("{what} did not converge after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("rank deficiency: {0}")]
    RankDeficient(String),
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("inadmissible state: {0}")]
    Positivity(String),
    #[error("solver instability at step {step}: {detail}")]
    Instability { step: usize, detail: String },
    #[error("integration failed at t = {t}: {detail}")]
    Integration { t: f64, detail: String },
    #[error("step budget of {0} steps exhausted")]
    StepBudget(usize),
    #[error("t = {t} outside trajectory span [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("tape was recorded against parameter version {tape}, parameters are at {params}")]
    StaleTape { tape: u64, params: u64 },
    #[error("gradient for block `{0}` is not finite")]
    GradientExplosion(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("format error at byte {offset}: {detail}")]
    Format { offset: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of a numerical march (FOM or integrator).
    pub fn is_instability(&self) -> bool {
        matches!(
            self,
            Error::Instability { .. } | Error::Positivity(_) | Error::Integration { .. } | Error::StepBudget(_)
        )
    }
}
