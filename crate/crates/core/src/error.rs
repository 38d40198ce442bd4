use thiserror::Error;

/// Errors raised by the model, analysis and numerical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sensitivity evaluated outside its domain (v = {v})")]
    SensitivityDomain { v: f64 },

    #[error("custom sensitivity derivative {order} inconsistent at v = {v}: analytic {analytic}, finite difference {numeric}")]
    InconsistentDerivative {
        order: u8,
        v: f64,
        analytic: f64,
        numeric: f64,
    },

    #[error("mode index must be a positive integer (got k = 0)")]
    ZeroMode,

    #[error("no finite bifurcation value: ū·Φ'(v̄) = {0} is not positive")]
    NonAttractiveSensitivity(f64),

    #[error("degenerate mode interaction: resonance of mode {k} with mode j = {j}")]
    Degenerate { k: usize, j: usize },

    #[error("operation requires {expected} sensitivity")]
    WrongSensitivity { expected: &'static str },

    #[error("positivity violated at cell {cell}: {field} = {value}")]
    Positivity {
        field: &'static str,
        cell: usize,
        value: f64,
    },

    #[error("non-finite value in {field} at cell {cell}")]
    NonFinite { field: &'static str, cell: usize },

    #[error("time step rejected after {retries} halvings (last dt = {dt})")]
    StepRetriesExhausted { retries: usize, dt: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular linear system (zero pivot in column {0})")]
    Singular(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    /// True for failures caused by leaving the model's domain (as opposed to
    /// purely numerical breakdown).
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            Error::SensitivityDomain { .. }
                | Error::Positivity { .. }
                | Error::NonAttractiveSensitivity(_)
                | Error::WrongSensitivity { .. }
                | Error::Degenerate { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
