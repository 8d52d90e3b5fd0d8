use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("window {window} too small, need at least {needed}")]
    WindowTooSmall { window: i64, needed: i64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("brute-force bound exceeded: {0}")]
    BruteForceBoundExceeded(String),
    #[error("exact-sum bound exceeded: {0}")]
    BoundExceeded(String),
    #[error("truncation overflow: {0}")]
    TruncationOverflow(String),
    #[error("cap exceeded: mass outside cap ~ {mass_outside:e}")]
    CapExceeded { mass_outside: f64 },
    #[error("convergence too slow: tail bound {tail:e} exceeds tolerance {tol:e}")]
    ConvergenceTooSlow { tail: f64, tol: f64 },
    #[error("missing series: {0}")]
    MissingSeries(String),
}

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Bound/convergence failures map to a distinct process exit code.
    pub fn is_bound_failure(&self) -> bool {
        matches!(
            self,
            Error::BruteForceBoundExceeded(_)
                | Error::BoundExceeded(_)
                | Error::TruncationOverflow(_)
                | Error::CapExceeded { .. }
                | Error::ConvergenceTooSlow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
