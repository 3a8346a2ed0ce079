use std::path::PathBuf;

/// Errors produced by the simulator and its tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sampling rejected {attempts} consecutive draws: {reason}")]
    RejectionLimit { attempts: usize, reason: String },

    #[error("simulation diverged: {0}")]
    Divergence(String),

    #[error("end of life not reached within {max_cycles} cycles")]
    CycleBudgetExceeded { max_cycles: u32 },

    #[error(
        "no sign change in bracket [{lo}, {hi}]: residual({lo}) = {f_lo}, residual({hi}) = {f_hi}"
    )]
    NoRoot { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
