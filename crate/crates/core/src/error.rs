use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Extracted capacity reached the battery capacity pole.
    #[error("battery saturated: extracted capacity {it} Ah >= capacity {q} Ah")]
    Saturation { it: f64, q: f64 },

    /// Shoot-through duty at or beyond the 1/(1-2Δ) pole.
    #[error("boost singularity: shoot-through duty {0} >= 0.5")]
    Singularity(f64),

    #[error("slip angle undefined: |v_x| = {0} m/s is below the low-speed guard")]
    LowSpeed(f64),

    #[error("format error on line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical blowup at t = {t} s: {detail}")]
    NumericalBlowup { t: f64, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io { path: path.into(), source }
    }

    /// Process exit status for this error: 2 usage/config, 3 numerical
    /// (including a run that drains the battery), 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::NumericalBlowup { .. } | SimError::Saturation { .. } | SimError::Singularity(_) => 3,
            SimError::Io { .. } => 4,
            _ => 2,
        }
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(SimError::domain(format!("{name} must be finite, got {value}")))
    }
}
