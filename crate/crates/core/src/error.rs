//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument (non-positive radius, unordered interval, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimensions outside the supported range for a given solver.
    #[error("dimension n = {n} outside supported range {min}..={max}: {context}")]
    DimensionRange {
        n: u32,
        min: u32,
        max: u32,
        context: &'static str,
    },

    /// Evaluation at a point where the profile is singular.
    #[error("singular evaluation at r = {r}: {reason}")]
    Singular { r: f64, reason: String },

    /// A boundary-value linear system without a unique solution.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// Unsupported domain kind (e.g. the whole space).
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    /// Time integration produced an invalid state.
    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
