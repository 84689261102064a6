//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimension must be 2 or 3, got {0}")]
    InvalidDim(usize),

    #[error("axis {axis}: node count {size} is below the minimum of 8")]
    SizeTooSmall { axis: usize, size: usize },

    #[error("axis {axis}: period {length} must be positive")]
    NonPositiveLength { axis: usize, length: f64 },

    #[error("axis {axis}: twist parity must be 0 or 1, got {parity}")]
    InvalidParity { axis: usize, parity: u8 },

    #[error("fields live on different grids ({0} vs {1})")]
    GridMismatch(String, String),

    #[error("component count mismatch: expected {expected}, got {got}")]
    ComponentMismatch { expected: usize, got: usize },

    #[error(
        "integrand has odd antipodal parity; its integral over the twisted torus \
         is not well defined (sign flips across an identified face)"
    )]
    OddIntegrand,

    #[error("node {node}: vector norm {norm:.3e} below 1e-8, cannot normalize")]
    DegenerateNode { node: usize, norm: f64 },

    #[error("field is not unit-norm: node {node} has |d| - 1 = {deviation:.3e}")]
    NotUnitNorm { node: usize, deviation: f64 },

    #[error(
        "winding {winding} is incompatible with the axis-0 twist parity {parity}: \
         crossing the identified face must multiply d by (-1)^{parity}, \
         which requires 2*winding = {parity} (mod 2)"
    )]
    IncompatibleWinding { winding: f64, parity: u8 },

    #[error(
        "ansatz violates the twist condition on axis {axis}: \
         max |d(x + L e_i) - (-1)^a_i d(x)| = {residual:.3e} (tolerance 1e-10)"
    )]
    TwistIncompatibleAnsatz { axis: usize, residual: f64 },

    #[error("spectral band {band} too large: must be < min(N_i)/4 = {limit}")]
    BandTooLarge { band: usize, limit: f64 },

    #[error("time step {dt:.6e} violates the stability bound {bound:.6e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("energy increased by {delta:.3e} at step {step}, beyond tolerance {tol:.3e}")]
    EnergyIncrease { step: usize, delta: f64, tol: f64 },

    #[error("trajectory window too short: the check needs at least 3 consecutive records")]
    WindowTooShort,

    #[error("trajectory was not recorded every step (record_every = {0})")]
    NotPerStepRecords(usize),

    #[error("snapshot format error at line {line}: {msg}")]
    SnapshotFormat { line: usize, msg: String },

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
