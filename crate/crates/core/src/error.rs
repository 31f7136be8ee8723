//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, propagation, and rate extraction.
#[derive(Debug, Error)]
pub enum Error {
    /// A Hilbert-space layout was requested that the model does not support.
    #[error("invalid Hilbert layout: {0}")]
    InvalidLayout(String),

    /// An operator or state does not match the dimension of the space it is
    /// used in.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A physical parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// A matrix failed the density-matrix contract (hermiticity, unit trace,
    /// or positivity within tolerance).
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    /// The requested integrator step exceeds the stability guard.
    #[error("time step {dt} exceeds stability guard {limit} (0.1 / fastest rate)")]
    StepSizeGuard { dt: f64, limit: f64 },

    /// Trace drift beyond tolerance during propagation; the step size is too
    /// coarse or the generator is corrupted.
    #[error("trace drift {drift:.3e} exceeded 1e-8 at t = {t}")]
    TraceDrift { t: f64, drift: f64 },

    /// A propagated state or derived quantity became non-finite.
    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    /// The reduced Liouvillian has a degenerate null space, so "the" steady
    /// state is not unique and rate extraction is ill-posed.
    #[error("degenerate steady state: null space dimension appears to be {null_dim}")]
    DegenerateSteadyState { null_dim: usize },

    /// The shifted Liouvillian `L0 -/+ i nu` is numerically singular, so the
    /// resolvent cannot be applied.
    #[error("singular resolvent at shift {shift:+e}")]
    SingularResolvent { shift: f64 },

    /// A trajectory fit could not be carried out or did not satisfy its
    /// identifiability guard.
    #[error("rate fit failed: {0}")]
    FitFailure(String),

    /// Too many cells of a parameter sweep failed for the grid to be usable.
    #[error("sweep failed: {failed} of {total} cells failed (> 20%)")]
    SweepFailure { failed: usize, total: usize },

    /// An extremum was requested over a sweep grid that contains no cooling
    /// cell.
    #[error("no cooling cell in sweep grid")]
    NoCoolingCell,

    /// A data table (molecule property file) could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Underlying I/O failure while reading a data file or writing output.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
