//! Simulation and analysis toolkit for cavity-assisted sideband cooling of a
//! single trapped dipole (e.g. a polar molecule) coupled to a driven optical
//! cavity mode.
//!
//! The model is a three-part composite system: a two-level internal (vibrational)
//! transition, a single cavity mode truncated to one photon, and a harmonic trap
//! mode truncated at a configurable number of levels. Dynamics are generated by
//! a Lindblad master equation with cavity decay `kappa` and internal relaxation
//! `gamma`; all frequencies are expressed in units of the trap frequency `nu`
//! unless stated otherwise.
//!
//! Crate layout:
//!
//! * [`hilbert`] — composite-space bookkeeping, elementary operators, density
//!   matrices, vectorization.
//! * [`model`] — physical parameter set, Hamiltonian / dissipator / Liouvillian
//!   assembly (full space and the reduced internal-plus-cavity space).
//! * [`dynamics`] — fixed-step RK4 propagation of the master equation and
//!   trap-truncation convergence scans.
//! * [`rates`] — cooling/heating rate extraction: perturbative resolvent rates,
//!   correlation-integral cross-check, trajectory fits, and the closed rate
//!   equation for the trap populations.
//! * [`molecules`] — laboratory-unit property table (Einstein A coefficients,
//!   Lamb-Dicke parameters, vacuum Rabi couplings) and conversion into
//!   trap-unit model parameters.
//! * [`sweep`] — detuning-plane and drive-strength parameter sweeps with CSV
//!   (and optional SVG) output.

// Validation guards are written as `!(x > 0.0)` so that NaN fails them too;
// `x <= 0.0` would silently accept NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod molecules;
pub mod rates;
pub mod sweep;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
