//! Dense state-vector simulator for a bosonic quantum Fourier transform
//! protocol built from three stages:
//!
//! 1. an *all-resonant* multi-frequency drive that maps an arbitrary n-qubit
//!    register state onto Fock states of a readout resonator, one qubit at a
//!    time, through dressed-state transfer chains ([`drives`], [`transfer`]);
//! 2. free evolution of two resonators under a cross-Kerr coupling, which
//!    performs the q = 2^n dimensional Fourier transform as pure phase
//!    accumulation ([`kerr`]);
//! 3. a post-selected projection that localizes the transform result in the
//!    second resonator ([`kerr::project_uniform`], [`kerr::physical_disentangle`]).
//!
//! [`dynamics`] holds the Jaynes-Cummings dressed eigensystem and the
//! time-dependent interaction-picture propagator (counter-rotating terms are
//! kept; there is no rotating-wave truncation of the drive). [`error_model`]
//! carries the closed-form timing-jitter and energy-fluctuation fidelity
//! models plus a Monte-Carlo cross-check against the dynamical simulator, and
//! [`phase_est`] runs phase estimation through the inverse transform with a
//! single recycled ancilla.
//!
//! Units: ħ = 1, angular frequencies in rad/µs, times in µs. Lab-frame values
//! quoted in MHz convert as ω = 2π·f[MHz] rad/µs.

pub mod dynamics;
pub mod drives;
pub mod error;
pub mod error_model;
pub mod hilbert;
pub mod kerr;
pub mod numerics;
pub mod parallel;
pub mod phase_est;
pub mod transfer;

pub use error::{CoreError, Result};

/// 2π, used everywhere frequencies cross between cyclic and angular form.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Convert a lab-frame frequency in MHz to an angular frequency in rad/µs.
pub fn mhz(f: f64) -> f64 {
    TWO_PI * f
}

/// Convert a lab-frame frequency in kHz to an angular frequency in rad/µs.
pub fn khz(f: f64) -> f64 {
    TWO_PI * f * 1e-3
}
