//! Simulation and design engine for a broadband quantum memory built from a
//! common resonator coupled to a comb of mini-resonators, each loaded with an
//! inhomogeneously broadened atomic ensemble.
//!
//! * [`model`] holds device parameters, derived constants and input pulses.
//! * [`spectral`] evaluates the closed-form transfer and reflection functions.
//! * [`matching`] solves the impedance and spectral matching conditions.
//! * [`dynamics`] integrates the coupled mode equations in the time domain.
//! * [`sweep`] runs parameter scans and the bandwidth optimizer.
//! * [`checks`] bundles the module property suites into one runnable report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod dynamics;
pub mod error;
pub mod matching;
pub mod model;
pub mod spectral;
pub mod sweep;

pub use error::{Error, ErrorCategory, Result};
pub use model::{
    derive_params, make_pulse, AtomSampling, DerivedParams, Pulse, PulseShape, SystemParams,
};
pub use spectral::{CombVariant, FrequencyGrid, GridSpec, SpectralResponse, Susceptibility};
