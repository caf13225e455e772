//! Quantum-dot photon correlation toolkit.
//!
//! Models the biexciton-exciton (XX-X) cascade two-photon polarization state,
//! second-order (auto/cross) correlation functions with instrument-response
//! convolution, and scalar photophysics (Arrhenius quenching, phonon
//! linewidth, Michelson visibility, confinement shift). A Monte Carlo photon
//! stream generator provides ground truth for the bounded nonlinear
//! least-squares fitters, and `io` handles timestamp/histogram CSV plus the
//! JSON fit report.

pub mod cascade;
pub mod constants;
mod error;
pub mod fit;
pub mod hbt;
pub mod io;
pub mod montecarlo;
pub mod photophysics;
pub mod quantum;

pub use error::{Error, Result};
