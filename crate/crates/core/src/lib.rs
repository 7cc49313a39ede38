//! Simulation library for IRS-assisted mmWave multigroup multicast MIMO.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`channel`] draws geometric BS→IRS and IRS→user channels.
//! 2. [`bd`] builds block-diagonalization beamformers from the effective
//!    channels seen through the IRS phase vector.
//! 3. [`phaseopt`] optimizes that phase vector on the unit-modulus manifold
//!    using a closed-form surrogate of the BD singular values.
//! 4. [`hybridfactor`] splits the digital beamformers into constant-modulus
//!    RF matrices and baseband matrices.
//! 5. [`signalmodel`] evaluates SINR and multicast sum rate directly from the
//!    beamformers, independently of how they were built.
//!
//! [`harness`] wires everything into the baselines, Monte Carlo sweeps and
//! CSV reports exposed by the `simulate` binary.

pub mod bd;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod hybridfactor;
pub mod matrixkit;
pub mod phaseopt;
pub mod signalmodel;

pub use config::SystemConfig;
pub use error::{Error, Result};
pub use matrixkit::{CMat, CVec};
