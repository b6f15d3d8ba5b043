//! Successive-cancellation receiver simulation for classical-quantum polar
//! codes over BPSK coherent states.
//!
//! The pipeline runs from [`hilbert`] (truncated codeword states) through
//! [`polar`] and [`scdecoder`] (the SC POVM and its classical channel) to
//! [`rates`] (capacity and photon information efficiency). [`qsim`] simulates
//! the qubit circuit that realizes the POVM, with noise, and [`multiphoton`]
//! extends the measurement to two-photon states.

pub mod error;
pub mod golden;
pub mod hilbert;
mod linalg;
pub mod multiphoton;
pub mod polar;
pub mod qsim;
pub mod rates;
pub mod scdecoder;

pub use error::{Error, Result};
