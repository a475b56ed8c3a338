//! Noise-resilient quantum aggregation for federated learning.
//!
//! The crate is layered bottom-up:
//!
//! * [`qcore`] is a small dense density-matrix simulator (up to six qubits)
//!   with Kraus-form noise channels, shot sampling and state metrics.
//! * [`encode`] maps real model parameters onto single-qubit angle-encoded
//!   states and back.
//! * [`qagg`] builds and runs the aggregation circuit, mitigates noise and
//!   evaluates the linearity, variance and commutation properties.
//! * [`qselect`] draws client-selection vectors from simulated quantum
//!   entropy.
//! * [`flsim`] drives federated rounds with classical FedAvg, unmitigated
//!   quantum aggregation and noise-resilient quantum aggregation.

pub mod encode;
mod error;
pub mod flsim;
pub mod qagg;
pub mod qcore;
pub mod qselect;
pub mod seed;

pub use error::{Error, Result};
