//! Observers as quantum subsystems.
//!
//! `qobserver` simulates small tensor-product systems in which the observers
//! themselves are quantum registers. Measurement is modeled as a unitary
//! pre-measurement that copies a basis index into an observer's record, plus
//! Born-rule sampling when an explicit collapse is wanted. On top of that the
//! crate provides:
//!
//! * [`scenarios`]: the spin/two-observer processes, including a catalytic
//!   measurement of one observer by another in a basis of superposed records;
//! * [`prediction`]: the certainty rule agents use to predict eigenvalues,
//!   with and without the condition that no catalytic measurement is made on
//!   the predicting agent;
//! * [`feasibility`]: the exchange operator on n-qubit agents, a discrete
//!   von Neumann needle, the oscillator parity operator and its Taylor
//!   truncations;
//! * [`dsl`]: the `.qwp` protocol language.

pub mod dsl;
pub mod error;
pub mod feasibility;
pub mod measurement;
pub mod prediction;
pub mod rng;
pub mod scenarios;
pub mod statevec;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use statevec::{Basis, BasisVector, Branch, CMatrix, StateVector, Subsystem, SystemLayout};
