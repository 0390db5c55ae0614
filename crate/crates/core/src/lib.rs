//! Cavity read-out of a two-mode bosonic Josephson junction.
//!
//! A driven, lossy cavity mode is dispersively coupled to the population of
//! one well of a two-mode Bose system. This crate builds the truncated
//! composite Hilbert space, integrates the Lindblad master equation (or its
//! quantum-jump unraveling), maps cavity quadratures back to atomic moments,
//! computes Wigner functions of the cavity and evaluates quantum Fisher
//! information bounds on the atomic parameters.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod dynamics;
pub mod estimation;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod phase_space;
pub mod probe_mapping;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
