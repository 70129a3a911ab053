//! Chaos sensing with a dephasing two-level probe.
//!
//! A qubit probe is coupled through `g σ₀ᶻ σ₁ᶻ` to the first site of a spin
//! chain. The chain's integrable-to-chaotic crossover shows up in the
//! long-time decoherence factor of the probe, in the correction to the
//! probe's geometric phase, and in non-Markovianity measures built on the
//! trace distance. This crate holds the numerical core:
//!
//! - [`operators`]: Pauli embeddings and the four environment Hamiltonians.
//! - [`spectral`]: dense Hermitian diagonalization, parity / magnetization
//!   sectors and the level-spacing ratio indicator.
//! - [`dephasing`]: sampled, averaged and effective decoherence factors and
//!   the Haar-averaged Loschmidt echo.
//! - [`geomphase`]: probe trajectories and the kinematic geometric phase.
//! - [`nonmarkov`]: trace distance, BLP and largest-revival measures.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dephasing;
pub mod error;
pub mod geomphase;
pub mod linalg;
pub mod nonmarkov;
pub mod operators;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
