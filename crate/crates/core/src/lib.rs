//! Zero-field spin resonance toolkit for the negatively charged boron vacancy
//! in hexagonal boron nitride.
//!
//! * [`spin`]: S = 1 operators, the zero-field Hamiltonian and a Jacobi eigensolver
//! * [`coupling`]: strain, stress and electric-field couplings
//! * [`charges`]: random point-charge environments on the hBN lattice
//! * [`odmr`]: level-scatter statistics, spectrum synthesis and fitting
//! * [`cli`]: the `vbsim` command-line front end

pub mod charges;
pub mod cli;
pub mod config;
pub mod coupling;
pub mod error;
pub mod io;
pub mod odmr;
pub mod rng;
pub mod spin;

pub use error::{Error, Result};
