//! Symmetric-subspace quantum annealing simulator.
//!
//! Dense exact simulation of small spin systems annealed from a driver
//! Hamiltonian (transverse field or XY ring) into a problem Hamiltonian, with
//! per-site dephasing modelled by a GKSL master equation.

pub mod annealing;
pub mod error;
pub mod evolution;
pub mod hamiltonians;
pub mod io;
pub mod linalg;
pub mod parallel;
pub mod spectra;
pub mod spin_ops;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};
