//! Exact-diagonalization toolkit for thermalization in translation-invariant
//! quantum lattice systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: integer boxes, torus translations, boundaries and the
//!   site-to-tensor-factor convention shared by everything else.
//! - [`linalg`]: dense Hermitian operators, eigendecomposition, partial
//!   traces, norms and entropies.
//! - [`hamiltonian`]: finite-range interactions assembled with open,
//!   periodic or custom boundary conditions, plus the random 2-local ensemble.
//! - [`ensembles`]: Gibbs and microcanonical states, inverse-temperature
//!   solving, dephasing and the block-averaged pseudonorms.
//! - [`sampling`]: Haar and brickwork-circuit random states in a subspace.
//! - [`dynamics`]: gap statistics, effective dimension, equilibration bounds
//!   and time evolution.
//! - [`ising`]: exact type-class combinatorics for non-interacting models.
//! - [`eth`]: shell geometry, the Gaussian-smoothed reduced eigenstate and
//!   Lieb-Robinson constant estimation.
//! - [`experiments`]: config-driven sweeps with CSV/JSON output.

pub mod dynamics;
pub mod ensembles;
pub mod error;
pub mod eth;
pub mod experiments;
pub mod hamiltonian;
pub mod ising;
pub mod lattice;
pub mod linalg;
pub mod sampling;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
