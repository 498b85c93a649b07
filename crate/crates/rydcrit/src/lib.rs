//! Simulation and analysis toolkit for measurement-altered quantum criticality
//! in Rydberg-blockaded chains.
//!
//! The crate covers the full workflow:
//!
//! * [`basis`] — enumeration of blockade-constrained occupation bases,
//! * [`hamiltonian`] — sparse and matrix-product-operator builds of the
//!   Rydberg chain Hamiltonian, with critical-point presets,
//! * [`solve`] — dense and Lanczos ground-state solvers,
//! * [`mps`] / [`dmrg`] — matrix-product states and a two-site DMRG,
//! * [`measure`] — site-measurement patterns (projective, weak, and
//!   generalized single-shot measurements) and outcome-sector bookkeeping,
//! * [`observables`] — lattice order parameters and the post-measurement
//!   operator dictionary, correlators, and entanglement entropy,
//! * [`scaling`] — scaling-dimension extraction (power-law, boundary-profile
//!   and derivative fits, curve crossings, angle sweeps, decay fits),
//! * [`shots`] — Born-rule bitstring sampling with restricted averaging,
//! * [`pipeline`] / [`checkpoint`] — batch driver, file formats, manifests.
//!
//! Everything is deterministic: random draws go through counter-based
//! seeded generators, and reruns with the same configuration reproduce
//! output files byte for byte.

pub mod basis;
pub mod checkpoint;
pub mod dmrg;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod measure;
pub mod mpo;
pub mod mps;
pub mod observables;
pub mod pipeline;
pub mod scaling;
pub mod shots;
pub mod solve;
pub mod wavefunction;

pub use error::{Error, Result};
