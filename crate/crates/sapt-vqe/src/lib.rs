//! SAPT interaction energies through second order from VQE or CAS-CI monomer
//! wavefunctions, with extended-RPA response.

pub mod error;
pub mod fermion;
pub mod linalg;
pub mod rdm;
pub mod statevector;
pub mod bundle;
pub mod casci;
pub mod erpa;
pub mod synthetic;
pub mod sapt;
pub mod pipeline;
pub mod vqe;

pub use error::{Error, Result};
