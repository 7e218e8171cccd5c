//! Simulation of quantum-dot exciton preparation by dichromatic pulse pairs,
//! with phonon coupling, and of the resulting cavity single-photon source.

pub mod bath;
pub mod drive;
pub mod dynamics;
pub mod error;
pub mod qcore;
pub mod quad;
pub mod sps;

pub use error::{Error, Result};
