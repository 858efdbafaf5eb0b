//! Robust satisficing over conic evaluation functions.
//!
//! The crate turns a conic evaluation function, a polyhedral support, a
//! polyhedral penalty and a target into solver-ready conic programs, and
//! ships brute-force oracles to check the results.

// Links the system OpenBLAS used by the SDP backend.
use openblas_src as _;

pub mod casting;
pub mod conic;
pub mod engine;
pub mod error;
pub mod instances;
pub mod oracle;
pub mod penalty;
pub mod rng;

pub use error::{Error, Result};
