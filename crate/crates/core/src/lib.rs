//! Localized quantum Markov states on rooted Cayley trees.

pub mod dense;
pub mod error;
pub mod ising;
pub mod kernel;
pub mod par;
pub mod pauli;
pub mod state;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
