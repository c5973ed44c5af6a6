//! Simulation of chiral state transfer in a Floquet-driven loop of three
//! magnon modes coupled through a dispersive cavity.
//!
//! Units: the magnon-magnon hopping `g` is 1 unless a builder says otherwise.
//! Mode indices in the Rust API are zero-based; configs and CSV headers use
//! the physics labels 1, 2, 3.

pub mod error;
pub mod floquet;
pub mod fock;
mod linalg;
pub mod model;
pub mod observables;
pub mod propagate;
pub mod scenario;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64;
