//! Solvers for the logarithmic Schrödinger equation
//! `-Δu + h(x)u = u log u²` on weighted, measured graphs.

pub mod cli;
pub mod error;
pub mod exec;
pub mod exhaustion;
pub mod functionals;
pub mod graph;
pub mod solvers;
pub mod spaces;

pub use error::{Error, Result};
