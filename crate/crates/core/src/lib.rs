//! Tensor-train toolkit for compiling matrix product operators into
//! ancilla-assisted, post-selected quantum circuits.

pub mod circuit;
pub mod error;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod sim;
pub mod stiefel;
pub mod tomo;
pub mod tt;
pub mod zoo;

pub use error::{Error, Result};
