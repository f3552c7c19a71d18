//! Dense linear algebra used by POD, DMD and the stiffness diagnostics.
//!
//! Everything here is a pure function of its inputs; identical input bits
//! give identical outputs.

mod eig;
mod general;
mod matrix;
mod svd;

pub use eig::{sym_eig, SymEigResult};
pub use general::{eig, eig_magnitudes, eigvals, ComplexLu};
pub use matrix::{dot, norm2, DenseMatrix};
pub use svd::{svd, Svd};
