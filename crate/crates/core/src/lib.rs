//! Topological invariants of continuous Dirac models.
//!
//! The crate evaluates bulk indices (Chern numbers, winding numbers and the
//! degree of the symbol map), interface indices from the one-dimensional
//! edge problem, spectral flow on a flux-threaded ribbon, a
//! Helffer–Sjöstrand functional calculus for Hermitian matrices, and the
//! geometric integral identities behind the index formulas.
//!
//! All index outputs use the convention in which a single two-dimensional
//! block with `m > 0`, `η > 0` and `A = I` has index `+1`.

pub mod banded;
pub mod calculus;
pub mod cli;
pub mod clifford;
pub mod eigs;
pub mod error;
pub mod identities;
pub mod interface1d;
pub mod invariants;
pub mod linalg;
pub mod quadrature;
pub mod ribbon;
pub mod symbol;

pub use error::{Error, Result};
