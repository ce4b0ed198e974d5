//! Computation engine for the hbar-deformed topological recursion on rational
//! spectral data.
//!
//! The pipeline: solve the Bethe system for the roots of a potential, build
//! the deformed kernels (A, B, G, K), run the residue recursion for the
//! correlators `W_n^(g)` as exact pole-basis tensors, assemble the free
//! energies `F^(g)`, and check the structural identities the construction is
//! supposed to satisfy.
//!
//! Everything is generic over the scalar backend: exact rationals, machine
//! complex doubles, or complex big floats.

pub mod error;
pub mod scalar;

pub mod laurent;
pub mod poly;

pub mod linalg;
pub mod polebasis;
pub mod potential;
pub mod ratfun;

pub mod bethe;
pub mod kernel;

pub mod correlators;
pub mod energies;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{rat, Scalar};

/// Exact rational backend.
pub type Rational = scalar::Rat;
/// Machine complex-double backend.
pub type Complex = scalar::C64;
/// Complex big-float backend (precision via [`scalar::set_big_precision`]).
pub type BigComplex = scalar::CBig;
