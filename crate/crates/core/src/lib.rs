//! Hamiltonian recovery from degenerate steady states.
//!
//! The crate reconstructs the coefficient vector of a generic 2-local (`H2`)
//! or 3-local (`H3`) open spin chain from a mixture of its eigenstates in
//! which several eigenstates share a mixing weight. Degenerate eigenstates
//! cannot be told apart, so the recovery works with the invariant subspaces
//! (weight blocks) of the state and the orthogonal complement of their sum:
//! every basis term's matrix elements between different blocks, and between
//! a block and the complement, must combine to zero. Those homogeneous
//! equations are stacked into a real matrix whose one-dimensional nullspace
//! is the coefficient vector up to scale.
//!
//! Modules, bottom-up:
//! - [`pauli`]: matrix-free Pauli strings on state vectors.
//! - [`models`]: term bases, random instances, Hamiltonian assembly.
//! - [`spectral`]: eigendecomposition, steady states, weight blocks.
//! - [`krylov`]: Lanczos solver for the lowest eigenpairs.
//! - [`ose`]: equation assembly, equation counting, nullspace recovery.
//! - [`hoe`]: independent commutator-rank oracle.
//! - [`cli`]: experiment harness behind the `hamrec` binary.

pub mod cli;
pub mod error;
pub mod hoe;
pub mod krylov;
pub mod models;
pub mod ose;
pub mod parallel;
pub mod pauli;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use parallel::Parallelism;
