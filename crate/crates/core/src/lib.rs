//! Maximally recoverable codes with two-level hierarchical locality.
//!
//! The crate builds parity-check matrices for hierarchical-local (HL) codes
//! over explicit finite-field towers `F_q ⊂ F_{q^m1} ⊂ F_{q^m}`, derives
//! hierarchical data-local (HDL) codes from them, and certifies maximal
//! recoverability by exhaustively checking every admissible erasure pattern
//! with exact linear algebra.
//!
//! Module map:
//! - [`galois`] — the field tower, element arithmetic, Frobenius maps.
//! - [`matrix`] — dense exact matrices, rank/rref/inverse/null space,
//!   k-wise independence testing.
//! - [`indep`] — certified k-wise independent element sets (BCH parity
//!   columns with a greedy fallback).
//! - [`model`] — code parameters, group layout, erasure-pattern and
//!   admissible-set enumeration, closed-form distance values.
//! - [`construct`] — parity-check construction and field-parameter selection.
//! - [`verify`] — exhaustive MR certification, erasure recovery, brute-force
//!   minimum distance, locality checks.
//! - [`derive`] — HDL-from-HL symbol dropping.

pub mod construct;
pub mod derive;
pub mod galois;
pub mod indep;
pub mod matrix;
pub mod model;
pub mod verify;

pub(crate) mod combi;

pub use galois::{Element, FieldSpec, FieldTower, GaloisError, Level};
pub use matrix::{IndexSet, Matrix, MatrixError};

