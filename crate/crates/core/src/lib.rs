//! Quadrature-based moment closures for the one-dimensional BGK equation.
//!
//! The crate covers realizable moment algebra, closure construction
//! (QMOM, hyperbolic QMOM with a free parameter, polynomial-defined closures),
//! spectral certification of the closed systems, a numerical check of the
//! structural stability condition at equilibrium, and a first-order
//! finite-volume solver that keeps every cell realizable.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod closure;
pub mod error;
pub mod moment_algebra;
pub mod orthopoly;
pub mod poly;
pub mod sampling;
pub mod solver;
pub mod stability;
pub mod vandermonde;

pub use closure::{ClosureSpec, SpectralDecomposition};
pub use error::{Error, Result};
pub use moment_algebra::{EquilibriumState, MomentVector, RecurrenceCoefficients};
pub use orthopoly::Quadrature;
pub use poly::{MonicPolynomial, Polynomial};
