//! Solver-and-verifier toolkit for unlabeled sensing: recover an unknown
//! coefficient vector from a design matrix and a permuted response by
//! solving the power-sum polynomial system, and verify the underlying
//! algebraic structure (solution counts, regular sequences, Macaulay
//! resultants, eliminant degrees) exactly on small instances.

pub mod instance;
pub mod mat;
pub mod polyring;
pub mod residual;
pub mod scalar;
pub mod solver;
pub mod symfun;

pub use mat::Mat;
pub use polyring::{Monomial, MonomialOrder, Poly};
pub use scalar::{Coeff, Rat, Real};

/// Polynomial with exact rational coefficients.
pub type QPoly = Poly<Rat>;
/// Polynomial with 64-bit float coefficients.
pub type FPoly = Poly<f64>;
/// Exact rational matrix.
pub type QMat = Mat<Rat>;
/// 64-bit float matrix.
pub type FMat = Mat<f64>;
