//! Numerical laboratory for maximal L^p-regularity of non-autonomous
//! parabolic problems `u' + A(t)u + B(t)u = f` whose perturbation `B(t)` has
//! a time envelope that may be singular at `t = 0`.
//!
//! The finite-dimensional model is a diagonal Hilbert scale: a space `X_γ` is
//! `R^n` with the norm `|(λ_i^γ x_i)|_2`. Time-weighted Lebesgue, Sobolev
//! and trace norms live in [`spaces`], problem families in [`problems`],
//! exact rational parameter bookkeeping in [`admissibility`], the
//! fixed-point solvers in [`solver`] and the numerical estimate checks in
//! [`verify`].

pub mod admissibility;
pub mod error;
pub mod problems;
pub mod solver;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
