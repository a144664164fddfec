//! Numerical substrate shared by every other module.
//!
//! Dense matrices are `nalgebra` matrices; everything else here (polynomials,
//! root finding, the Riccati solver, the Gaussian streams) is implemented
//! locally so its convergence behaviour is under our control.

mod format;
mod linalg;
mod poly;
mod riccati;
mod rng;

pub use format::fmt_f64;
pub use linalg::{
    balance, condition_number, eigenvalues, ensure_finite, matrix_from_row_major, min_symmetric_eigenvalue,
    spectral_radius, Matrix, Vector, CONDITIONING_WARN_DIM,
};
pub use poly::{poly_roots, Polynomial};
pub use riccati::{dare_residual, solve_dare, solve_dare_with, DareMethod, DareSolution};
pub use rng::{gaussian_sample, Prng, ALGORITHM_ID};
