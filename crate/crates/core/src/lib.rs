//! Numerical laboratory for a family of linear systems that are easy to
//! identify but hard to learn to stabilize.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense linear algebra helpers, real polynomials, root
//!   finding, the discrete Riccati solver and seeded Gaussian streams.
//! - [`systems`]: the parametric hard family, the two-system pair that is
//!   close in parameter space, trajectory simulation and the single-parameter
//!   least-squares estimator.
//! - [`synthesis`]: pole placement, closed-loop characteristic polynomials,
//!   the Jury necessary conditions and the co-stabilizability ceiling.
//! - [`bounds`]: the KL divergence bound, its Monte-Carlo counterpart and the
//!   resulting sample-complexity lower bound.
//! - [`lmi`]: the common-Lyapunov co-stabilizability test and the bisection
//!   over the perturbation size.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod lmi;
pub mod numerics;
pub mod synthesis;
pub mod systems;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use numerics::{
    fmt_f64, gaussian_sample, poly_roots, solve_dare, spectral_radius, Matrix, Polynomial, Prng, Vector,
};
pub use synthesis::FeedbackGain;
pub use systems::{HardFamilyParams, HardPair, InputPolicy, LtiSystem, Trajectory};
