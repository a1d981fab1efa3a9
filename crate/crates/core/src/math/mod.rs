//! Numerical kernels: special functions and adaptive quadrature.
//!
//! Everything in this module is a pure deterministic function of its
//! arguments and is safe to call concurrently. Arbitrary-precision
//! arithmetic is deliberately absent from the production path; the test
//! suite cross-checks these kernels against double-double partial sums and
//! closed-form identities instead.

pub mod quad;
pub mod special;

pub use quad::{integrate, integrate_to_inf, QuadratureSpec, TailBound};
pub use special::{erfc_fn, gamma_fn, hyp2f1, regularized_upper_gamma};
