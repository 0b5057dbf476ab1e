//! Numerics for the s-harmonic extension of bounded boundary data on the
//! upper half-space and the fractional Laplacian it encodes.
//!
//! The same object is computed by three independent routes:
//!
//! 1. **Kernel quadrature** ([`kernel`]): convolution of the boundary data
//!    with the half-space kernel
//!    `K_y(x) = C_{n,s} y^{2s} / (|x|^2 + y^2)^{n/2+s}`
//!    by deterministic adaptive quadrature.
//! 2. **Exact-exit Monte Carlo** ([`mc`]): the exit position of the
//!    diffusion `Z = (X, Y)` — Brownian motion paired with a Bessel-type
//!    vertical component — factorizes as a Gaussian at an independent
//!    hitting time, which is sampled exactly from an inverse-gamma law.
//! 3. **Pathwise simulation** ([`mc`], [`bessel`]): Euler–Maruyama on the
//!    full SDE with absorption at the boundary.
//!
//! The fractional Laplacian is then extracted both as a principal-value
//! singular integral and as the weighted Neumann trace of the extension
//! ([`fractional`]), and the two are checked against each other.
//!
//! Estimators are deterministic: a root seed plus a fixed chunking of the
//! sample space into counter-based streams gives bit-identical results
//! at any worker-thread count.

// Guards are written as !(x > 0.0) so NaN falls into the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tabulated quadrature nodes and frozen oracle values keep their full
// published precision.
#![allow(clippy::excessive_precision)]

pub mod bessel;
pub mod boundary;
pub mod checks;
pub mod error;
pub mod fractional;
pub mod kernel;
pub mod mc;
pub mod params;
pub mod quad;
pub mod special;
pub mod stream;

pub use boundary::BoundaryFunction;
pub use error::{FracError, Result};
pub use params::{FracParams, HalfSpacePoint};
pub use quad::QuadResult;
