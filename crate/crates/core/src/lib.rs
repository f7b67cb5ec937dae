//! Numerical core for the modified mean curvature flow of Killing graphs in
//! warped products `M ×_ρ ℝ` over rotationally symmetric model manifolds.
//!
//! The crate is organized around four public modules:
//!
//! - [`model`] — warped-product geometries `(n, ξ, ρ, L)` and the standing
//!   curvature/warping condition checks.
//! - [`barrier`] — constant-mean-curvature spherical caps, the expanding
//!   barrier radius `R(t)`, and the height-estimate envelopes they induce.
//! - [`flow`] — finite-difference evolution of `∂ₜu = Q[u]` on geodesic
//!   balls, radial (1-D) and polar (2-D, n = 2) modes.
//! - [`estimates`] — a-priori estimate budgets (gradient, height, curvature)
//!   and trace auditors that check flow output against them.
//!
//! Support modules [`quad`], [`ode`] and [`expr`] carry the adaptive
//! quadrature, the adaptive Runge–Kutta integrator and the small expression
//! grammar used for custom radial profiles.
//!
//! The crate is `no_std`-compatible (`alloc` required); disable the default
//! `std` feature for embedded use. All floating-point special functions are
//! routed through `libm`, so results are bit-identical across platforms.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]
// negated comparisons guard against NaN parameters; index loops mirror the
// stencil structure
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod barrier;
pub mod error;
pub mod estimates;
pub mod expr;
pub mod flow;
pub(crate) mod math;
pub mod model;
pub mod ode;
pub mod quad;

pub use error::{Error, Result};
pub use model::WarpedModel;
