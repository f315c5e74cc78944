//! Two-type continuous-state branching processes with immigration.
//!
//! The model is the coupled square-root diffusion
//!
//! ```text
//! dX₁ = (a₁ − b₁₁X₁ + b₁₂X₂) dt + σ₁√X₁ dB₁
//! dX₂ = (a₂ + b₂₁X₁ − b₂₂X₂) dt + σ₂√X₂ dB₂
//! ```
//!
//! or `dX = (A − BX) dt + Σ√X dW` in vector form. The crate provides exact
//! conditional moments and Laplace transforms ([`model`]), path simulation
//! ([`simulate`]), weighted conditional least squares estimation of
//! `(A, B, σ₁², σ₂²)` with a sandwich covariance ([`estimate`]), and the
//! Monte Carlo experiment harness behind the `cbi2` binary ([`experiments`]).

// `!(x > 0.0)` is the NaN-rejecting form used for input checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod experiments;
pub mod mat2;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use mat2::{Mat2, Vec2, Vec4};
pub use model::{Drift, ModelParams};
