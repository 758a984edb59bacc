//! Brownian motion in `R^d` with a partly reflecting membrane on a hyperplane.
//!
//! The process diffuses with generator `½∇·B∇`, is skewed towards one side of
//! the hyperplane `S = {x : (x, ν) = 0}` with parameter `q ∈ [−1, 1]`, and is
//! pushed along `S` by `α` per unit of local time on `S`.
//!
//! - [`geometry`]: parameters and the decomposition of `R^d` along `ν`.
//! - [`density`]: closed-form transition density and its building blocks.
//! - [`sampler`]: exact simulation of endpoints, local times and paths.
//! - [`verify`]: numerical and statistical checks of the above.
//! - [`cli`]: the `membrane-bm` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
pub mod error;
pub mod geometry;
pub mod quadrature;
pub mod sampler;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
