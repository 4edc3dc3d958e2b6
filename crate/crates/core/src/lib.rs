//! Random kernel sections of convex bodies.
//!
//! Tools for measuring `diam(T ∩ ker Γ)` where `Γ` has iid isotropic rows,
//! and for comparing it against width-based upper bounds of the form
//! `(C/√k) · max{E‖G‖_{T°}, E‖k^{-1/2}ΣXᵢ‖_{T°}}`.
//!
//! The geometry is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the sweep harness uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bodies;
pub mod bounds;
pub mod diameter;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod lp;
pub mod proofkit;
pub mod rng;
pub mod scalar;
pub mod widths;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use scalar::Scalar;

pub type ConvexBody = bodies::ConvexBody<f64>;
pub type ConvexBodyF32 = bodies::ConvexBody<f32>;
pub type KernelBasis = kernels::KernelBasis<f64>;
pub type WidthEstimate = widths::WidthEstimate<f64>;
pub type BoundReport = bounds::BoundReport<f64>;
pub type DiameterResult = diameter::DiameterResult<f64>;
