//! Circular Radon transforms with centers on a plane curve.
//!
//! The crate covers the forward transform over circles centered on a curve,
//! its reduction to the 2D wave equation through the Abel operator pair,
//! billiard-based artifact prediction inside convex curves, time-reversal
//! reconstruction, and explicit construction of singularity-cancelling
//! "ghost" functions.
//!
//! Module map:
//!
//! * [`geometry`] curves, ray hits, mirror map, billiard flow, artifact sets
//! * [`fields`] sampled phantoms, radial profiles, wave packets, file formats
//! * [`radon`] forward sinograms and the exact radial fast path
//! * [`abel`] the Abel operator, its left inverse and the trace assembly
//! * [`wave`] leapfrog solver, boundary traces, time reversal and ghosts
//! * [`cancel`] conormal expansions and ghost coefficients for radial data
//! * [`selfcheck`] invariant suite shared by the CLI

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abel;
pub mod cancel;
mod error;
pub mod fields;
pub mod geometry;
pub mod interp;
pub mod par;
pub mod quadrature;
pub mod radon;
pub mod selfcheck;
pub mod wave;

pub use error::{Error, Result};
pub use nalgebra::Vector2;

/// Points and directions in the plane.
pub type Vec2 = Vector2<f64>;
