//! Wave-level laboratory for noise-based classical key distribution.
//!
//! The crate simulates a lossless transmission line with Thevenin
//! terminations, runs the resistor-switching (KLJN) protocol and a noiseless
//! battery-switching variant on it, implements passive and active
//! eavesdropping attacks on the recorded waves, estimates entropies and
//! conditional mutual information, and demonstrates advantage distillation
//! on a three-observer thermal circuit.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod distill;
pub mod error;
pub mod infotheory;
pub mod protocols;
pub mod signal;
pub mod stats;
pub mod txline;

pub use error::{Error, Result};
pub use signal::{RngStream, SampledTrace};
