//! Pulse-level simulation of a cross-resonance CNOT between two transmon modules
//! linked by a coaxial cable, with the calibration and benchmarking pipeline around it.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarking;
pub mod calibration;
pub mod device;
pub mod error;
pub mod fit;
pub mod pulse;
pub mod quantum;
pub mod tomography;

pub use error::{Error, Result};
