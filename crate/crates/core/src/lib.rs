//! Differentially private estimation of a mean curve from discretely
//! sampled functional data held by heterogeneous servers.
//!
//! * [`wavelet`]: periodized Daubechies bases, projection and reconstruction.
//! * [`datagen`]: random smooth curves, designs and noisy observations.
//! * [`privacy`]: clipping thresholds and Gaussian noise scales.
//! * [`independent`]: wavelet protocol for server-specific random designs.
//! * [`common`]: bagged local polynomial protocol for a shared grid.
//! * [`rates`]: effective-dimension solvers and closed-form rates.
//! * [`harness`]: Monte Carlo sweeps, configuration files and CSV output.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod common;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod independent;
pub mod privacy;
pub mod rates;
pub mod seeds;
pub mod wavelet;

pub use error::{Error, Result};
