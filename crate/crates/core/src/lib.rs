//! Behavioral simulation of timing-skew mitigation in time-interleaved ADCs.
//!
//! Each of `L` sub-ADCs samples an analytic stimulus at its own skewed
//! instant. Two conditioners pick an alternative sampling edge per sample so
//! that the skew vanishes on average:
//!
//! * [`scramble`] draws the edge offset i.i.d. from `{-1, 0, 1}` with
//!   probabilities chosen so the residual error has zero mean and a second
//!   moment shared by every channel.
//! * [`ddsm`] drives a digital delta-sigma modulator with the normalized skew,
//!   so the residual error is pushed away from the band of interest.
//!
//! [`engine`] runs a capture end to end, [`analysis`] measures spectra and
//! evaluates the closed-form residual-error and SFDR predictions, and [`cli`]
//! wraps everything in config-driven scenarios.

// Negated comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod ddsm;
pub mod engine;
mod error;
pub mod scramble;
pub mod signal;
pub mod subadc;
pub mod timing;

pub use error::{Error, Result};
