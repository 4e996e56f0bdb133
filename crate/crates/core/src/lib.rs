//! Statistical rate-splitting precoding for the FDD massive-MIMO downlink.
//!
//! The base station knows only the users' channel covariance matrices plus a
//! short, pilot-contaminated observation of each channel. Precoders are
//! bilinear, `p = A y`: a deterministic transform `A` (designed once per
//! covariance coherence interval from second-order statistics) applied to the
//! instantaneous observation `y`. The crate provides
//!
//! - a multi-cluster spatial channel model ([`channel`]),
//! - the downlink training / observation model ([`training`]),
//! - closed-form hardening-bound SINRs and the Kronecker-structured operators
//!   behind them ([`sinr`], [`kron`]),
//! - the private-precoder fractional-programming solver ([`private_opt`]),
//! - the max-min common-precoder solver ([`common_opt`]),
//! - golden-section search over the common power fraction ([`power_split`]),
//! - an iterative weighted-MMSE per-realization baseline ([`iwmmse`]),
//! - a seeded Monte-Carlo sweep harness with CSV/JSON reporting ([`sweep`],
//!   [`report`], [`config`]).

pub mod channel;
pub mod common_opt;
pub mod config;
pub mod error;
pub mod iwmmse;
pub mod kron;
pub mod linalg;
pub mod matio;
pub mod power_split;
pub mod private_opt;
pub mod report;
pub mod sinr;
pub mod sweep;
pub mod training;

pub use error::{Error, Result};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;
/// Dynamically sized complex matrix.
pub type CMat = DMatrix<C64>;
/// Dynamically sized complex vector.
pub type CVec = DVector<C64>;
