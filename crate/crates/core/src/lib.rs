//! Robust sum-rate beamforming for time-switching SWIPT downlinks with
//! imperfect channel knowledge.
//!
//! Coordinated base stations serve single-antenna users with information
//! beamformers and energy covariances. The design maximizes a lower bound on
//! the average sum rate subject to per-BS power limits and energy-harvesting
//! outage constraints, alternating between a WMMSE/SDP block for the
//! beamformers and a closed-form update of the time-switching ratio.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate openblas_src;

pub mod ao;
pub mod chance;
pub mod channel;
pub mod conic;
pub mod error;
pub mod harness;
pub mod instance;
pub mod io;
pub mod linalg;
pub mod wmmse;

pub use error::{Error, Result};
