//! Stochastic analysis of power-grid frequency.
//!
//! * [`series`]: ingestion of frequency recordings, moments and densities.
//! * [`kmest`]: kernel estimates of drift and diffusion.
//! * [`fpan`]: stationary Fokker–Planck densities and their moments.
//! * [`grid`]: lossless network model, dispatch and power-flow fixed point.
//! * [`sim`]: noisy swing-equation simulation with load-shedding events.
//! * [`reproduce`]: end-to-end checks against known values.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fpan;
pub mod grid;
pub mod kmest;
pub mod quad;
pub mod reproduce;
pub mod series;
pub mod sim;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
