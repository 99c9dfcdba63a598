//! Transmit beamforming for integrated sensing and communication (ISAC) with a
//! stacked intelligent metasurface (SIM) in front of a small feed array.
//!
//! The crate covers the whole simulation pipeline:
//!
//! * [`geometry`]: feed array and metasurface layout, Rayleigh-Sommerfeld
//!   inter-layer diffraction matrices.
//! * [`wavedomain`]: per-atom phase shifts and the cascaded beamforming matrix.
//! * [`channel`]: Saleh-Valenzuela user channels and planar steering vectors.
//! * [`metrics`]: SINR, sum rate, transmit beam pattern and beam-matching error.
//! * [`gradients`]: analytic phase gradients of both objectives plus a
//!   central-difference reference.
//! * [`optimizer`]: the dual-normalized differential gradient descent loop
//!   with restarts and solution selection.
//! * [`harness`]: configuration, seeded Monte-Carlo campaigns, figure data and
//!   the complexity probe.
//!
//! Indices in the Rust API are 0-based. The only exception is [`metrics::TargetBin`],
//! which names angular bins by their 1-based grid number.

pub mod channel;
pub mod error;
pub mod geometry;
pub mod gradients;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod problem;
pub mod seed;
pub mod wavedomain;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = ndarray::Array2<C64>;

/// Dense real matrix.
pub type RMatrix = ndarray::Array2<f64>;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
