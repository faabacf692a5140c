//! Secure transmission through an intelligent reflecting surface (IRS).
//!
//! The design runs in two stages. First the IRS location is chosen from
//! channel statistics only ([`placement`]), using outage quantiles from
//! [`outage`]. Then, once the surface is deployed and the legitimate channel
//! is known, the transmit beamformer and the phase shifts are optimized
//! alternately ([`secrecy_sdp`]) under a chance constraint on the secrecy
//! rate. [`pipeline`] wires both stages together, including the benchmark
//! schemes.
//!
//! Geometry and closed-form layers are generic over [`Real`]; the root
//! re-exports `f64` aliases.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod geometry;
pub mod outage;
pub mod params;
pub mod pipeline;
pub mod placement;
pub mod rng;
mod scalar;
pub mod secrecy_sdp;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec2 = geometry::Vec2<f64>;
pub type Rect = geometry::Rect<f64>;
pub type SystemParams = params::SystemParams<f64>;
pub type QuantilePair = outage::QuantilePair<f64>;
pub type C64 = num_complex::Complex64;
