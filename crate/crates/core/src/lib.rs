//! Full-duplex device-to-device link analysis under α-µ fading.
//!
//! The SINR of one directed link, its density, ergodic capacity and bit
//! error probability, each computed three ways (Monte Carlo, direct
//! quadrature, bivariate Fox H), plus a wire format and bit-flip channel
//! for semantic feature payloads.

pub mod analytics;
pub mod error;
pub mod fading;
pub mod link;
pub mod montecarlo;
pub mod quadrature;
pub mod semantic_payload;
pub mod special_fn;
pub mod sweep;

pub use error::{Error, Result};
