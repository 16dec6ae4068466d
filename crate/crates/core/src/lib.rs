//! Energy accounting, NC-MFSK over Rayleigh fading, and an LT codec for
//! comparing coded and uncoded sensor links.

pub mod channel;
pub mod codes;
pub mod config;
pub mod energy;
mod error;
pub mod lt;
pub mod montecarlo;
pub mod optimizer;
pub mod rng;
pub mod selftest;
pub mod units;

pub use error::{Error, Result};
