#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod aggregator;
mod arith;
pub mod dlog;
pub mod encoding;
pub mod entity;
pub mod error;
pub mod federation;
pub mod group;
pub mod mife;
pub mod models;
pub mod otp;
pub mod party;
pub mod sife;
#[cfg(test)]
mod testutil;
pub mod tpa;
pub mod transport;
pub mod wire;

pub use error::{Error, Result};
