//! Full-duplex integrated access and backhaul (FD IAB) simulator.
//!
//! The crate models one FD IAB deployment at two levels:
//!
//! - **Link level**: a self-interference (SI) reduction chain that runs an
//!   OFDM calibration frame through a Rapp power amplifier, a geometric SI
//!   channel, an optional channel-aware two-tap RF canceller, a 14-bit ADC and
//!   a fifth-order parallel Hammerstein digital canceller, reporting the SI
//!   power after each domain ([`sic::run_link_chain`]).
//! - **System level**: an IAB-donor and single-hop IAB-nodes serving a UE
//!   grid with a 16-beam codebook, max-SNR scheduling, direct-link
//!   interference and residual SI on the backhaul, for five network
//!   configurations ([`system::run_drop`]).
//!
//! Everything is deterministic in a 64-bit seed. Complex baseband samples
//! carry power in milliwatts: `|x|^2` is the instantaneous power in mW.
//!
//! Runnable walk-throughs live in `examples/`; the `fdiab` binary wraps the
//! [`runner`] commands.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod ofdm;
pub mod rf;
pub mod rng;
pub mod runner;
pub mod sic;
pub mod system;
pub mod units;

pub use error::{Error, Result};
