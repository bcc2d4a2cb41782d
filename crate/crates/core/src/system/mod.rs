//! System-level downlink simulation of one IAB-donor and its single-hop
//! IAB-nodes.
//!
//! Each UE is scheduled on the (cell, beam) pair with the best access SNR.
//! UEs served by a node additionally depend on the donor-to-node backhaul,
//! which in the full-duplex modes suffers the node's residual SI while the
//! access link suffers direct-link interference (DLI) from the donor's
//! backhaul beam.

mod drop;
mod mcs;
mod scenario;

pub use drop::*;
pub use mcs::*;
pub use scenario::*;
