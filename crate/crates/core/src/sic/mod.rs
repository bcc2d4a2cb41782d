//! Self-interference reduction across the propagation, analog-circuit and
//! digital domains.

mod chain;
mod hammerstein;
mod two_tap;

pub use chain::*;
pub use hammerstein::*;
pub use two_tap::*;
