//! Buffer-aided relaying for the two-hop full-duplex relay channel with
//! self-interference.
//!
//! - [`channel`]: path loss, Rayleigh fading and link capacities.
//! - [`schemes`]: per-slot selection metrics, power allocation and state choice.
//! - [`adaptation`]: online estimation of the Lagrange multipliers.
//! - [`simulator`]: slot-by-slot runs of the schemes and the benchmarks.

pub mod adaptation;
pub mod channel;
pub mod schemes;
pub mod simulator;

pub use channel::{ChannelMeans, ChannelSample, LinkConfig};
pub use schemes::{Multipliers, OutageFlags, PowerSet, RelayState, SelectionMetrics};
