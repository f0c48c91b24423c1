//! Link scheduling under heterogeneously delayed network-state information.
//!
//! Every transmitter in a single-hop wireless network learns the queue
//! lengths and channel states of every other link, each with its own fixed
//! delay. This crate provides the scheduling policies that operate on such
//! information, exact evaluators for their saturated throughput and queueing
//! delay, calculators for the size of the optimal policies' search spaces,
//! and a seeded Monte-Carlo engine to check all of it.
//!
//! ```
//! use hdsched::prelude::*;
//!
//! let table = presets::table1();
//! assert_eq!(table.tau_max(), 4);
//! assert_eq!(table.tau_l_max(1), 4);
//!
//! let channel = ChannelModel::two_state(0.1).unwrap();
//! let rate = channel.cond_expected_rate(1, 4);
//! assert!((rate - 1.7048).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod channel;
pub mod policies;
pub mod presets;
pub mod sim;
pub mod state;
pub mod topology;

mod error;

pub use error::Error;

pub mod prelude {
    pub use crate::analysis::{analytic_saturated_throughput, oracle_saturated_throughput};
    pub use crate::channel::{ChannelModel, ChannelProfile};
    pub use crate::policies::{LcVariant, Policy, ScheduleDecision};
    pub use crate::presets;
    pub use crate::sim::{Mode, SimConfig, SimMetrics};
    pub use crate::state::{ArrivalKind, ArrivalProcess};
    pub use crate::topology::{BigPower, DelayTable, InterferenceSpec, ThresholdVariant};
    pub use crate::Error;
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/delays.md")]
    mod delays {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/complexity.md")]
    mod complexity {}
    #[doc = include_str!("../../../book/src/elimination.md")]
    mod elimination {}
    #[doc = include_str!("../../../book/src/threshold.md")]
    mod threshold {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
