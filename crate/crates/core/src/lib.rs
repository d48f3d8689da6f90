//! Simulation core for reliability-constrained V2V power control.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the algorithmic
//! parts only: generalized Pareto tail modeling of excess queues, federated
//! and centralized maximum-likelihood fitting of the tail, the radio
//! abstraction, Manhattan-grid mobility, per-pair drift-plus-penalty control
//! and the slot-driven simulator that ties them together. File formats and
//! the command line live in the `v2v-urllc` crate.

#![no_std]
#![deny(rust_2018_idioms, unused_must_use)]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod control;
pub mod error;
pub mod fed;
pub mod gpd;
pub mod mobility;
pub mod radio;
pub mod rng;
pub mod sim;

pub use control::{ControlParams, Policy, QueueState, SlotDecision};
pub use error::{Error, Result};
pub use fed::{CommsLedger, GlobalModel, LocalModel, MessageLayout};
pub use gpd::{ExcessSample, GpdParams, GpdVector};
pub use mobility::{GridSpec, VuePair, ZoneMap};
pub use radio::{LinkClass, LinkGain, RadioConfig};
pub use sim::{MetricsReport, SimConfig};
