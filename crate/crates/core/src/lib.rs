//! Multi-cell downlink power control with per-cell Q-learning agents.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithmic
//! piece: the static radio model, traffic buffers, the alpha-fair reward
//! family, the growing-batch Q-learner trained with RPROP, the per-cell
//! agents and their round-robin coordinator, the exact optimization
//! baselines, and the deterministic drop/experiment runner. File formats and
//! the command line live in the `cellpower` crate.

#![no_std]
// `!(x > 0.0)` is how validation rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agent;
pub mod error;
pub mod math;
pub mod netmodel;
pub mod oracle;
pub mod qlearn;
pub mod reward;
pub mod rng;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
