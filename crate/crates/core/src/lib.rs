//! Communication-efficient distributed best-arm identification, simulated.
//!
//! `N` players each run a median-elimination loop without the right to
//! eliminate arms locally; a synchronization server collects their
//! elimination wishes as votes and broadcasts an arm's index once half of
//! the most-active group has voted against it. Every message carries a
//! fixed-width binary action code, and a ledger tracks the exact number of
//! bits on the wire. The crate also provides the multi-instance extension
//! that hedges over vote-threshold choices, the usual baselines (local
//! median elimination, centralized median elimination, UCB1), and a seeded
//! experiment harness that writes regret traces and protocol summaries to
//! CSV.

pub mod bandit;
pub mod edme;
pub mod env;
mod error;
pub mod harness;
pub mod protocol;

pub use error::{Error, Result};
