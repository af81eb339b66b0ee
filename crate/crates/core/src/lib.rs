//! Discrete-time simulator for the GHOST family of proof-of-stake fork-choice
//! rules: vanilla GHOST, committee GHOST with proposer boost and its
//! latest-message-driven variant, together with the avalanche and balancing
//! attacks against them.
//!
//! The crate is `no_std` and only needs `alloc`. Everything is deterministic:
//! randomness comes from seeded ChaCha8 streams and all maps are ordered.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod chain;
pub mod engine;
pub mod forkchoice;
pub mod honest;
pub mod lottery;
pub mod network;

pub use chain::{Block, BlockId, BlockTree, ChainError, Ledger, Slot, ValidatorId, Vote};
pub use engine::{SimConfig, Simulation, Trace};
pub use forkchoice::{ForkChoiceMode, TieBreaker};
pub use lottery::{Fraction, LotteryConfig, SlotSchedule};
