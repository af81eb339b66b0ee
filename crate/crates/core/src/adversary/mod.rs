//! Attack strategies.
//!
//! A strategy sees the whole run from the adversary's seat: the schedule, a
//! global view that receives every message the moment it exists (withheld
//! ones included), and, at voting ticks, the head each honest validator just
//! voted for. It answers with [`Action`]s that the engine carries out after
//! the honest validators have acted in the same tick.

use alloc::vec::Vec;

use thiserror::Error;

use crate::chain::{BlockId, Slot, ValidatorId};
use crate::forkchoice::ForkChoiceMode;
use crate::honest::ValidatorView;
use crate::lottery::SlotSchedule;
use crate::network::{Message, Partition, Tick};

mod avalanche;
mod balancing;

pub use avalanche::{build_displacement_subtree, AvalancheParams, AvalanchePhase, AvalancheState};
pub use balancing::{BalancingParams, BalancingPhase, BalancingState, SetupMode};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    /// Register a new adversarial message without sending it.
    Withhold(Message),
    /// Send to every honest validator; releases the withheld copy if there is one.
    Broadcast(Message),
    /// First message reaches `H_Left` first, second reaches `H_Right` first.
    SplitRelease(Message, Message),
    /// Append to the tie-breaking preference list.
    Prefer(Vec<BlockId>),
    /// Marks a displacement release for the trace.
    Released {
        tip: BlockId,
        blocks: Vec<BlockId>,
    },
    Finished(AttackOutcome),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttackOutcome {
    /// Honest weight passed the withheld pool.
    Overtaken { slot: Slot },
    /// A release was needed but fewer than two blocks were left.
    Exhausted { slot: Slot },
    /// Every honest head ended up on one side.
    Collapsed { slot: Slot },
    /// As `Collapsed`, caused by a boosted honest proposal.
    BoostOverpowered { slot: Slot },
}

impl AttackOutcome {
    pub fn slot(self) -> Slot {
        match self {
            AttackOutcome::Overtaken { slot }
            | AttackOutcome::Exhausted { slot }
            | AttackOutcome::Collapsed { slot }
            | AttackOutcome::BoostOverpowered { slot } => slot,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackOutcome::Overtaken { .. } => "overtaken",
            AttackOutcome::Exhausted { .. } => "exhausted",
            AttackOutcome::Collapsed { .. } => "collapsed",
            AttackOutcome::BoostOverpowered { .. } => "boost-overpowered",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("displacement needs at least two withheld blocks, have {0}")]
    PoolTooSmall(usize),
    #[error("balancing setup needs adversarial proposers in slots {first}..={last}; slot {honest} is honest")]
    SetupImpossible {
        first: Slot,
        last: Slot,
        honest: Slot,
    },
    #[error("balancing setup needs at least {0} slots")]
    RunTooShort(Slot),
}

pub struct AdversaryContext<'a> {
    pub tick: Tick,
    pub num_slots: Slot,
    pub schedule: &'a SlotSchedule,
    pub global: &'a ValidatorView,
    pub partition: &'a Partition,
    pub mode: ForkChoiceMode,
    pub boost_weight: u64,
    /// Heads the honest validators evaluated this voting tick; empty at
    /// proposal ticks.
    pub honest_heads: &'a [(ValidatorId, BlockId)],
    pub tiebreak: &'a crate::forkchoice::TieBreaker,
}

impl AdversaryContext<'_> {
    pub fn slot(&self) -> Slot {
        self.tick.slot()
    }
}

/// A deterministic attack driven by the tick clock.
///
/// Further strategies, such as an avalanche variant that exploits proposer
/// boost, plug in here.
pub trait AttackStrategy: Send {
    fn on_tick(&mut self, ctx: &AdversaryContext<'_>) -> Vec<Action>;

    /// `None` while the attack is still running.
    fn outcome(&self) -> Option<AttackOutcome>;
}
