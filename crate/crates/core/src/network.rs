//! Half-slot clock, delivery queue, adversarial withholding and split delivery.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::chain::{Block, BlockId, Slot, ValidatorId, Vote};
use crate::lottery::{self, Fraction, SlotSchedule};

/// Half-slot counter. Slot `t` proposes at tick `2t` and votes at `2t + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tick(pub u64);

impl Tick {
    pub fn proposal(slot: Slot) -> Tick {
        Tick(2 * slot)
    }

    pub fn voting(slot: Slot) -> Tick {
        Tick(2 * slot + 1)
    }

    pub fn slot(self) -> Slot {
        self.0 / 2
    }

    pub fn is_proposal(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn is_voting(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn next(self) -> Tick {
        Tick(self.0 + 1)
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Block(Block),
    Vote(Vote),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub payload: Payload,
    pub origin: ValidatorId,
}

impl Message {
    pub fn block(block: Block) -> Self {
        Message {
            origin: block.proposer,
            payload: Payload::Block(block),
        }
    }

    pub fn vote(vote: Vote) -> Self {
        Message {
            origin: vote.voter,
            payload: Payload::Vote(vote),
        }
    }

    pub fn key(&self) -> MessageKey {
        match &self.payload {
            Payload::Block(b) => MessageKey::Block(b.id),
            Payload::Vote(v) => MessageKey::Vote(v.voter, v.slot, v.target),
        }
    }
}

/// Content identity of a message, used to find withheld copies again.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKey {
    Block(BlockId),
    Vote(ValidatorId, Slot, BlockId),
}

/// Index into the run's message registry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MsgId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

/// Who a queued delivery goes to. Only honest-behaving validators keep views;
/// the adversary sees everything as soon as it exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Audience {
    /// Every honest validator except the message's origin.
    AllHonest,
    Group(Side),
    Only(ValidatorId),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("{0} is not adversarial")]
    NotAdversarial(ValidatorId),
    #[error("partition sides overlap at {0}")]
    OverlappingPartition(ValidatorId),
}

#[derive(Clone, Debug, Default)]
pub struct NetworkQueue {
    pending: BTreeMap<Tick, Vec<(MsgId, Audience)>>,
}

impl NetworkQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, at: Tick, msg: MsgId, audience: Audience) {
        self.pending.entry(at).or_default().push((msg, audience));
    }

    /// Everyone honest gets `msg` one tick later, in send order.
    pub fn broadcast(&mut self, msg: MsgId, now: Tick) {
        self.schedule(now.next(), msg, Audience::AllHonest);
    }

    /// `H_Left` gets `a` then `b`, `H_Right` gets `b` then `a`, one tick apart.
    /// Both origins must be adversarial.
    pub fn split_release(
        &mut self,
        a: (MsgId, &Message),
        b: (MsgId, &Message),
        schedule: &SlotSchedule,
        now: Tick,
    ) -> Result<(), NetworkError> {
        for m in [a.1, b.1] {
            if !schedule.is_adversarial(m.origin) {
                return Err(NetworkError::NotAdversarial(m.origin));
            }
        }
        let (first, second) = (now.next(), now.next().next());
        self.schedule(first, a.0, Audience::Group(Side::Left));
        self.schedule(first, b.0, Audience::Group(Side::Right));
        self.schedule(second, b.0, Audience::Group(Side::Left));
        self.schedule(second, a.0, Audience::Group(Side::Right));
        Ok(())
    }

    /// Removes and returns the deliveries due at `now`.
    pub fn take_due(&mut self, now: Tick) -> Vec<(MsgId, Audience)> {
        self.pending.remove(&now).unwrap_or_default()
    }

    pub fn is_idle(&self) -> bool {
        self.pending.is_empty()
    }
}

/// Adversarial messages held back from the network.
#[derive(Clone, Debug, Default)]
pub struct AdversaryBuffer {
    held: BTreeMap<MessageKey, MsgId>,
}

impl AdversaryBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn withhold(
        &mut self,
        id: MsgId,
        msg: &Message,
        schedule: &SlotSchedule,
    ) -> Result<(), NetworkError> {
        if !schedule.is_adversarial(msg.origin) {
            return Err(NetworkError::NotAdversarial(msg.origin));
        }
        self.held.insert(msg.key(), id);
        Ok(())
    }

    pub fn take(&mut self, key: &MessageKey) -> Option<MsgId> {
        self.held.remove(key)
    }

    pub fn contains(&self, key: &MessageKey) -> bool {
        self.held.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.held.len()
    }

    pub fn is_empty(&self) -> bool {
        self.held.is_empty()
    }
}

/// Disjoint halves of the honest validators used by split delivery.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    left: Vec<ValidatorId>,
    right: Vec<ValidatorId>,
}

impl Partition {
    pub fn from_sides(
        mut left: Vec<ValidatorId>,
        mut right: Vec<ValidatorId>,
    ) -> Result<Self, NetworkError> {
        left.sort();
        left.dedup();
        right.sort();
        right.dedup();
        if let Some(v) = left.iter().find(|v| right.binary_search(v).is_ok()) {
            return Err(NetworkError::OverlappingPartition(*v));
        }
        Ok(Partition { left, right })
    }

    /// Honest validators dealt alternately to Left and Right, in order of
    /// first committee appearance (ids never on a committee come last).
    /// Sides differ in size by at most one, and any committee whose honest
    /// members are all new splits evenly.
    pub fn balanced(schedule: &SlotSchedule) -> Self {
        let mut seen = alloc::vec![false; schedule.num_validators() as usize];
        let mut order = Vec::new();
        for slot in 1..=schedule.num_slots() {
            for &v in schedule.committee(slot) {
                if !schedule.is_adversarial(v) && !seen[v.index()] {
                    seen[v.index()] = true;
                    order.push(v);
                }
            }
        }
        for v in schedule.honest_validators() {
            if !seen[v.index()] {
                order.push(v);
            }
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (i, v) in order.into_iter().enumerate() {
            if i % 2 == 0 {
                left.push(v);
            } else {
                right.push(v);
            }
        }
        left.sort();
        right.sort();
        Partition { left, right }
    }

    /// Balanced partition with each member moved to the other side with
    /// probability `flip`.
    pub fn jitter(schedule: &SlotSchedule, flip: Fraction, seed: u64) -> Self {
        let base = Self::balanced(schedule);
        let mut rng = lottery::stream(seed, lottery::STREAM_PARTITION, 0);
        let den = flip.den().min(u32::MAX as u64) as u32;
        let num = flip.num().min(den as u64) as u32;
        let mut left = Vec::new();
        let mut right = Vec::new();
        for v in schedule.honest_validators() {
            let on_left = base.left.binary_search(&v).is_ok();
            let flipped = num > 0 && lottery::below(&mut rng, den) < num;
            if on_left != flipped {
                left.push(v);
            } else {
                right.push(v);
            }
        }
        Partition { left, right }
    }

    pub fn side_of(&self, v: ValidatorId) -> Option<Side> {
        if self.left.binary_search(&v).is_ok() {
            Some(Side::Left)
        } else if self.right.binary_search(&v).is_ok() {
            Some(Side::Right)
        } else {
            None
        }
    }

    pub fn members(&self, side: Side) -> &[ValidatorId] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}
