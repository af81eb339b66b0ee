use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::adversary::AttackOutcome;
use crate::chain::{BlockId, Slot, ValidatorId};
use crate::forkchoice::ForkChoiceMode;
use crate::lottery::SlotSchedule;
use crate::network::{Audience, Message, MsgId, Partition, Payload, Tick};

/// A message as first registered by the engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageRecord {
    pub id: MsgId,
    pub tick: Tick,
    pub message: Message,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    /// A block came into existence.
    Mint {
        tick: Tick,
        msg: MsgId,
    },
    /// A vote came into existence.
    Vote {
        tick: Tick,
        msg: MsgId,
    },
    Withhold {
        tick: Tick,
        msg: MsgId,
    },
    Deliver {
        tick: Tick,
        msg: MsgId,
        audience: Audience,
    },
    Release {
        tick: Tick,
        tip: BlockId,
        blocks: Vec<BlockId>,
    },
    /// An honest validator's head: every validator at a voting tick, the
    /// proposer right after proposing.
    Head {
        tick: Tick,
        validator: ValidatorId,
        head: BlockId,
    },
    /// Deliveries a view discarded at this tick (duplicates, stale votes).
    Ignored {
        tick: Tick,
        validator: ValidatorId,
        count: u32,
    },
    Outcome {
        tick: Tick,
        outcome: AttackOutcome,
    },
}

impl Event {
    pub fn tick(&self) -> Tick {
        match self {
            Event::Mint { tick, .. }
            | Event::Vote { tick, .. }
            | Event::Withhold { tick, .. }
            | Event::Deliver { tick, .. }
            | Event::Release { tick, .. }
            | Event::Head { tick, .. }
            | Event::Ignored { tick, .. }
            | Event::Outcome { tick, .. } => *tick,
        }
    }
}

/// Heads and confirmed-ledger tips of the honest validators at one voting
/// tick, in the order of [`Trace::honest`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotSnapshot {
    pub slot: Slot,
    pub heads: Vec<BlockId>,
    pub ledger_tips: Vec<BlockId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockMeta {
    pub slot: Slot,
    pub proposer: ValidatorId,
    pub parent: Option<BlockId>,
    pub depth: u32,
    /// Produced by an honest-behaving validator. Genesis is neither.
    pub honest: bool,
}

/// Every block that ever existed in a run, with enough structure to walk chains.
#[derive(Clone, Debug, Default)]
pub struct BlockIndex {
    blocks: BTreeMap<BlockId, BlockMeta>,
    order: Vec<BlockId>,
}

impl BlockIndex {
    pub fn get(&self, id: BlockId) -> Option<&BlockMeta> {
        self.blocks.get(&id)
    }

    /// Blocks in registration order, genesis first.
    pub fn ids(&self) -> &[BlockId] {
        &self.order
    }

    pub fn is_ancestor(&self, anc: BlockId, mut desc: BlockId) -> bool {
        let Some(target) = self.blocks.get(&anc).map(|m| m.depth) else {
            return false;
        };
        loop {
            let Some(m) = self.blocks.get(&desc) else {
                return false;
            };
            if m.depth <= target {
                return desc == anc;
            }
            desc = m.parent.expect("non-genesis block has a parent");
        }
    }

    /// Genesis-to-`id` path.
    pub fn chain(&self, mut id: BlockId) -> Vec<BlockId> {
        let mut out = Vec::new();
        loop {
            out.push(id);
            match self.blocks.get(&id).and_then(|m| m.parent) {
                Some(p) => id = p,
                None => break,
            }
        }
        out.reverse();
        out
    }

    /// Deepest ancestor-or-self of `id` whose slot is at most `slot`.
    pub fn ancestor_at_slot(&self, mut id: BlockId, slot: Slot) -> BlockId {
        while let Some(m) = self.blocks.get(&id) {
            if m.slot <= slot {
                return id;
            }
            id = m.parent.expect("genesis has slot 0");
        }
        id
    }

    pub fn lca(&self, mut a: BlockId, mut b: BlockId) -> BlockId {
        let depth = |x: BlockId| self.blocks[&x].depth;
        let parent = |x: BlockId| self.blocks[&x].parent.expect("above genesis");
        while depth(a) > depth(b) {
            a = parent(a);
        }
        while depth(b) > depth(a) {
            b = parent(b);
        }
        while a != b {
            a = parent(a);
            b = parent(b);
        }
        a
    }

    /// Child of `anc` on the path to `desc`; `desc` must lie strictly below.
    pub fn child_towards(&self, anc: BlockId, mut desc: BlockId) -> BlockId {
        loop {
            let p = self.blocks[&desc].parent.expect("strictly below ancestor");
            if p == anc {
                return desc;
            }
            desc = p;
        }
    }
}

/// Complete record of one run.
#[derive(Clone, Debug)]
pub struct Trace {
    pub num_slots: Slot,
    pub confirmation_depth: u64,
    pub mode: ForkChoiceMode,
    pub boost_weight: u64,
    pub schedule: SlotSchedule,
    /// Validators that behave honestly and keep views, ascending.
    pub honest: Vec<ValidatorId>,
    pub partition: Partition,
    pub genesis: BlockId,
    pub messages: Vec<MessageRecord>,
    pub events: Vec<Event>,
    pub snapshots: Vec<SlotSnapshot>,
    /// Final adversarial tie-breaking list, if that policy is in use.
    pub preference: Vec<BlockId>,
    pub outcome: Option<AttackOutcome>,
}

impl Trace {
    pub fn last_tick(&self) -> Tick {
        Tick::voting(self.num_slots)
    }

    pub fn message(&self, id: MsgId) -> &MessageRecord {
        &self.messages[id.0 as usize]
    }

    pub fn is_honest(&self, v: ValidatorId) -> bool {
        self.honest.binary_search(&v).is_ok()
    }

    pub fn block_index(&self) -> BlockIndex {
        let mut idx = BlockIndex::default();
        idx.blocks.insert(
            self.genesis,
            BlockMeta {
                slot: 0,
                proposer: ValidatorId::GENESIS,
                parent: None,
                depth: 0,
                honest: false,
            },
        );
        idx.order.push(self.genesis);
        for rec in &self.messages {
            if let Payload::Block(b) = &rec.message.payload {
                if idx.blocks.contains_key(&b.id) {
                    continue;
                }
                let depth = b
                    .parent
                    .and_then(|p| idx.blocks.get(&p))
                    .map_or(0, |m| m.depth + 1);
                idx.blocks.insert(
                    b.id,
                    BlockMeta {
                        slot: b.slot,
                        proposer: b.proposer,
                        parent: b.parent,
                        depth,
                        honest: self.is_honest(b.proposer),
                    },
                );
                idx.order.push(b.id);
            }
        }
        idx
    }

    pub fn releases(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Release { .. }))
            .count()
    }

    pub fn snapshot(&self, slot: Slot) -> Option<&SlotSnapshot> {
        self.snapshots.get((slot as usize).checked_sub(1)?)
    }

    /// Position of `v` in [`Self::honest`] and in snapshot vectors.
    pub fn honest_position(&self, v: ValidatorId) -> Option<usize> {
        self.honest.binary_search(&v).ok()
    }
}
