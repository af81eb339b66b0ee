//! A validator's local view and the honest propose/vote behaviour.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::chain::{is_valid_vote, Block, BlockId, BlockTree, ChainError, Slot, ValidatorId, Vote};
use crate::forkchoice::{
    boost_eligibility, compute_weights, ghost_head, record_vote, BoostState, ForkChoiceMode,
    LatestMessageTable, Recorded, TieBreaker, VoteStore,
};
use crate::lottery::SlotSchedule;
use crate::network::{Message, Payload};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HonestError {
    #[error("{owner} is not the proposer of slot {slot}")]
    NotProposer { owner: ValidatorId, slot: Slot },
    #[error("{owner} is not on the committee of slot {slot}")]
    NotCommitteeMember { owner: ValidatorId, slot: Slot },
}

/// What one delivery did to a view.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReceiveReport {
    pub blocks_added: u32,
    pub votes_counted: u32,
    /// Duplicates, stale LMD votes, equal-slot equivocations.
    pub ignored: u32,
    /// Parked until a missing parent or target shows up.
    pub pending: u32,
    pub invalid: u32,
}

impl ReceiveReport {
    fn absorb(&mut self, other: ReceiveReport) {
        self.blocks_added += other.blocks_added;
        self.votes_counted += other.votes_counted;
        self.ignored += other.ignored;
        self.pending += other.pending;
        self.invalid += other.invalid;
    }
}

#[derive(Clone, Debug)]
pub struct ValidatorView {
    owner: ValidatorId,
    mode: ForkChoiceMode,
    tree: BlockTree,
    store: VoteStore,
    lmd: LatestMessageTable,
    orphan_blocks: BTreeMap<BlockId, Vec<Block>>,
    orphan_votes: BTreeMap<BlockId, Vec<Vote>>,
    /// First boost-eligible proposal received for each slot.
    proposals: BTreeMap<Slot, BlockId>,
}

impl ValidatorView {
    pub fn new(owner: ValidatorId, mode: ForkChoiceMode) -> Self {
        ValidatorView {
            owner,
            mode,
            tree: BlockTree::new(),
            store: VoteStore::new(),
            lmd: LatestMessageTable::new(),
            orphan_blocks: BTreeMap::new(),
            orphan_votes: BTreeMap::new(),
            proposals: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> ValidatorId {
        self.owner
    }

    pub fn mode(&self) -> ForkChoiceMode {
        self.mode
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn vote_store(&self) -> &VoteStore {
        &self.store
    }

    pub fn lmd_table(&self) -> &LatestMessageTable {
        &self.lmd
    }

    pub fn pending_len(&self) -> usize {
        self.orphan_blocks.values().map(Vec::len).sum::<usize>()
            + self.orphan_votes.values().map(Vec::len).sum::<usize>()
    }

    pub fn on_receive(&mut self, msg: &Message, schedule: &SlotSchedule) -> ReceiveReport {
        match &msg.payload {
            Payload::Block(b) => self.receive_block(b.clone(), schedule),
            Payload::Vote(v) => self.receive_vote(*v, schedule),
        }
    }

    fn receive_block(&mut self, block: Block, schedule: &SlotSchedule) -> ReceiveReport {
        let mut report = ReceiveReport::default();
        let mut work = alloc::vec![block];
        while let Some(block) = work.pop() {
            if self.tree.contains(block.id) {
                report.ignored += 1;
                continue;
            }
            let parent = match block.parent {
                Some(p) => p,
                None => {
                    report.invalid += 1;
                    continue;
                }
            };
            if !self.tree.contains(parent) {
                self.orphan_blocks.entry(parent).or_default().push(block);
                report.pending += 1;
                continue;
            }
            let votes = block.votes.clone();
            let id = block.id;
            let slot = block.slot;
            match self.tree.append(block) {
                Ok(_) => report.blocks_added += 1,
                Err(e) => {
                    log::debug!("{} drops block {}: {}", self.owner, id, e);
                    report.invalid += 1;
                    continue;
                }
            }
            let b = self.tree.get(id).expect("just appended");
            if !self.proposals.contains_key(&slot)
                && boost_eligibility(&self.tree, schedule, b, slot)
            {
                self.proposals.insert(slot, id);
            }
            for v in votes {
                report.absorb(self.receive_vote(v, schedule));
            }
            if let Some(waiting) = self.orphan_votes.remove(&id) {
                for v in waiting {
                    report.absorb(self.receive_vote(v, schedule));
                }
            }
            if let Some(mut kids) = self.orphan_blocks.remove(&id) {
                kids.reverse();
                work.extend(kids);
            }
        }
        report
    }

    fn receive_vote(&mut self, vote: Vote, schedule: &SlotSchedule) -> ReceiveReport {
        let mut report = ReceiveReport::default();
        if !self.tree.contains(vote.target) {
            self.orphan_votes.entry(vote.target).or_default().push(vote);
            report.pending += 1;
            return report;
        }
        if !is_valid_vote(&self.tree, schedule, &vote) {
            log::debug!("{} drops invalid vote {:?}", self.owner, vote);
            report.invalid += 1;
            return report;
        }
        match record_vote(&mut self.store, &mut self.lmd, &self.tree, vote, self.mode) {
            Recorded::Counted => report.votes_counted += 1,
            Recorded::Ignored => report.ignored += 1,
        }
        report
    }

    /// Boost in effect while evaluating fork choice during `slot`.
    pub fn boost_at(&self, slot: Slot, weight: u64) -> BoostState {
        match self.proposals.get(&slot) {
            Some(&b) if weight > 0 => BoostState::new(b, weight, slot),
            _ => BoostState::none(),
        }
    }

    pub fn head(&self, boost: &BoostState, tiebreak: &TieBreaker) -> BlockId {
        ghost_head(
            &self.tree,
            &self.store,
            &self.lmd,
            self.mode,
            boost,
            tiebreak,
        )
    }

    /// Subtree weights (no boost) indexed like [`Self::tree`].
    pub fn weights(&self) -> Vec<u64> {
        compute_weights(&self.tree, self.mode, &self.store, &self.lmd)
    }

    pub fn subtree_weight(&self, root: BlockId, boost: &BoostState) -> Result<u64, ChainError> {
        crate::forkchoice::subtree_weight(
            &self.tree,
            root,
            &self.store,
            &self.lmd,
            self.mode,
            boost,
        )
    }

    /// Proposal for `slot` on top of the unboosted head. The caller delivers it
    /// back to this view and to the network.
    pub fn on_propose(
        &self,
        slot: Slot,
        schedule: &SlotSchedule,
        tiebreak: &TieBreaker,
    ) -> Result<Block, HonestError> {
        if schedule.proposer(slot) != Some(self.owner) {
            return Err(HonestError::NotProposer {
                owner: self.owner,
                slot,
            });
        }
        let parent = self.head(&BoostState::none(), tiebreak);
        Ok(Block::new(slot, self.owner, parent, 0, Vec::new()))
    }

    /// Vote for the head under this slot's boost.
    pub fn on_vote(
        &self,
        slot: Slot,
        schedule: &SlotSchedule,
        boost_weight: u64,
        tiebreak: &TieBreaker,
    ) -> Result<Vote, HonestError> {
        if !schedule.is_committee_member(slot, self.owner) {
            return Err(HonestError::NotCommitteeMember {
                owner: self.owner,
                slot,
            });
        }
        let boost = self.boost_at(slot, boost_weight);
        Ok(Vote::new(self.owner, slot, self.head(&boost, tiebreak)))
    }
}
