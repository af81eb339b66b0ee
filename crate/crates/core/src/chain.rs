//! Blocks, votes and the block tree.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lottery::SlotSchedule;

pub type Slot = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValidatorId(pub u32);

impl ValidatorId {
    /// Proposer recorded on the genesis block. Never a real validator.
    pub const GENESIS: ValidatorId = ValidatorId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::GENESIS {
            f.write_str("genesis")
        } else {
            write!(f, "v{}", self.0)
        }
    }
}

/// Content hash of `(slot, proposer, parent, disambiguator)`, truncated to 64 bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u64);

impl BlockId {
    pub fn derive(
        slot: Slot,
        proposer: ValidatorId,
        parent: Option<BlockId>,
        disambiguator: u32,
    ) -> Self {
        let mut h = Sha256::new();
        h.update(b"ghostsim-block-v1");
        h.update(slot.to_le_bytes());
        h.update(proposer.0.to_le_bytes());
        match parent {
            Some(p) => {
                h.update([1u8]);
                h.update(p.0.to_le_bytes());
            }
            None => h.update([0u8]),
        }
        h.update(disambiguator.to_le_bytes());
        let digest = h.finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        BlockId(u64::from_le_bytes(word))
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vote {
    pub voter: ValidatorId,
    pub slot: Slot,
    pub target: BlockId,
}

impl Vote {
    pub fn new(voter: ValidatorId, slot: Slot, target: BlockId) -> Self {
        Vote {
            voter,
            slot,
            target,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub slot: Slot,
    pub proposer: ValidatorId,
    pub parent: Option<BlockId>,
    pub disambiguator: u32,
    pub votes: Vec<Vote>,
}

impl Block {
    pub fn genesis() -> Self {
        Block {
            id: BlockId::derive(0, ValidatorId::GENESIS, None, 0),
            slot: 0,
            proposer: ValidatorId::GENESIS,
            parent: None,
            disambiguator: 0,
            votes: Vec::new(),
        }
    }

    pub fn new(
        slot: Slot,
        proposer: ValidatorId,
        parent: BlockId,
        disambiguator: u32,
        votes: Vec<Vote>,
    ) -> Self {
        Block {
            id: BlockId::derive(slot, proposer, Some(parent), disambiguator),
            slot,
            proposer,
            parent: Some(parent),
            disambiguator,
            votes,
        }
    }

    pub fn is_genesis(&self) -> bool {
        self.parent.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("unknown parent {0}")]
    UnknownParent(BlockId),
    #[error("duplicate block {0}")]
    DuplicateBlockId(BlockId),
    #[error("slot {slot} does not exceed parent slot {parent_slot}")]
    NonIncreasingSlot { parent_slot: Slot, slot: Slot },
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("second genesis block")]
    SecondGenesis,
}

/// Append-only block tree rooted at genesis.
///
/// Blocks are stored in insertion order; `children` lists keep that order too,
/// which is what the `FirstInserted` tie-breaker relies on. Indices into the
/// tree are stable for its lifetime.
#[derive(Clone, Debug)]
pub struct BlockTree {
    blocks: Vec<Block>,
    parents: Vec<usize>,
    depths: Vec<u32>,
    children: Vec<Vec<usize>>,
    index: BTreeMap<BlockId, usize>,
}

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockTree {
    pub fn new() -> Self {
        let genesis = Block::genesis();
        let mut index = BTreeMap::new();
        index.insert(genesis.id, 0);
        BlockTree {
            blocks: alloc::vec![genesis],
            parents: alloc::vec![0],
            depths: alloc::vec![0],
            children: alloc::vec![Vec::new()],
            index,
        }
    }

    pub fn genesis(&self) -> BlockId {
        self.blocks[0].id
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.index.get(&id).map(|&i| &self.blocks[i])
    }

    pub fn index_of(&self, id: BlockId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn block_at(&self, idx: usize) -> &Block {
        &self.blocks[idx]
    }

    /// Parent index; genesis is its own parent.
    pub fn parent_index(&self, idx: usize) -> usize {
        self.parents[idx]
    }

    pub fn depth(&self, idx: usize) -> u32 {
        self.depths[idx]
    }

    pub fn child_indices(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn children(&self, id: BlockId) -> impl Iterator<Item = BlockId> + '_ {
        let kids = match self.index.get(&id) {
            Some(&i) => &self.children[i][..],
            None => &[][..],
        };
        kids.iter().map(move |&c| self.blocks[c].id)
    }

    /// Blocks in insertion order, genesis first.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter()
    }

    pub fn append(&mut self, block: Block) -> Result<usize, ChainError> {
        let parent = block.parent.ok_or(ChainError::SecondGenesis)?;
        if self.index.contains_key(&block.id) {
            return Err(ChainError::DuplicateBlockId(block.id));
        }
        let p = *self
            .index
            .get(&parent)
            .ok_or(ChainError::UnknownParent(parent))?;
        let parent_slot = self.blocks[p].slot;
        if block.slot <= parent_slot {
            return Err(ChainError::NonIncreasingSlot {
                parent_slot,
                slot: block.slot,
            });
        }
        let idx = self.blocks.len();
        self.index.insert(block.id, idx);
        self.blocks.push(block);
        self.parents.push(p);
        self.depths.push(self.depths[p] + 1);
        self.children.push(Vec::new());
        self.children[p].push(idx);
        Ok(idx)
    }

    pub fn chain_of(&self, id: BlockId) -> Result<Ledger, ChainError> {
        let idx = self.index_of(id).ok_or(ChainError::UnknownBlock(id))?;
        Ok(self.chain_of_index(idx))
    }

    pub fn chain_of_index(&self, mut idx: usize) -> Ledger {
        let mut out = Vec::with_capacity(self.depths[idx] as usize + 1);
        loop {
            out.push(self.blocks[idx].id);
            if idx == 0 {
                break;
            }
            idx = self.parents[idx];
        }
        out.reverse();
        Ledger(out)
    }

    /// Index of the deepest common ancestor of two blocks.
    pub fn lca_index(&self, mut a: usize, mut b: usize) -> usize {
        while self.depths[a] > self.depths[b] {
            a = self.parents[a];
        }
        while self.depths[b] > self.depths[a] {
            b = self.parents[b];
        }
        while a != b {
            a = self.parents[a];
            b = self.parents[b];
        }
        a
    }

    /// True when `anc` is `desc` or one of its ancestors.
    pub fn is_ancestor_index(&self, anc: usize, mut desc: usize) -> bool {
        let target = self.depths[anc];
        while self.depths[desc] > target {
            desc = self.parents[desc];
        }
        desc == anc
    }

    pub fn is_ancestor(&self, anc: BlockId, desc: BlockId) -> bool {
        match (self.index_of(anc), self.index_of(desc)) {
            (Some(a), Some(d)) => self.is_ancestor_index(a, d),
            _ => false,
        }
    }
}

/// Genesis-rooted sequence of block ids.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ledger(pub Vec<BlockId>);

impl Ledger {
    pub fn blocks(&self) -> &[BlockId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tip(&self) -> Option<BlockId> {
        self.0.last().copied()
    }

    pub fn is_prefix_of(&self, other: &Ledger) -> bool {
        is_prefix(self, other)
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.0.contains(&id)
    }
}

pub fn is_prefix(a: &Ledger, b: &Ledger) -> bool {
    a.0.len() <= b.0.len() && a.0[..] == b.0[..a.0.len()]
}

/// A vote counts only if its target is known, is not from a later slot than
/// the vote, and the voter sits on the committee of the vote's slot.
pub fn is_valid_vote(tree: &BlockTree, schedule: &SlotSchedule, vote: &Vote) -> bool {
    match tree.get(vote.target) {
        Some(target) => {
            target.slot <= vote.slot && schedule.is_committee_member(vote.slot, vote.voter)
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> ValidatorId {
        ValidatorId(i)
    }

    #[test]
    fn genesis_child_is_listed() {
        let mut t = BlockTree::new();
        let g = t.genesis();
        let b1 = Block::new(1, v(0), g, 0, Vec::new());
        t.append(b1.clone()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.children(g).collect::<Vec<_>>(), alloc::vec![b1.id]);
    }

    #[test]
    fn equivocating_siblings_are_both_stored() {
        let mut t = BlockTree::new();
        let g = t.genesis();
        let left = Block::new(1, v(0), g, 0, Vec::new());
        let right = Block::new(1, v(0), g, 1, Vec::new());
        assert_ne!(left.id, right.id);
        t.append(left.clone()).unwrap();
        t.append(right.clone()).unwrap();
        assert_eq!(
            t.children(g).collect::<Vec<_>>(),
            alloc::vec![left.id, right.id]
        );
    }

    #[test]
    fn rejects_bad_appends() {
        let mut t = BlockTree::new();
        let g = t.genesis();
        let b1 = Block::new(1, v(0), g, 0, Vec::new());
        t.append(b1.clone()).unwrap();
        let same_slot = Block::new(1, v(1), b1.id, 0, Vec::new());
        assert_eq!(
            t.append(same_slot),
            Err(ChainError::NonIncreasingSlot {
                parent_slot: 1,
                slot: 1
            })
        );
        assert_eq!(
            t.append(b1.clone()),
            Err(ChainError::DuplicateBlockId(b1.id))
        );
        let stray = Block::new(5, v(1), BlockId(42), 0, Vec::new());
        assert_eq!(t.append(stray), Err(ChainError::UnknownParent(BlockId(42))));
        assert_eq!(t.append(Block::genesis()), Err(ChainError::SecondGenesis));
    }

    #[test]
    fn copies_with_different_parents_differ() {
        let g = Block::genesis().id;
        let a = Block::new(2, v(0), g, 0, Vec::new());
        let b = Block::new(3, v(0), a.id, 0, Vec::new());
        let b_copy = Block::new(3, v(0), g, 0, Vec::new());
        assert_ne!(b.id, b_copy.id);
        let mut t = BlockTree::new();
        t.append(a.clone()).unwrap();
        t.append(b.clone()).unwrap();
        t.append(b_copy.clone()).unwrap();
        assert_eq!(t.chain_of(b.id).unwrap().0, alloc::vec![g, a.id, b.id]);
        assert_eq!(t.chain_of(b_copy.id).unwrap().0, alloc::vec![g, b_copy.id]);
    }

    #[test]
    fn prefix_relation() {
        let g = Block::genesis().id;
        let a = Ledger(alloc::vec![g]);
        let b = Ledger(alloc::vec![g, BlockId(1)]);
        let c = Ledger(alloc::vec![g, BlockId(2)]);
        assert!(is_prefix(&a, &b));
        assert!(!is_prefix(&b, &a));
        assert!(!is_prefix(&b, &c) && !is_prefix(&c, &b));
        assert!(is_prefix(&b, &b));
    }

    #[test]
    fn lca_and_ancestry() {
        let mut t = BlockTree::new();
        let g = t.genesis();
        let a = Block::new(1, v(0), g, 0, Vec::new());
        let b = Block::new(2, v(0), a.id, 0, Vec::new());
        let c = Block::new(2, v(1), a.id, 0, Vec::new());
        let ia = t.append(a.clone()).unwrap();
        let ib = t.append(b.clone()).unwrap();
        let ic = t.append(c.clone()).unwrap();
        assert_eq!(t.lca_index(ib, ic), ia);
        assert_eq!(t.lca_index(ib, ib), ib);
        assert!(t.is_ancestor(g, c.id));
        assert!(t.is_ancestor(c.id, c.id));
        assert!(!t.is_ancestor(b.id, c.id));
    }
}
