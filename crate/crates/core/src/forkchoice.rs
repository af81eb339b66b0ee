//! Subtree weights, proposer boost, latest-message tables and greedy descent.
//!
//! Weights are exact integers. [`compute_weights`] fills a per-block vector in
//! one bottom-up pass (children always have larger tree indices than their
//! parent), and [`ghost_head`] walks down from genesis.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::{BlockId, BlockTree, ChainError, Slot, ValidatorId, Vote};
use crate::lottery::SlotSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ForkChoiceMode {
    /// Every block weighs 1.
    VanillaGhost,
    /// Unique committee votes per (voter, slot).
    CommitteeGhost,
    /// Only each validator's latest vote counts.
    CommitteeGhostLmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recorded {
    /// The vote changed some subtree weight.
    Counted,
    /// Duplicate, stale or equal-slot equivocation under LMD.
    Ignored,
}

/// Committee votes keyed by (voter, slot).
///
/// A key counts at most once toward any subtree. If the adversary delivers
/// equivocating copies of one key, each copy's target is remembered and the
/// key counts once in every subtree that holds at least one of them. The
/// store keeps a per-block `delta` so that summing it over a subtree gives
/// exactly that count: a new target `t` adds +1 at `t` and -1 at the deepest
/// common ancestor of `t` with the targets already known for the key.
#[derive(Clone, Debug, Default)]
pub struct VoteStore {
    targets: BTreeMap<(ValidatorId, Slot), Vec<BlockId>>,
    delta: BTreeMap<BlockId, i64>,
    arrival: Vec<Vote>,
}

impl VoteStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// `vote.target` must already be in `tree`.
    pub fn insert(&mut self, tree: &BlockTree, vote: Vote) -> Recorded {
        let Some(t) = tree.index_of(vote.target) else {
            return Recorded::Ignored;
        };
        let known = self.targets.entry((vote.voter, vote.slot)).or_default();
        if known.contains(&vote.target) {
            return Recorded::Ignored;
        }
        let mut cut: Option<usize> = None;
        for s in known.iter() {
            let s = tree.index_of(*s).expect("stored vote target left the tree");
            let l = tree.lca_index(t, s);
            if cut.map_or(true, |c| tree.depth(l) > tree.depth(c)) {
                cut = Some(l);
            }
        }
        known.push(vote.target);
        self.arrival.push(vote);
        *self.delta.entry(vote.target).or_insert(0) += 1;
        if let Some(c) = cut {
            *self.delta.entry(tree.block_at(c).id).or_insert(0) -= 1;
        }
        Recorded::Counted
    }

    /// First target accepted for the key, if any.
    pub fn first(&self, voter: ValidatorId, slot: Slot) -> Option<BlockId> {
        self.targets
            .get(&(voter, slot))
            .and_then(|t| t.first().copied())
    }

    pub fn targets(&self, voter: ValidatorId, slot: Slot) -> &[BlockId] {
        self.targets
            .get(&(voter, slot))
            .map(|t| &t[..])
            .unwrap_or(&[])
    }

    /// Number of distinct (voter, slot) keys.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Every counted vote in arrival order.
    pub fn arrivals(&self) -> &[Vote] {
        &self.arrival
    }

    fn own_weights(&self, tree: &BlockTree, out: &mut [i64]) {
        for (id, d) in &self.delta {
            if let Some(i) = tree.index_of(*id) {
                out[i] += d;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmdUpdate {
    Inserted,
    Replaced,
    /// Not strictly later than the stored entry.
    Stale,
}

/// Latest vote per validator. An entry is replaced only by a vote from a
/// strictly later slot, so of two equal-slot equivocations the first to
/// arrive sticks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LatestMessageTable {
    entries: BTreeMap<ValidatorId, (Slot, BlockId)>,
    per_target: BTreeMap<BlockId, u64>,
}

impl LatestMessageTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, vote: Vote) -> LmdUpdate {
        match self.entries.get(&vote.voter).copied() {
            Some((slot, _)) if vote.slot <= slot => LmdUpdate::Stale,
            Some((_, old)) => {
                if let Some(c) = self.per_target.get_mut(&old) {
                    *c -= 1;
                    if *c == 0 {
                        self.per_target.remove(&old);
                    }
                }
                self.entries.insert(vote.voter, (vote.slot, vote.target));
                *self.per_target.entry(vote.target).or_insert(0) += 1;
                LmdUpdate::Replaced
            }
            None => {
                self.entries.insert(vote.voter, (vote.slot, vote.target));
                *self.per_target.entry(vote.target).or_insert(0) += 1;
                LmdUpdate::Inserted
            }
        }
    }

    pub fn get(&self, v: ValidatorId) -> Option<(Slot, BlockId)> {
        self.entries.get(&v).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ValidatorId, Slot, BlockId)> + '_ {
        self.entries.iter().map(|(v, (s, b))| (*v, *s, *b))
    }

    fn own_weights(&self, tree: &BlockTree, out: &mut [i64]) {
        for (id, c) in &self.per_target {
            if let Some(i) = tree.index_of(*id) {
                out[i] += *c as i64;
            }
        }
    }
}

/// Feeds an already validated vote to whichever structure `mode` scores with.
pub fn record_vote(
    store: &mut VoteStore,
    table: &mut LatestMessageTable,
    tree: &BlockTree,
    vote: Vote,
    mode: ForkChoiceMode,
) -> Recorded {
    match mode {
        ForkChoiceMode::CommitteeGhostLmd => match table.update(vote) {
            LmdUpdate::Stale => Recorded::Ignored,
            _ => Recorded::Counted,
        },
        ForkChoiceMode::VanillaGhost | ForkChoiceMode::CommitteeGhost => store.insert(tree, vote),
    }
}

/// Proposer boost for one slot. Callers build it for the slot being
/// evaluated, so an expired boost is simply never passed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoostState {
    pub block: Option<BlockId>,
    pub weight: u64,
    pub slot: Slot,
}

impl BoostState {
    pub fn none() -> Self {
        BoostState {
            block: None,
            weight: 0,
            slot: 0,
        }
    }

    pub fn new(block: BlockId, weight: u64, slot: Slot) -> Self {
        BoostState {
            block: Some(block),
            weight,
            slot,
        }
    }

    /// The boost as seen at `slot`: unchanged during its own slot, gone afterwards.
    pub fn at(self, slot: Slot) -> Self {
        if slot == self.slot {
            self
        } else {
            BoostState::none()
        }
    }
}

/// A proposal earns the boost in `slot` if it is from that slot and signed by
/// that slot's proposer. Increasing slots along the chain are guaranteed by
/// the tree itself.
pub fn boost_eligibility(
    tree: &BlockTree,
    schedule: &SlotSchedule,
    proposal: &crate::chain::Block,
    slot: Slot,
) -> bool {
    proposal.slot == slot
        && schedule.proposer(slot) == Some(proposal.proposer)
        && proposal
            .parent
            .and_then(|p| tree.get(p))
            .is_some_and(|parent| parent.slot < proposal.slot)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Preference {
    order: Vec<BlockId>,
    rank: BTreeMap<BlockId, usize>,
}

impl Preference {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `id` unless already listed; earlier entries win.
    pub fn push(&mut self, id: BlockId) {
        if !self.rank.contains_key(&id) {
            self.rank.insert(id, self.order.len());
            self.order.push(id);
        }
    }

    pub fn rank(&self, id: BlockId) -> Option<usize> {
        self.rank.get(&id).copied()
    }

    pub fn as_slice(&self) -> &[BlockId] {
        &self.order
    }
}

impl FromIterator<BlockId> for Preference {
    fn from_iter<I: IntoIterator<Item = BlockId>>(iter: I) -> Self {
        let mut p = Preference::new();
        for id in iter {
            p.push(id);
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TieBreaker {
    /// Lowest rank in the adversary's list wins; unlisted candidates fall
    /// back to insertion order.
    AdversarialPreference(Preference),
    FirstInserted,
    LowestId,
}

impl TieBreaker {
    /// Picks one of `candidates` (tree indices, in children order). Never
    /// called with an empty slice.
    pub fn choose(&self, tree: &BlockTree, candidates: &[usize]) -> usize {
        match self {
            TieBreaker::FirstInserted => candidates[0],
            TieBreaker::LowestId => *candidates
                .iter()
                .min_by_key(|&&c| tree.block_at(c).id)
                .unwrap(),
            TieBreaker::AdversarialPreference(pref) => candidates
                .iter()
                .filter_map(|&c| pref.rank(tree.block_at(c).id).map(|r| (r, c)))
                .min()
                .map(|(_, c)| c)
                .unwrap_or(candidates[0]),
        }
    }
}

/// Subtree weight of every block, boost excluded, indexed like the tree.
pub fn compute_weights(
    tree: &BlockTree,
    mode: ForkChoiceMode,
    store: &VoteStore,
    table: &LatestMessageTable,
) -> Vec<u64> {
    let n = tree.len();
    let mut w = vec![0i64; n];
    match mode {
        ForkChoiceMode::VanillaGhost => w.iter_mut().for_each(|x| *x = 1),
        ForkChoiceMode::CommitteeGhost => store.own_weights(tree, &mut w),
        ForkChoiceMode::CommitteeGhostLmd => table.own_weights(tree, &mut w),
    }
    for i in (1..n).rev() {
        let p = tree.parent_index(i);
        w[p] += w[i];
    }
    w.into_iter()
        .map(|x| {
            debug_assert!(x >= 0);
            x as u64
        })
        .collect()
}

/// Marks `boost.block` and its ancestors, the blocks whose score gains `Wp`.
pub fn boost_path(tree: &BlockTree, boost: &BoostState) -> Vec<bool> {
    let mut on = vec![false; tree.len()];
    if let Some(mut i) = boost.block.and_then(|b| tree.index_of(b)) {
        loop {
            on[i] = true;
            if i == 0 {
                break;
            }
            i = tree.parent_index(i);
        }
    }
    on
}

pub fn subtree_weight(
    tree: &BlockTree,
    root: BlockId,
    store: &VoteStore,
    table: &LatestMessageTable,
    mode: ForkChoiceMode,
    boost: &BoostState,
) -> Result<u64, ChainError> {
    let idx = tree.index_of(root).ok_or(ChainError::UnknownBlock(root))?;
    let weights = compute_weights(tree, mode, store, table);
    let bonus = if boost_path(tree, boost)[idx] {
        boost.weight
    } else {
        0
    };
    Ok(weights[idx] + bonus)
}

/// Greedy descent from `start` over precomputed weights.
pub fn descend(
    tree: &BlockTree,
    weights: &[u64],
    boosted: &[bool],
    boost_weight: u64,
    tiebreak: &TieBreaker,
    start: usize,
) -> usize {
    let mut cur = start;
    let mut best: Vec<usize> = Vec::new();
    loop {
        let kids = tree.child_indices(cur);
        if kids.is_empty() {
            return cur;
        }
        let score = |c: usize| weights[c] + if boosted[c] { boost_weight } else { 0 };
        let top = kids.iter().map(|&c| score(c)).max().unwrap();
        best.clear();
        best.extend(kids.iter().copied().filter(|&c| score(c) == top));
        cur = if best.len() == 1 {
            best[0]
        } else {
            tiebreak.choose(tree, &best)
        };
    }
}

pub fn ghost_head(
    tree: &BlockTree,
    store: &VoteStore,
    table: &LatestMessageTable,
    mode: ForkChoiceMode,
    boost: &BoostState,
    tiebreak: &TieBreaker,
) -> BlockId {
    let weights = compute_weights(tree, mode, store, table);
    let boosted = boost_path(tree, boost);
    let leaf = descend(tree, &weights, &boosted, boost.weight, tiebreak, 0);
    tree.block_at(leaf).id
}
