//! Naive reference implementations for fork choice and the latest-message
//! table, plus proptest generators for small random scenarios. Shared by the
//! core property tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ghostsim_core::chain::{Block, BlockId, BlockTree, Slot, ValidatorId, Vote};
use ghostsim_core::forkchoice::{
    ghost_head, record_vote, BoostState, ForkChoiceMode, LatestMessageTable, Preference,
    TieBreaker, VoteStore,
};
use proptest::prelude::*;

#[derive(Clone, Debug)]
pub enum TieKind {
    First,
    Lowest,
    /// Preference over block positions (0 = genesis).
    Preferred(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct Scenario {
    /// (parent position, slot gap, proposer) for blocks 1..; position 0 is genesis.
    pub blocks: Vec<(usize, u64, u32)>,
    /// (voter, extra slots after the target's slot, target position).
    pub votes: Vec<(u32, u64, usize)>,
    pub boost: Option<usize>,
    pub boost_weight: u64,
    pub tie: TieKind,
}

pub fn scenario() -> impl Strategy<Value = Scenario> {
    (1usize..12)
        .prop_flat_map(|n| {
            let blocks = (0..n)
                .map(|i| (0..=i, 1u64..3, 0u32..3))
                .collect::<Vec<_>>();
            let votes = prop::collection::vec((0u32..6, 0u64..3, 0..=n), 0..=40);
            let boost = prop::option::of(0..=n);
            let tie = prop_oneof![
                Just(TieKind::First),
                Just(TieKind::Lowest),
                Just((0..=n).collect::<Vec<_>>())
                    .prop_shuffle()
                    .prop_map(|mut v| {
                        v.truncate(v.len() / 2 + 1);
                        TieKind::Preferred(v)
                    }),
            ];
            (blocks, votes, boost, 0u64..5, tie)
        })
        .prop_map(|(blocks, votes, boost, boost_weight, tie)| Scenario {
            blocks,
            votes,
            boost,
            boost_weight,
            tie,
        })
}

pub fn mode() -> impl Strategy<Value = ForkChoiceMode> {
    prop_oneof![
        Just(ForkChoiceMode::VanillaGhost),
        Just(ForkChoiceMode::CommitteeGhost),
        Just(ForkChoiceMode::CommitteeGhostLmd),
    ]
}

pub struct Built {
    pub tree: BlockTree,
    pub ids: Vec<BlockId>,
    pub votes: Vec<Vote>,
    pub boost: BoostState,
    pub tiebreak: TieBreaker,
}

pub fn build(s: &Scenario) -> Built {
    let mut tree = BlockTree::new();
    let mut ids = vec![tree.genesis()];
    let mut slots = vec![0u64];
    for (i, &(parent, gap, proposer)) in s.blocks.iter().enumerate() {
        let slot = slots[parent] + gap;
        let b = Block::new(
            slot,
            ValidatorId(proposer),
            ids[parent],
            i as u32,
            Vec::new(),
        );
        ids.push(b.id);
        slots.push(slot);
        tree.append(b).unwrap();
    }
    let votes = s
        .votes
        .iter()
        .map(|&(voter, extra, target)| {
            Vote::new(
                ValidatorId(voter),
                slots[target].max(1) + extra,
                ids[target],
            )
        })
        .collect();
    let boost = match s.boost {
        Some(b) if b > 0 => BoostState::new(ids[b], s.boost_weight, slots[b]),
        _ => BoostState::none(),
    };
    let tiebreak = match &s.tie {
        TieKind::First => TieBreaker::FirstInserted,
        TieKind::Lowest => TieBreaker::LowestId,
        TieKind::Preferred(pos) => {
            TieBreaker::AdversarialPreference(pos.iter().map(|&p| ids[p]).collect::<Preference>())
        }
    };
    Built {
        tree,
        ids,
        votes,
        boost,
        tiebreak,
    }
}

/// Head via the production code path.
pub fn fast_head(b: &Built, mode: ForkChoiceMode) -> BlockId {
    let mut store = VoteStore::new();
    let mut table = LatestMessageTable::new();
    for v in &b.votes {
        record_vote(&mut store, &mut table, &b.tree, *v, mode);
    }
    ghost_head(&b.tree, &store, &table, mode, &b.boost, &b.tiebreak)
}

fn parent_of(tree: &BlockTree, id: BlockId) -> Option<BlockId> {
    tree.get(id).and_then(|b| b.parent)
}

fn in_subtree(tree: &BlockTree, root: BlockId, mut id: BlockId) -> bool {
    loop {
        if id == root {
            return true;
        }
        match parent_of(tree, id) {
            Some(p) => id = p,
            None => return false,
        }
    }
}

/// LMD table by direct replay: keep the first vote of the highest slot seen.
pub fn naive_lmd(votes: &[Vote]) -> BTreeMap<ValidatorId, (Slot, BlockId)> {
    let mut t: BTreeMap<ValidatorId, (Slot, BlockId)> = BTreeMap::new();
    for v in votes {
        match t.get(&v.voter) {
            Some(&(s, _)) if s >= v.slot => {}
            _ => {
                t.insert(v.voter, (v.slot, v.target));
            }
        }
    }
    t
}

/// Score of `child` recomputed from scratch, boost included.
pub fn naive_score(b: &Built, mode: ForkChoiceMode, child: BlockId) -> u64 {
    let tree = &b.tree;
    let base = match mode {
        ForkChoiceMode::VanillaGhost => tree
            .blocks()
            .filter(|x| in_subtree(tree, child, x.id))
            .count() as u64,
        ForkChoiceMode::CommitteeGhost => {
            let keys: BTreeSet<(ValidatorId, Slot)> = b
                .votes
                .iter()
                .filter(|v| in_subtree(tree, child, v.target))
                .map(|v| (v.voter, v.slot))
                .collect();
            keys.len() as u64
        }
        ForkChoiceMode::CommitteeGhostLmd => naive_lmd(&b.votes)
            .values()
            .filter(|(_, t)| in_subtree(tree, child, *t))
            .count() as u64,
    };
    let boosted = b.boost.block.is_some_and(|x| in_subtree(tree, child, x));
    base + if boosted { b.boost.weight } else { 0 }
}

fn naive_pick(b: &Built, candidates: &[BlockId]) -> BlockId {
    match &b.tiebreak {
        TieBreaker::FirstInserted => candidates[0],
        TieBreaker::LowestId => *candidates.iter().min().unwrap(),
        TieBreaker::AdversarialPreference(p) => {
            for id in p.as_slice() {
                if candidates.contains(id) {
                    return *id;
                }
            }
            candidates[0]
        }
    }
}

/// Enumerates every genesis-to-leaf path and keeps the ones where each step
/// is the greedy choice. Exactly one path must survive; its leaf is the head.
pub fn brute_head(b: &Built, mode: ForkChoiceMode) -> BlockId {
    let tree = &b.tree;
    let mut paths: Vec<Vec<BlockId>> = vec![vec![tree.genesis()]];
    let mut leaves = Vec::new();
    while let Some(p) = paths.pop() {
        let last = *p.last().unwrap();
        let kids: Vec<BlockId> = tree.children(last).collect();
        if kids.is_empty() {
            leaves.push(p);
        } else {
            for k in kids {
                let mut q = p.clone();
                q.push(k);
                paths.push(q);
            }
        }
    }
    let greedy: Vec<&Vec<BlockId>> = leaves
        .iter()
        .filter(|path| {
            path.windows(2).all(|w| {
                let kids: Vec<BlockId> = tree.children(w[0]).collect();
                let scores: Vec<u64> = kids.iter().map(|k| naive_score(b, mode, *k)).collect();
                let top = *scores.iter().max().unwrap();
                let tied: Vec<BlockId> = kids
                    .iter()
                    .zip(&scores)
                    .filter(|(_, s)| **s == top)
                    .map(|(k, _)| *k)
                    .collect();
                naive_pick(b, &tied) == w[1]
            })
        })
        .collect();
    assert_eq!(greedy.len(), 1, "greedy descent must be unique");
    *greedy[0].last().unwrap()
}

/// Checks one LMD vote sequence against the replay rule. Returns a
/// description of the first problem found.
pub fn check_lmd_sequence(votes: &[Vote]) -> Result<(), String> {
    let mut table = LatestMessageTable::new();
    for (i, v) in votes.iter().enumerate() {
        let before = table.get(v.voter);
        table.update(*v);
        let after = table.get(v.voter);
        let should_replace = before.map_or(true, |(s, _)| v.slot > s);
        let expected = if should_replace {
            Some((v.slot, v.target))
        } else {
            before
        };
        if after != expected {
            return Err(format!(
                "vote {i}: {before:?} -> {after:?}, expected {expected:?}"
            ));
        }
        if let (Some((s0, _)), Some((s1, _))) = (before, after) {
            if s1 < s0 {
                return Err(format!("vote {i}: slot went backwards"));
            }
        }
        let replay = naive_lmd(&votes[..=i]);
        let got: BTreeMap<_, _> = table.iter().map(|(v, s, t)| (v, (s, t))).collect();
        if got != replay {
            return Err(format!("prefix {i}: table differs from replay"));
        }
    }
    Ok(())
}

/// Vote sequences over few voters, slots and targets so that equal-slot
/// equivocations are common.
pub fn lmd_votes() -> impl Strategy<Value = Vec<Vote>> {
    prop::collection::vec((0u32..5, 1u64..6, 0u64..4), 0..60).prop_map(|raw| {
        raw.into_iter()
            .map(|(v, s, t)| Vote::new(ValidatorId(v), s, BlockId(t)))
            .collect()
    })
}
