//! Confirmed ledgers and the safety and liveness checks over a finished trace.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::trace::{BlockIndex, Trace};
use crate::chain::{BlockId, Ledger, Slot, ValidatorId};
use crate::forkchoice::TieBreaker;
use crate::honest::ValidatorView;

/// Confirmed ledger of `view` at the voting tick of `slot`: the part of the
/// boosted fork-choice chain whose blocks are from slot `slot - tconf` or
/// earlier. Just genesis while `slot <= tconf`.
pub fn ledger_at(
    view: &ValidatorView,
    slot: Slot,
    tconf: u64,
    boost_weight: u64,
    tiebreak: &TieBreaker,
) -> Ledger {
    let head = view.head(&view.boost_at(slot, boost_weight), tiebreak);
    let cutoff = slot.saturating_sub(tconf);
    let tree = view.tree();
    let chain = tree.chain_of(head).expect("head is in the tree");
    Ledger(
        chain
            .0
            .into_iter()
            .take_while(|b| tree.get(*b).is_some_and(|b| b.slot <= cutoff))
            .collect(),
    )
}

/// Confirmed-ledger tips for every snapshot, recomputed for depth `tconf`
/// from the recorded heads. Outer index is slot - 1, inner follows
/// [`Trace::honest`].
pub fn ledger_tips(trace: &Trace, index: &BlockIndex, tconf: u64) -> Vec<Vec<BlockId>> {
    trace
        .snapshots
        .iter()
        .map(|s| {
            let cutoff = s.slot.saturating_sub(tconf);
            s.heads
                .iter()
                .map(|h| index.ancestor_at_slot(*h, cutoff))
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LedgerRef {
    pub validator: ValidatorId,
    pub slot: Slot,
    pub tip: BlockId,
}

/// Two confirmed ledgers neither of which extends the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SafetyWitness {
    pub a: LedgerRef,
    pub b: LedgerRef,
    /// First blocks where the two ledgers part ways.
    pub divergence: (BlockId, BlockId),
}

pub fn detect_safety_violation(trace: &Trace) -> Vec<SafetyWitness> {
    detect_safety_violation_at(trace, trace.confirmation_depth)
}

/// Every conflicting pair of distinct ledgers, once each, represented by the
/// first (slot, validator) that confirmed each of them.
pub fn detect_safety_violation_at(trace: &Trace, tconf: u64) -> Vec<SafetyWitness> {
    let index = trace.block_index();
    let tips = ledger_tips(trace, &index, tconf);
    let mut first_seen: BTreeMap<BlockId, LedgerRef> = BTreeMap::new();
    let mut distinct: Vec<LedgerRef> = Vec::new();
    for (snap, row) in trace.snapshots.iter().zip(&tips) {
        for (pos, tip) in row.iter().enumerate() {
            first_seen.entry(*tip).or_insert_with(|| {
                let r = LedgerRef {
                    validator: trace.honest[pos],
                    slot: snap.slot,
                    tip: *tip,
                };
                distinct.push(r);
                r
            });
        }
    }
    let mut out = Vec::new();
    for i in 0..distinct.len() {
        for j in i + 1..distinct.len() {
            let (a, b) = (distinct[i], distinct[j]);
            if index.is_ancestor(a.tip, b.tip) || index.is_ancestor(b.tip, a.tip) {
                continue;
            }
            let l = index.lca(a.tip, b.tip);
            let divergence = (index.child_towards(l, a.tip), index.child_towards(l, b.tip));
            out.push(SafetyWitness { a, b, divergence });
        }
    }
    out
}

/// Inclusive slot range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StallInterval {
    pub first: Slot,
    pub last: Slot,
}

impl StallInterval {
    pub fn len(&self) -> u64 {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maximal runs of at least `window` slots in which no honest block became
/// settled. A block settles at slot `t` when it is in every honest
/// validator's confirmed ledger at `t` and stays there until the end of the
/// run. Slots up to the confirmation depth cannot confirm anything and are
/// not counted.
pub fn detect_liveness_stall(trace: &Trace, window: u64) -> Vec<StallInterval> {
    let window = window.max(1);
    let index = trace.block_index();
    let tips = ledger_tips(trace, &index, trace.confirmation_depth);
    let common: Vec<BlockId> = tips
        .iter()
        .map(|row| {
            row.iter()
                .copied()
                .reduce(|a, b| index.lca(a, b))
                .unwrap_or(trace.genesis)
        })
        .collect();

    let mut productive = alloc::vec![false; trace.snapshots.len()];
    if let Some(&last) = common.last() {
        for b in index.chain(last) {
            if !index.get(b).is_some_and(|m| m.honest) {
                continue;
            }
            let mut settled_at = None;
            for (i, c) in common.iter().enumerate().rev() {
                if index.is_ancestor(b, *c) {
                    settled_at = Some(i);
                } else {
                    break;
                }
            }
            if let Some(i) = settled_at {
                productive[i] = true;
            }
        }
    }

    let mut out = Vec::new();
    let mut run_start: Option<Slot> = None;
    for (i, snap) in trace.snapshots.iter().enumerate() {
        let counted = snap.slot > trace.confirmation_depth;
        if counted && !productive[i] {
            run_start.get_or_insert(snap.slot);
        } else if let Some(first) = run_start.take() {
            let iv = StallInterval {
                first,
                last: snap.slot - 1,
            };
            if iv.len() >= window {
                out.push(iv);
            }
        }
    }
    if let (Some(first), Some(last)) = (run_start, trace.snapshots.last()) {
        let iv = StallInterval {
            first,
            last: last.slot,
        };
        if iv.len() >= window {
            out.push(iv);
        }
    }
    out
}
