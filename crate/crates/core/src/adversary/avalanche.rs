//! Withhold blocks, then keep displacing the honest chain with flat height-2
//! subtrees built from equivocating copies of the withheld blocks.

use alloc::vec::Vec;

use super::{Action, AdversaryContext, AdversaryError, AttackOutcome, AttackStrategy};
use crate::chain::{Block, BlockId, Slot, ValidatorId, Vote};
use crate::forkchoice::ForkChoiceMode;
use crate::network::Message;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AvalancheParams {
    /// Leading slots handed to the adversary before honest slots begin.
    pub initial_withheld: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AvalanchePhase {
    /// Collecting blocks before the first release.
    Accumulating,
    /// Between releases.
    Waiting,
    Done(AttackOutcome),
}

/// An adversarial committee vote held for the next release.
#[derive(Clone, Copy, Debug)]
struct Banked {
    voter: ValidatorId,
    slot: Slot,
    /// Last message minted for this (voter, slot).
    minted: Option<Vote>,
}

#[derive(Clone, Debug)]
pub struct AvalancheState {
    params: AvalancheParams,
    pool: Vec<Block>,
    tip: Option<BlockId>,
    fork_point: Option<BlockId>,
    phase: AvalanchePhase,
    banked: Vec<Banked>,
    next_disambiguator: u32,
    releases: u32,
}

/// Rebuilds `pool` as a height-2 subtree on `tip`: the first block extends
/// `tip`, the rest become its children. Blocks already in place are reused;
/// the others are re-minted as equivocating copies with fresh disambiguators.
pub fn build_displacement_subtree(
    pool: &[Block],
    tip: BlockId,
    next_disambiguator: &mut u32,
) -> Result<Vec<Block>, AdversaryError> {
    if pool.len() < 2 {
        return Err(AdversaryError::PoolTooSmall(pool.len()));
    }
    let mut copy = |b: &Block, parent: BlockId| {
        if b.parent == Some(parent) {
            b.clone()
        } else {
            let d = *next_disambiguator;
            *next_disambiguator += 1;
            Block::new(b.slot, b.proposer, parent, d, b.votes.clone())
        }
    };
    let first = copy(&pool[0], tip);
    let mut out = Vec::with_capacity(pool.len());
    let first_id = first.id;
    out.push(first);
    for b in &pool[1..] {
        out.push(copy(b, first_id));
    }
    Ok(out)
}

impl AvalancheState {
    pub fn new(params: AvalancheParams) -> Self {
        AvalancheState {
            params,
            pool: Vec::new(),
            tip: None,
            fork_point: None,
            phase: AvalanchePhase::Accumulating,
            banked: Vec::new(),
            next_disambiguator: 0,
            releases: 0,
        }
    }

    pub fn params(&self) -> AvalancheParams {
        self.params
    }

    pub fn pool(&self) -> &[Block] {
        &self.pool
    }

    pub fn tip(&self) -> Option<BlockId> {
        self.tip
    }

    pub fn fork_point(&self) -> Option<BlockId> {
        self.fork_point
    }

    pub fn phase(&self) -> AvalanchePhase {
        self.phase
    }

    pub fn releases(&self) -> u32 {
        self.releases
    }

    fn vote_weighted(mode: ForkChoiceMode) -> bool {
        mode != ForkChoiceMode::VanillaGhost
    }

    fn fresh(&mut self) -> u32 {
        let d = self.next_disambiguator;
        self.next_disambiguator += 1;
        d
    }

    /// Heaviest honest subtree hanging off the tip, in the global view.
    fn honest_weight(&self, ctx: &AdversaryContext<'_>) -> u64 {
        let tree = ctx.global.tree();
        let Some(tip) = self.tip.and_then(|t| tree.index_of(t)) else {
            return 0;
        };
        let weights = ctx.global.weights();
        tree.child_indices(tip)
            .iter()
            .filter(|&&c| !ctx.schedule.is_adversarial(tree.block_at(c).proposer))
            .map(|&c| weights[c])
            .max()
            .unwrap_or(0)
    }

    fn has_honest_child(&self, ctx: &AdversaryContext<'_>) -> bool {
        let tree = ctx.global.tree();
        self.tip.and_then(|t| tree.index_of(t)).is_some_and(|t| {
            tree.child_indices(t)
                .iter()
                .any(|&c| !ctx.schedule.is_adversarial(tree.block_at(c).proposer))
        })
    }

    fn pool_weight(&self, mode: ForkChoiceMode) -> u64 {
        if !Self::vote_weighted(mode) {
            return self.pool.len() as u64;
        }
        match self.pool.first() {
            Some(b1) => self.banked.iter().filter(|k| k.slot >= b1.slot).count() as u64,
            None => 0,
        }
    }

    /// (honest, adversarial) weight added by the next event that changes
    /// either side, or `None` past the end of the run.
    fn next_increment(&self, ctx: &AdversaryContext<'_>) -> Option<(u64, u64)> {
        let slot = ctx.slot();
        if Self::vote_weighted(ctx.mode) {
            let s = if ctx.tick.is_proposal() {
                slot
            } else {
                slot + 1
            };
            if s > ctx.num_slots {
                return None;
            }
            let committee = ctx.schedule.committee(s);
            let adv = committee
                .iter()
                .filter(|v| ctx.schedule.is_adversarial(**v))
                .count() as u64;
            let adv = if self.pool.is_empty() { 0 } else { adv };
            // Honest votes only feed H once an honest block hangs off the tip.
            let honest_target = self.has_honest_child(ctx) || !ctx.schedule.is_adversarial_slot(s);
            let hon = if honest_target {
                committee.len() as u64 - adv
            } else {
                0
            };
            Some((hon, adv))
        } else {
            let s = slot + 1;
            if s > ctx.num_slots {
                return None;
            }
            if ctx.schedule.is_adversarial_slot(s) {
                Some((0, 1))
            } else {
                Some((1, 0))
            }
        }
    }

    fn finish(&mut self, outcome: AttackOutcome, out: &mut Vec<Action>) {
        self.phase = AvalanchePhase::Done(outcome);
        out.push(Action::Finished(outcome));
    }

    fn release(&mut self, tip: BlockId, out: &mut Vec<Action>) {
        let mut d = self.next_disambiguator;
        let subtree =
            build_displacement_subtree(&self.pool, tip, &mut d).expect("pool checked by caller");
        self.next_disambiguator = d;
        for b in &subtree {
            out.push(Action::Broadcast(Message::block(b.clone())));
        }
        let b1 = &subtree[0];
        for k in self.banked.iter_mut().filter(|k| k.slot >= b1.slot) {
            let vote = Vote::new(k.voter, k.slot, b1.id);
            k.minted = Some(vote);
            out.push(Action::Broadcast(Message::vote(vote)));
        }
        let ids: Vec<BlockId> = subtree.iter().map(|b| b.id).collect();
        out.push(Action::Prefer(ids.clone()));
        out.push(Action::Released { tip, blocks: ids });
        self.tip = Some(subtree[1].id);
        self.pool = subtree[2..].to_vec();
        match self.pool.first() {
            Some(next) => {
                let s = next.slot;
                self.banked.retain(|k| k.slot >= s);
            }
            None => self.banked.clear(),
        }
        self.releases += 1;
        self.phase = AvalanchePhase::Waiting;
    }
}

impl AttackStrategy for AvalancheState {
    fn on_tick(&mut self, ctx: &AdversaryContext<'_>) -> Vec<Action> {
        let mut out = Vec::new();
        if matches!(self.phase, AvalanchePhase::Done(_)) {
            return out;
        }
        let slot = ctx.slot();
        if ctx.tick.is_proposal() {
            if let Some(duty) = ctx.schedule.duty(slot).filter(|d| d.adversarial_proposer) {
                if self.tip.is_none() {
                    let head = ctx
                        .global
                        .head(&crate::forkchoice::BoostState::none(), ctx.tiebreak);
                    self.tip = Some(head);
                    self.fork_point = Some(head);
                }
                let parent = self
                    .pool
                    .first()
                    .map(|b| b.id)
                    .or(self.tip)
                    .expect("tip set above");
                let d = self.fresh();
                let block = Block::new(slot, duty.proposer, parent, d, Vec::new());
                out.push(Action::Withhold(Message::block(block.clone())));
                self.pool.push(block);
            }
        } else if Self::vote_weighted(ctx.mode) {
            if let Some(target) = self.pool.first().map(|b| b.id) {
                for &v in ctx.schedule.committee(slot) {
                    if ctx.schedule.is_adversarial(v) {
                        let vote = Vote::new(v, slot, target);
                        self.banked.push(Banked {
                            voter: v,
                            slot,
                            minted: Some(vote),
                        });
                        out.push(Action::Withhold(Message::vote(vote)));
                    }
                }
            }
        }
        let Some(tip) = self.tip else {
            return out;
        };
        let h = self.honest_weight(ctx);
        let p = self.pool_weight(ctx.mode);
        if h > p {
            self.finish(AttackOutcome::Overtaken { slot }, &mut out);
            return out;
        }
        // Past the last slot nothing can overtake any more; a final release
        // still lands if there is something to release.
        let overtakes = match self.next_increment(ctx) {
            Some((dh, dp)) => h + dh > p + dp,
            None => self.pool.len() >= 2,
        };
        if overtakes {
            if self.pool.len() >= 2 {
                self.release(tip, &mut out);
            } else {
                self.finish(AttackOutcome::Exhausted { slot }, &mut out);
            }
        }
        out
    }

    fn outcome(&self) -> Option<AttackOutcome> {
        match self.phase {
            AvalanchePhase::Done(o) => Some(o),
            _ => None,
        }
    }
}
