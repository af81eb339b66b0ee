//! Keep honest validators split between two equal chains by delivering
//! equivocating blocks and votes to the two halves in opposite order.

use alloc::vec::Vec;

use super::{Action, AdversaryContext, AdversaryError, AttackOutcome, AttackStrategy};
use crate::chain::{Block, BlockId, Slot, Vote};
use crate::lottery::SlotSchedule;
use crate::network::{Message, Side};

/// Setup slots: four pairs of chain blocks plus the vote-carrying pair.
const SETUP_SLOTS: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetupMode {
    /// Slots `1..=5` must all be adversarial.
    Strict,
    /// Wait for the first run of five adversarial slots.
    Opportunistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BalancingParams {
    /// Honest latest-vote imbalance tolerated before the adversary rebalances.
    pub drift_threshold: u64,
    pub setup: SetupMode,
}

impl Default for BalancingParams {
    fn default() -> Self {
        BalancingParams {
            drift_threshold: 0,
            setup: SetupMode::Strict,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BalancingPhase {
    Idle,
    Setup { start: Slot },
    Maintain,
    Done(AttackOutcome),
}

#[derive(Clone, Debug)]
pub struct BalancingState {
    params: BalancingParams,
    phase: BalancingPhase,
    fork_point: Option<BlockId>,
    left: Vec<Block>,
    right: Vec<Block>,
    left_votes: Vec<Vote>,
    right_votes: Vec<Vote>,
    rebalancing_votes: u64,
}

impl BalancingState {
    pub fn new(params: BalancingParams, schedule: &SlotSchedule) -> Result<Self, AdversaryError> {
        if params.setup == SetupMode::Strict {
            if schedule.num_slots() < SETUP_SLOTS {
                return Err(AdversaryError::RunTooShort(SETUP_SLOTS));
            }
            if let Some(honest) = (1..=SETUP_SLOTS).find(|&s| !schedule.is_adversarial_slot(s)) {
                return Err(AdversaryError::SetupImpossible {
                    first: 1,
                    last: SETUP_SLOTS,
                    honest,
                });
            }
        }
        Ok(BalancingState {
            params,
            phase: BalancingPhase::Idle,
            fork_point: None,
            left: Vec::new(),
            right: Vec::new(),
            left_votes: Vec::new(),
            right_votes: Vec::new(),
            rebalancing_votes: 0,
        })
    }

    pub fn phase(&self) -> BalancingPhase {
        self.phase
    }

    /// First block of each chain once setup has started.
    pub fn roots(&self) -> Option<(BlockId, BlockId)> {
        Some((self.left.first()?.id, self.right.first()?.id))
    }

    pub fn fork_point(&self) -> Option<BlockId> {
        self.fork_point
    }

    /// Equivocating vote pairs released after setup.
    pub fn rebalancing_votes(&self) -> u64 {
        self.rebalancing_votes
    }

    fn side_of(&self, ctx: &AdversaryContext<'_>, block: BlockId) -> Option<Side> {
        let (l, r) = self.roots()?;
        let tree = ctx.global.tree();
        if tree.is_ancestor(l, block) {
            Some(Side::Left)
        } else if tree.is_ancestor(r, block) {
            Some(Side::Right)
        } else {
            None
        }
    }

    fn try_start(&mut self, ctx: &AdversaryContext<'_>, slot: Slot) {
        let fits = slot + SETUP_SLOTS - 1 <= ctx.num_slots
            && (slot..slot + SETUP_SLOTS).all(|s| ctx.schedule.is_adversarial_slot(s));
        let allowed = match self.params.setup {
            SetupMode::Strict => slot == 1,
            SetupMode::Opportunistic => true,
        };
        if fits && allowed {
            self.fork_point = Some(
                ctx.global
                    .head(&crate::forkchoice::BoostState::none(), ctx.tiebreak),
            );
            self.phase = BalancingPhase::Setup { start: slot };
        }
    }

    fn setup_proposal(&mut self, ctx: &AdversaryContext<'_>, i: u64, out: &mut Vec<Action>) {
        let slot = ctx.slot();
        let proposer = ctx.schedule.proposer(slot).expect("slot in schedule");
        let fork = self.fork_point.expect("set at start");
        let lp = self.left.last().map_or(fork, |b| b.id);
        let rp = self.right.last().map_or(fork, |b| b.id);
        let (lv, rv) = if i + 1 == SETUP_SLOTS {
            (self.left_votes.clone(), self.right_votes.clone())
        } else {
            (Vec::new(), Vec::new())
        };
        let l = Block::new(slot, proposer, lp, 0, lv);
        let r = Block::new(slot, proposer, rp, 1, rv);
        out.push(Action::Withhold(Message::block(l.clone())));
        out.push(Action::Withhold(Message::block(r.clone())));
        self.left.push(l);
        self.right.push(r);
    }

    fn setup_votes(&mut self, ctx: &AdversaryContext<'_>, out: &mut Vec<Action>) {
        let slot = ctx.slot();
        let (l, r) = (self.left.last().unwrap().id, self.right.last().unwrap().id);
        for &v in ctx.schedule.committee(slot) {
            if ctx.schedule.is_adversarial(v) {
                let lv = Vote::new(v, slot, l);
                let rv = Vote::new(v, slot, r);
                out.push(Action::Withhold(Message::vote(lv)));
                out.push(Action::Withhold(Message::vote(rv)));
                self.left_votes.push(lv);
                self.right_votes.push(rv);
            }
        }
    }

    fn launch(&mut self, out: &mut Vec<Action>) {
        let n = self.left.len();
        for i in 0..n - 1 {
            out.push(Action::Broadcast(Message::block(self.left[i].clone())));
            out.push(Action::Broadcast(Message::block(self.right[i].clone())));
        }
        out.push(Action::SplitRelease(
            Message::block(self.left[n - 1].clone()),
            Message::block(self.right[n - 1].clone()),
        ));
        self.phase = BalancingPhase::Maintain;
    }

    fn maintain(&mut self, ctx: &AdversaryContext<'_>, out: &mut Vec<Action>) {
        let slot = ctx.slot();
        let mut on_left = None;
        let mut on_right = None;
        let mut counts = [0u64; 2];
        for &(_, head) in ctx.honest_heads {
            match self.side_of(ctx, head) {
                Some(Side::Left) => {
                    counts[0] += 1;
                    on_left.get_or_insert(head);
                }
                Some(Side::Right) => {
                    counts[1] += 1;
                    on_right.get_or_insert(head);
                }
                None => {}
            }
        }
        if !ctx.honest_heads.is_empty() && (counts[0] == 0 || counts[1] == 0) {
            let boosted = ctx.boost_weight > 0
                && !ctx.schedule.is_adversarial_slot(slot)
                && ctx
                    .global
                    .boost_at(slot, ctx.boost_weight)
                    .block
                    .is_some_and(|b| {
                        let winner = if counts[0] > 0 {
                            Some(Side::Left)
                        } else if counts[1] > 0 {
                            Some(Side::Right)
                        } else {
                            None
                        };
                        winner.is_some() && self.side_of(ctx, b) == winner
                    });
            let outcome = if boosted {
                AttackOutcome::BoostOverpowered { slot }
            } else {
                AttackOutcome::Collapsed { slot }
            };
            self.phase = BalancingPhase::Done(outcome);
            out.push(Action::Finished(outcome));
            return;
        }

        // Honest latest votes per side in the adversary's view.
        let mut drift = [0u64; 2];
        for (v, _, target) in ctx.global.lmd_table().iter() {
            if ctx.schedule.is_adversarial(v) {
                continue;
            }
            match self.side_of(ctx, target) {
                Some(Side::Left) => drift[0] += 1,
                Some(Side::Right) => drift[1] += 1,
                None => {}
            }
        }
        let gap = drift[0].abs_diff(drift[1]);
        if gap <= self.params.drift_threshold {
            return;
        }
        let (Some(lt), Some(rt)) = (on_left, on_right) else {
            return;
        };
        let reserve = ctx
            .schedule
            .committee(slot)
            .iter()
            .filter(|v| ctx.schedule.is_adversarial(**v));
        for &v in reserve.take(gap as usize) {
            out.push(Action::SplitRelease(
                Message::vote(Vote::new(v, slot, lt)),
                Message::vote(Vote::new(v, slot, rt)),
            ));
            self.rebalancing_votes += 1;
        }
    }
}

impl AttackStrategy for BalancingState {
    fn on_tick(&mut self, ctx: &AdversaryContext<'_>) -> Vec<Action> {
        let mut out = Vec::new();
        let slot = ctx.slot();
        if self.phase == BalancingPhase::Idle && ctx.tick.is_proposal() {
            self.try_start(ctx, slot);
        }
        match self.phase {
            BalancingPhase::Setup { start } => {
                let i = slot - start;
                if ctx.tick.is_proposal() {
                    self.setup_proposal(ctx, i, &mut out);
                } else if i + 1 < SETUP_SLOTS {
                    self.setup_votes(ctx, &mut out);
                } else {
                    self.launch(&mut out);
                }
            }
            BalancingPhase::Maintain if ctx.tick.is_voting() => self.maintain(ctx, &mut out),
            _ => {}
        }
        out
    }

    fn outcome(&self) -> Option<AttackOutcome> {
        match self.phase {
            BalancingPhase::Done(o) => Some(o),
            _ => None,
        }
    }
}
