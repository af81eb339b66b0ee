//! The tick loop.
//!
//! Each tick runs deliveries, then honest behaviour (proposal at even ticks,
//! votes at odd ticks), then the adversary. Slot `t` occupies ticks `2t` and
//! `2t + 1`; a run covers slots `1..=num_slots`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::adversary::{
    Action, AdversaryContext, AdversaryError, AttackOutcome, AttackStrategy, AvalancheParams,
    AvalancheState, BalancingParams, BalancingState,
};
use crate::chain::{BlockId, Slot, ValidatorId};
use crate::forkchoice::{ForkChoiceMode, Preference, TieBreaker};
use crate::honest::ValidatorView;
use crate::lottery::{
    draw_schedule, Fraction, LotteryConfig, LotteryError, ProposerOverride, SlotSchedule,
};
use crate::network::{
    AdversaryBuffer, Audience, Message, MsgId, NetworkError, NetworkQueue, Partition, Payload,
    Side, Tick,
};

mod analysis;
mod trace;

pub use analysis::{
    detect_liveness_stall, detect_safety_violation, detect_safety_violation_at, ledger_at,
    ledger_tips, LedgerRef, SafetyWitness, StallInterval,
};
pub use trace::{BlockIndex, BlockMeta, Event, MessageRecord, SlotSnapshot, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreakPolicy {
    AdversarialPreference,
    FirstInserted,
    LowestId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartitionSpec {
    Balanced,
    Jitter {
        flip: Fraction,
        seed: u64,
    },
    Explicit {
        left: Vec<ValidatorId>,
        right: Vec<ValidatorId>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttackConfig {
    None,
    Avalanche(AvalancheParams),
    Balancing(BalancingParams),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub lottery: LotteryConfig,
    pub mode: ForkChoiceMode,
    pub boost_weight: u64,
    pub num_slots: Slot,
    pub confirmation_depth: u64,
    pub attack: AttackConfig,
    pub tiebreak: TieBreakPolicy,
    pub partition: PartitionSpec,
}

impl SimConfig {
    /// Attack-free run with default confirmation depth 2 and adversarial tie-breaking.
    pub fn new(lottery: LotteryConfig, mode: ForkChoiceMode, num_slots: Slot) -> Self {
        SimConfig {
            lottery,
            mode,
            boost_weight: 0,
            num_slots,
            confirmation_depth: 2,
            attack: AttackConfig::None,
            tiebreak: TieBreakPolicy::AdversarialPreference,
            partition: PartitionSpec::Balanced,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Lottery(#[from] LotteryError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid config: {0}")]
    Invalid(&'static str),
}

pub struct Simulation {
    num_slots: Slot,
    confirmation_depth: u64,
    boost_weight: u64,
    mode: ForkChoiceMode,
    schedule: SlotSchedule,
    partition: Partition,
    honest: Vec<ValidatorId>,
    views: Vec<ValidatorView>,
    view_of: Vec<Option<usize>>,
    global: ValidatorView,
    tiebreak: TieBreaker,
    queue: NetworkQueue,
    buffer: AdversaryBuffer,
    strategy: Option<Box<dyn AttackStrategy>>,
    next_tick: Tick,
    delivered: bool,
    messages: Vec<trace::MessageRecord>,
    events: Vec<Event>,
    snapshots: Vec<SlotSnapshot>,
    outcome: Option<AttackOutcome>,
    heads: Vec<(ValidatorId, BlockId)>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        if config.num_slots == 0 {
            return Err(ConfigError::Invalid("num_slots must be at least 1"));
        }
        if config.confirmation_depth == 0 {
            return Err(ConfigError::Invalid(
                "confirmation depth must be at least 1",
            ));
        }
        let mut lottery = config.lottery.clone();
        if let AttackConfig::Avalanche(p) = &config.attack {
            for s in 1..=p.initial_withheld as Slot {
                lottery
                    .overrides
                    .proposers
                    .entry(s)
                    .or_insert(ProposerOverride::Adversarial);
            }
        }
        let schedule = draw_schedule(&lottery, config.num_slots)?;
        let partition = match &config.partition {
            PartitionSpec::Balanced => Partition::balanced(&schedule),
            PartitionSpec::Jitter { flip, seed } => Partition::jitter(&schedule, *flip, *seed),
            PartitionSpec::Explicit { left, right } => {
                Partition::from_sides(left.clone(), right.clone())?
            }
        };
        let strategy: Option<Box<dyn AttackStrategy>> = match &config.attack {
            AttackConfig::None => None,
            AttackConfig::Avalanche(p) => Some(Box::new(AvalancheState::new(*p))),
            AttackConfig::Balancing(p) => Some(Box::new(BalancingState::new(*p, &schedule)?)),
        };
        let honest: Vec<ValidatorId> = if strategy.is_some() {
            schedule.honest_validators().collect()
        } else {
            schedule.validators().collect()
        };
        let mut view_of = alloc::vec![None; schedule.num_validators() as usize];
        let mut views = Vec::with_capacity(honest.len());
        for (i, &v) in honest.iter().enumerate() {
            view_of[v.index()] = Some(i);
            views.push(ValidatorView::new(v, config.mode));
        }
        let tiebreak = match config.tiebreak {
            TieBreakPolicy::AdversarialPreference => {
                TieBreaker::AdversarialPreference(Preference::new())
            }
            TieBreakPolicy::FirstInserted => TieBreaker::FirstInserted,
            TieBreakPolicy::LowestId => TieBreaker::LowestId,
        };
        Ok(Simulation {
            num_slots: config.num_slots,
            confirmation_depth: config.confirmation_depth,
            boost_weight: config.boost_weight,
            mode: config.mode,
            schedule,
            partition,
            honest,
            views,
            view_of,
            global: ValidatorView::new(ValidatorId::GENESIS, config.mode),
            tiebreak,
            queue: NetworkQueue::new(),
            buffer: AdversaryBuffer::new(),
            strategy,
            next_tick: Tick::proposal(1),
            delivered: false,
            messages: Vec::new(),
            events: Vec::new(),
            snapshots: Vec::new(),
            outcome: None,
            heads: Vec::new(),
        })
    }

    pub fn schedule(&self) -> &SlotSchedule {
        &self.schedule
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn honest(&self) -> &[ValidatorId] {
        &self.honest
    }

    pub fn view(&self, v: ValidatorId) -> Option<&ValidatorView> {
        self.view_of
            .get(v.index())
            .copied()
            .flatten()
            .map(|i| &self.views[i])
    }

    /// The adversary's view: every message as soon as it exists.
    pub fn global(&self) -> &ValidatorView {
        &self.global
    }

    pub fn tiebreak(&self) -> &TieBreaker {
        &self.tiebreak
    }

    pub fn boost_weight(&self) -> u64 {
        self.boost_weight
    }

    /// Tick the next call to [`Self::step`] will run.
    pub fn next_tick(&self) -> Tick {
        self.next_tick
    }

    pub fn is_finished(&self) -> bool {
        self.next_tick > Tick::voting(self.num_slots)
    }

    pub fn outcome(&self) -> Option<AttackOutcome> {
        self.outcome
    }

    pub fn step(&mut self) {
        if self.is_finished() {
            return;
        }
        let tick = self.next_tick;
        self.deliver_due();
        if tick.is_proposal() {
            self.propose(tick);
        } else {
            self.vote(tick);
        }
        self.adversary(tick);
        if tick.is_voting() {
            self.snapshot(tick.slot());
        }
        self.next_tick = tick.next();
        self.delivered = false;
    }

    /// Runs only the delivery phase of the next tick, leaving the views as
    /// honest validators see them right before acting. [`Self::step`] then
    /// finishes the tick.
    pub fn deliver_due(&mut self) {
        if !self.delivered && !self.is_finished() {
            self.deliver(self.next_tick);
            self.delivered = true;
        }
    }

    /// Runs up to and including `tick`.
    pub fn run_until(&mut self, tick: Tick) {
        while !self.is_finished() && self.next_tick <= tick {
            self.step();
        }
    }

    pub fn run(mut self) -> Trace {
        while !self.is_finished() {
            self.step();
        }
        self.into_trace()
    }

    pub fn into_trace(self) -> Trace {
        let preference = match &self.tiebreak {
            TieBreaker::AdversarialPreference(p) => p.as_slice().to_vec(),
            _ => Vec::new(),
        };
        Trace {
            num_slots: self.num_slots,
            confirmation_depth: self.confirmation_depth,
            mode: self.mode,
            boost_weight: self.boost_weight,
            genesis: self.global.tree().genesis(),
            schedule: self.schedule,
            honest: self.honest,
            partition: self.partition,
            messages: self.messages,
            events: self.events,
            snapshots: self.snapshots,
            preference,
            outcome: self.outcome,
        }
    }

    fn register(&mut self, tick: Tick, message: Message) -> MsgId {
        let id = MsgId(self.messages.len() as u32);
        self.events.push(match message.payload {
            Payload::Block(_) => Event::Mint { tick, msg: id },
            Payload::Vote(_) => Event::Vote { tick, msg: id },
        });
        self.global.on_receive(&message, &self.schedule);
        self.messages
            .push(trace::MessageRecord { id, tick, message });
        id
    }

    /// Hands `id` to the origin's own view right away.
    fn deliver_to_self(&mut self, tick: Tick, id: MsgId) {
        let origin = self.messages[id.0 as usize].message.origin;
        if let Some(i) = self.view_of[origin.index()] {
            self.events.push(Event::Deliver {
                tick,
                msg: id,
                audience: Audience::Only(origin),
            });
            self.views[i].on_receive(&self.messages[id.0 as usize].message, &self.schedule);
        }
    }

    fn deliver(&mut self, tick: Tick) {
        let mut ignored: BTreeMap<usize, u32> = BTreeMap::new();
        for (id, audience) in self.queue.take_due(tick) {
            self.events.push(Event::Deliver {
                tick,
                msg: id,
                audience,
            });
            let msg = &self.messages[id.0 as usize].message;
            let mut hand = |i: usize, views: &mut Vec<ValidatorView>| {
                let r = views[i].on_receive(msg, &self.schedule);
                if r.ignored > 0 {
                    *ignored.entry(i).or_insert(0) += r.ignored;
                }
            };
            match audience {
                Audience::AllHonest => {
                    for i in 0..self.views.len() {
                        if self.honest[i] != msg.origin {
                            hand(i, &mut self.views);
                        }
                    }
                }
                Audience::Group(side) => {
                    for v in self.partition.members(side) {
                        if let Some(i) = self.view_of.get(v.index()).copied().flatten() {
                            hand(i, &mut self.views);
                        }
                    }
                }
                Audience::Only(v) => {
                    if let Some(i) = self.view_of.get(v.index()).copied().flatten() {
                        hand(i, &mut self.views);
                    }
                }
            }
        }
        for (i, count) in ignored {
            self.events.push(Event::Ignored {
                tick,
                validator: self.honest[i],
                count,
            });
        }
    }

    fn propose(&mut self, tick: Tick) {
        let slot = tick.slot();
        let Some(proposer) = self.schedule.proposer(slot) else {
            return;
        };
        let Some(i) = self.view_of[proposer.index()] else {
            return;
        };
        let block = self.views[i]
            .on_propose(slot, &self.schedule, &self.tiebreak)
            .expect("proposer checked against schedule");
        let head = block.id;
        let id = self.register(tick, Message::block(block));
        self.deliver_to_self(tick, id);
        self.events.push(Event::Head {
            tick,
            validator: proposer,
            head,
        });
        self.queue.broadcast(id, tick);
    }

    fn vote(&mut self, tick: Tick) {
        let slot = tick.slot();
        self.heads.clear();
        for view in &self.views {
            let boost = view.boost_at(slot, self.boost_weight);
            let head = view.head(&boost, &self.tiebreak);
            self.heads.push((view.owner(), head));
            self.events.push(Event::Head {
                tick,
                validator: view.owner(),
                head,
            });
        }
        let committee: Vec<ValidatorId> = self.schedule.committee(slot).to_vec();
        for v in committee {
            let Some(i) = self.view_of[v.index()] else {
                continue;
            };
            let vote = crate::chain::Vote::new(v, slot, self.heads[i].1);
            let id = self.register(tick, Message::vote(vote));
            self.deliver_to_self(tick, id);
            self.queue.broadcast(id, tick);
        }
    }

    fn snapshot(&mut self, slot: Slot) {
        let cutoff = slot.saturating_sub(self.confirmation_depth);
        let mut heads = Vec::with_capacity(self.views.len());
        let mut ledger_tips = Vec::with_capacity(self.views.len());
        for (i, view) in self.views.iter().enumerate() {
            let head = self.heads[i].1;
            let tree = view.tree();
            let mut at = tree.index_of(head).expect("head is in the view");
            while tree.block_at(at).slot > cutoff {
                at = tree.parent_index(at);
            }
            heads.push(head);
            ledger_tips.push(tree.block_at(at).id);
        }
        self.snapshots.push(SlotSnapshot {
            slot,
            heads,
            ledger_tips,
        });
    }

    fn lookup_or_register(&mut self, tick: Tick, msg: Message) -> MsgId {
        match self.buffer.take(&msg.key()) {
            Some(id) => id,
            None => self.register(tick, msg),
        }
    }

    fn adversary(&mut self, tick: Tick) {
        let Some(mut strategy) = self.strategy.take() else {
            return;
        };
        if tick.is_proposal() {
            self.heads.clear();
        }
        let actions = {
            let ctx = AdversaryContext {
                tick,
                num_slots: self.num_slots,
                schedule: &self.schedule,
                global: &self.global,
                partition: &self.partition,
                mode: self.mode,
                boost_weight: self.boost_weight,
                honest_heads: &self.heads,
                tiebreak: &self.tiebreak,
            };
            strategy.on_tick(&ctx)
        };
        for action in actions {
            match action {
                Action::Withhold(msg) => {
                    let id = self.register(tick, msg);
                    let rec = &self.messages[id.0 as usize].message;
                    match self.buffer.withhold(id, rec, &self.schedule) {
                        Ok(()) => self.events.push(Event::Withhold { tick, msg: id }),
                        Err(e) => log::warn!("strategy tried to withhold: {e}"),
                    }
                }
                Action::Broadcast(msg) => {
                    let id = self.lookup_or_register(tick, msg);
                    self.queue.broadcast(id, tick);
                }
                Action::SplitRelease(a, b) => {
                    let ia = self.lookup_or_register(tick, a);
                    let ib = self.lookup_or_register(tick, b);
                    let (ma, mb) = (
                        &self.messages[ia.0 as usize].message,
                        &self.messages[ib.0 as usize].message,
                    );
                    if let Err(e) =
                        self.queue
                            .split_release((ia, ma), (ib, mb), &self.schedule, tick)
                    {
                        log::warn!("strategy tried to split-release: {e}");
                    }
                }
                Action::Prefer(ids) => {
                    if let TieBreaker::AdversarialPreference(pref) = &mut self.tiebreak {
                        for id in ids {
                            pref.push(id);
                        }
                    }
                }
                Action::Released { tip, blocks } => {
                    self.events.push(Event::Release { tick, tip, blocks })
                }
                Action::Finished(outcome) => {
                    self.outcome = Some(outcome);
                    self.events.push(Event::Outcome { tick, outcome });
                }
            }
        }
        self.strategy = Some(strategy);
    }

    /// Honest validators on `side` of the split-delivery partition that keep views.
    pub fn side_members(&self, side: Side) -> impl Iterator<Item = ValidatorId> + '_ {
        self.partition
            .members(side)
            .iter()
            .copied()
            .filter(|v| self.view(*v).is_some())
    }
}

/// Runs `config` to completion.
pub fn run(config: SimConfig) -> Result<Trace, ConfigError> {
    Ok(Simulation::new(config)?.run())
}
