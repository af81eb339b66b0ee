use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ghostsim_core::engine::{detect_liveness_stall, detect_safety_violation, Event, Trace};
use ghostsim_core::network::Payload;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    /// Honest blocks that were in some honest head chain but are in none of
    /// the final ones.
    pub displaced: usize,
    /// Honest blocks in every final head chain.
    pub honest_permanent: usize,
    pub releases: usize,
    /// (producer, slot) keys with more than one distinct block or vote.
    pub equivocations: usize,
    pub safety_witnesses: usize,
    /// Inclusive slot ranges without liveness.
    pub stalls: Vec<(u64, u64)>,
    /// Longest confirmed ledger (blocks after genesis) per honest validator.
    pub max_ledger_length: BTreeMap<u32, usize>,
    pub outcome: Option<&'static str>,
}

pub fn summarize(trace: &Trace, stall_window: u64) -> Summary {
    let index = trace.block_index();

    let mut ever = BTreeSet::new();
    for e in &trace.events {
        if let Event::Head { head, .. } = e {
            ever.extend(index.chain(*head));
        }
    }
    let heads = trace
        .snapshots
        .last()
        .map(|s| s.heads.as_slice())
        .unwrap_or(&[]);
    let chains: Vec<BTreeSet<_>> = heads
        .iter()
        .map(|h| index.chain(*h).into_iter().collect())
        .collect();
    let honest = |b: &_| index.get(*b).is_some_and(|m| m.honest);
    let displaced = ever
        .iter()
        .filter(|b| honest(b) && !chains.iter().any(|c| c.contains(*b)))
        .count();
    let honest_permanent = match chains.split_first() {
        Some((first, rest)) => first
            .iter()
            .filter(|b| honest(b) && rest.iter().all(|c| c.contains(*b)))
            .count(),
        None => 0,
    };

    let mut blocks: BTreeMap<_, BTreeSet<_>> = BTreeMap::new();
    let mut votes: BTreeMap<_, BTreeSet<_>> = BTreeMap::new();
    for rec in &trace.messages {
        match &rec.message.payload {
            Payload::Block(b) => {
                blocks.entry((b.proposer, b.slot)).or_default().insert(b.id);
            }
            Payload::Vote(v) => {
                votes.entry((v.voter, v.slot)).or_default().insert(v.target);
            }
        }
    }
    let equivocations = blocks.values().filter(|s| s.len() > 1).count()
        + votes.values().filter(|s| s.len() > 1).count();

    let mut max_ledger_length = BTreeMap::new();
    for s in &trace.snapshots {
        for (pos, tip) in s.ledger_tips.iter().enumerate() {
            let len = index.get(*tip).map_or(0, |m| m.depth as usize);
            let e = max_ledger_length.entry(trace.honest[pos].0).or_insert(0);
            *e = len.max(*e);
        }
    }

    Summary {
        displaced,
        honest_permanent,
        releases: trace.releases(),
        equivocations,
        safety_witnesses: detect_safety_violation(trace).len(),
        stalls: detect_liveness_stall(trace, stall_window)
            .iter()
            .map(|s| (s.first, s.last))
            .collect(),
        max_ledger_length,
        outcome: trace.outcome.map(|o| o.name()),
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "outcome            {}", self.outcome.unwrap_or("none"))?;
        writeln!(f, "releases           {}", self.releases)?;
        writeln!(f, "displaced          {}", self.displaced)?;
        writeln!(f, "honest permanent   {}", self.honest_permanent)?;
        writeln!(f, "equivocations      {}", self.equivocations)?;
        writeln!(f, "safety witnesses   {}", self.safety_witnesses)?;
        let stalls: Vec<String> = self
            .stalls
            .iter()
            .map(|(a, b)| format!("{a}-{b}"))
            .collect();
        writeln!(
            f,
            "stalls             {}",
            if stalls.is_empty() {
                "none".into()
            } else {
                stalls.join(", ")
            }
        )?;
        let longest = self.max_ledger_length.values().max().copied().unwrap_or(0);
        let shortest = self.max_ledger_length.values().min().copied().unwrap_or(0);
        write!(
            f,
            "max ledger length  {shortest}..={longest} across {} validators",
            self.max_ledger_length.len()
        )
    }
}
