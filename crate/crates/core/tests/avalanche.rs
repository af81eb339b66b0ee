use std::collections::BTreeSet;

use ghostsim_core::adversary::AvalancheParams;
use ghostsim_core::engine::{detect_safety_violation_at, AttackConfig, Event, Simulation, Trace};
use ghostsim_core::lottery::{Fraction, LotteryConfig, ProposerOverride};
use ghostsim_core::network::Tick;
use ghostsim_core::{BlockId, ForkChoiceMode, SimConfig};

/// `k` adversarial slots followed by honest ones, vanilla GHOST, N=10, W=4, beta=0.3.
fn scripted(k: u64, num_slots: u64) -> SimConfig {
    let mut lottery = LotteryConfig::new(10, 4, Fraction::new(3, 10).unwrap(), 0);
    for s in 1..=num_slots {
        let p = if s <= k {
            ProposerOverride::Adversarial
        } else {
            ProposerOverride::Honest
        };
        lottery.overrides.proposers.insert(s, p);
    }
    let mut cfg = SimConfig::new(lottery, ForkChoiceMode::VanillaGhost, num_slots);
    cfg.attack = AttackConfig::Avalanche(AvalancheParams {
        initial_withheld: k as u32,
    });
    cfg
}

fn slots_of_chain(trace: &Trace, head: BlockId) -> Vec<u64> {
    let index = trace.block_index();
    index
        .chain(head)
        .iter()
        .map(|b| index.get(*b).unwrap().slot)
        .collect()
}

/// Honest blocks that sat in some honest head chain but are in no final one.
fn displaced(trace: &Trace) -> usize {
    let index = trace.block_index();
    let mut ever = BTreeSet::new();
    for e in &trace.events {
        if let Event::Head { head, .. } = e {
            ever.extend(index.chain(*head));
        }
    }
    let last = trace.snapshots.last().unwrap();
    let mut fin = BTreeSet::new();
    for h in &last.heads {
        fin.extend(index.chain(*h));
    }
    ever.iter()
        .filter(|b| index.get(**b).unwrap().honest && !fin.contains(*b))
        .count()
}

#[test]
fn worked_example_ends_on_adversarial_spine() {
    let trace = Simulation::new(scripted(6, 18)).unwrap().run();
    assert_eq!(trace.releases(), 3);
    for head in &trace.snapshots.last().unwrap().heads {
        assert_eq!(slots_of_chain(&trace, *head), vec![0, 1, 2, 3, 4, 5, 6]);
    }
    assert_eq!(displaced(&trace), 12);
}

#[test]
fn first_release_ties_at_six() {
    let mut sim = Simulation::new(scripted(6, 18)).unwrap();
    // Honest slots 7..=12 build six blocks; the release goes out at slot 12's proposal tick.
    sim.run_until(Tick::voting(12));
    let v = sim.honest()[0];
    let view = sim.view(v).unwrap();
    let tree = view.tree();
    let kids: Vec<BlockId> = tree.children(tree.genesis()).collect();
    assert_eq!(kids.len(), 2);
    let weights = view.weights();
    for k in &kids {
        assert_eq!(weights[tree.index_of(*k).unwrap()], 6);
    }
}

#[test]
fn confirmed_block_is_later_evicted() {
    let mut cfg = scripted(6, 18);
    cfg.confirmation_depth = 1;
    let trace = Simulation::new(cfg).unwrap().run();
    let witnesses = detect_safety_violation_at(&trace, 1);
    assert!(!witnesses.is_empty());
    // The third honest block (slot 9) is confirmed at slot 10 ...
    let index = trace.block_index();
    let tip10 = trace.snapshot(10).unwrap().ledger_tips[0];
    assert_eq!(index.get(tip10).unwrap().slot, 9);
    assert!(index.get(tip10).unwrap().honest);
    // ... and gone from every ledger by the end.
    let last = trace.snapshots.last().unwrap();
    assert!(last
        .ledger_tips
        .iter()
        .all(|t| !index.is_ancestor(tip10, *t)));
}

#[test]
fn displacement_is_quadratic() {
    for k in [2u64, 4, 6, 8, 10] {
        let total: u64 = (1..=k / 2).map(|i| 2 * i).sum();
        let trace = Simulation::new(scripted(k, k + total + 3)).unwrap().run();
        assert_eq!(displaced(&trace) as u64, total, "k={k}");
        assert_eq!(trace.releases() as u64, k / 2, "k={k}");
    }
}
