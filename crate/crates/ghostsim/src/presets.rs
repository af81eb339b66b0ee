//! Named run files for the reference scenarios.

use std::collections::BTreeMap;

use crate::config::{AttackSection, LotterySection, ProposerValue, RunFile, RunSection};

pub const NAMES: [&str; 4] = [
    "avalanche-fig1-4",
    "balancing-fig-sequence",
    "avalanche-pos-ghost",
    "avalanche-committee-ghost",
];

pub fn get(name: &str) -> Option<RunFile> {
    match name {
        "avalanche-fig1-4" => Some(avalanche_scripted()),
        "balancing-fig-sequence" => Some(balancing_sequence()),
        "avalanche-pos-ghost" => Some(avalanche_sampled("vanilla", 10, 4, "3/10", 4)),
        "avalanche-committee-ghost" => Some(avalanche_sampled("committee", 100, 100, "1/5", 12)),
        _ => None,
    }
}

fn scripted(adversarial: u64, last: u64) -> BTreeMap<String, ProposerValue> {
    BTreeMap::from([
        (
            format!("1-{adversarial}"),
            ProposerValue::Kind("adversarial".into()),
        ),
        (
            format!("{}-{last}", adversarial + 1),
            ProposerValue::Kind("honest".into()),
        ),
    ])
}

/// Six withheld blocks, then honest slots only, until three releases have
/// played out.
fn avalanche_scripted() -> RunFile {
    RunFile {
        run: Some(RunSection {
            num_slots: Some(18),
            mode: Some("vanilla".into()),
            tiebreak: Some("adversarial".into()),
            ..Default::default()
        }),
        lottery: Some(LotterySection {
            validators: Some(10),
            committee_size: Some(4),
            adversary_fraction: Some("3/10".into()),
            seed: Some(0),
            proposers: scripted(6, 18),
            ..Default::default()
        }),
        attack: Some(AttackSection {
            kind: Some("avalanche".into()),
            initial_withheld: Some(6),
            ..Default::default()
        }),
        ..Default::default()
    }
}

/// Seed 1 puts the slot-6 proposer on the Left side.
fn balancing_sequence() -> RunFile {
    RunFile {
        run: Some(RunSection {
            num_slots: Some(56),
            mode: Some("committee-lmd".into()),
            boost_weight: Some(70),
            ..Default::default()
        }),
        lottery: Some(LotterySection {
            validators: Some(500),
            committee_size: Some(100),
            adversary_fraction: Some("1/5".into()),
            seed: Some(1),
            sampling: Some("exact-fraction".into()),
            proposers: scripted(5, 56),
            ..Default::default()
        }),
        attack: Some(AttackSection {
            kind: Some("balancing".into()),
            setup: Some("strict".into()),
            drift_threshold: Some(0),
            ..Default::default()
        }),
        ..Default::default()
    }
}

fn avalanche_sampled(mode: &str, n: u32, w: u32, beta: &str, k: u32) -> RunFile {
    RunFile {
        run: Some(RunSection {
            num_slots: Some(100),
            mode: Some(mode.into()),
            ..Default::default()
        }),
        lottery: Some(LotterySection {
            validators: Some(n),
            committee_size: Some(w),
            adversary_fraction: Some(beta.into()),
            seed: Some(0),
            ..Default::default()
        }),
        attack: Some(AttackSection {
            kind: Some("avalanche".into()),
            initial_withheld: Some(k),
            ..Default::default()
        }),
        ..Default::default()
    }
}
