//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use ghostsim::{export_dot, export_trace, presets, simulate, summarize, RunFile, Viewpoint};
use ghostsim_core::engine::{
    detect_liveness_stall, detect_safety_violation, detect_safety_violation_at, ledger_tips,
    Simulation, Trace,
};
use ghostsim_core::forkchoice::BoostState;
use ghostsim_core::lottery::{Fraction, LotteryConfig};
use ghostsim_core::network::{Side, Tick};
use ghostsim_core::{BlockId, ForkChoiceMode, SimConfig};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// Reference seeds for the sampled avalanche presets.
const POS_SEED: u64 = 0;
const COMMITTEE_SEED: u64 = 0;
const STALL_WINDOW: u64 = 20;

struct Check {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Check {
    Check {
        ok,
        detail: detail.into(),
    }
}

fn preset(name: &str) -> RunFile {
    presets::get(name).expect("known preset")
}

fn final_chain_slots(trace: &Trace) -> Vec<Vec<u64>> {
    let index = trace.block_index();
    trace
        .snapshots
        .last()
        .unwrap()
        .heads
        .iter()
        .map(|h| {
            index
                .chain(*h)
                .iter()
                .map(|b| index.get(*b).unwrap().slot)
                .collect()
        })
        .collect()
}

fn criterion_1() -> Check {
    let trace = simulate(&preset("avalanche-fig1-4")).unwrap();
    let s = summarize(&trace, STALL_WINDOW);
    let chains = final_chain_slots(&trace);
    let spine = chains.iter().all(|c| c == &[0, 1, 2, 3, 4, 5, 6]);
    let index = trace.block_index();
    let red = trace.snapshots.last().unwrap().heads.iter().all(|h| {
        index
            .chain(*h)
            .iter()
            .skip(1)
            .all(|b| !index.get(*b).unwrap().honest)
    });
    check(
        spine && red && s.displaced == 12 && s.releases == 3 && s.honest_permanent == 0,
        format!(
            "chain {:?}, displaced {}, releases {}, permanent {}",
            chains[0], s.displaced, s.releases, s.honest_permanent
        ),
    )
}

fn criterion_2() -> Check {
    let mut got = Vec::new();
    let mut ok = true;
    for k in [2u64, 4, 6, 8, 10] {
        // Release recursion: k, k - 2, ..., 2 honest blocks displaced per release.
        let mut expected = 0;
        let mut pool = k;
        while pool >= 2 {
            expected += pool;
            pool -= 2;
        }
        let mut rf = preset("avalanche-fig1-4");
        let last = k + expected + 3;
        rf.run_mut().num_slots = Some(last);
        let lot = rf.lottery_mut();
        lot.proposers.clear();
        lot.proposers.insert(
            format!("1-{k}"),
            ghostsim::config::ProposerValue::Kind("adversarial".into()),
        );
        lot.proposers.insert(
            format!("{}-{last}", k + 1),
            ghostsim::config::ProposerValue::Kind("honest".into()),
        );
        rf.attack.as_mut().unwrap().initial_withheld = Some(k as u32);
        let d = summarize(&simulate(&rf).unwrap(), STALL_WINDOW).displaced as u64;
        ok &= d == expected && d == k * (k + 2) / 4;
        got.push(format!("k={k}:{d}/{expected}"));
    }
    check(ok, got.join(" "))
}

/// Honest blocks from slots `1..=50` in any final head chain.
fn early_honest_canonical(trace: &Trace) -> usize {
    let index = trace.block_index();
    let mut set = BTreeSet::new();
    for h in &trace.snapshots.last().unwrap().heads {
        for b in index.chain(*h) {
            let m = index.get(b).unwrap();
            if m.honest && (1..=50).contains(&m.slot) {
                set.insert(b);
            }
        }
    }
    set.len()
}

fn sustained_avalanche(name: &str, seed: u64) -> (bool, String) {
    let mut rf = preset(name);
    rf.lottery_mut().seed = Some(seed);
    let trace = simulate(&rf).unwrap();
    let stalls = detect_liveness_stall(&trace, STALL_WINDOW);
    let early = early_honest_canonical(&trace);
    let ok = trace.outcome.is_none() && !stalls.is_empty() && early == 0;
    let stalls: Vec<String> = stalls
        .iter()
        .map(|s| format!("{}-{}", s.first, s.last))
        .collect();
    (
        ok,
        format!(
            "seed {seed}: releases {}, stalls [{}], early honest canonical {early}",
            trace.releases(),
            stalls.join(",")
        ),
    )
}

fn criterion_3() -> Check {
    let (reference, detail) = sustained_avalanche("avalanche-pos-ghost", POS_SEED);
    let mut sustained = 0;
    for seed in 0..100 {
        let mut rf = preset("avalanche-pos-ghost");
        rf.lottery_mut().seed = Some(seed);
        if simulate(&rf).unwrap().outcome.is_none() {
            sustained += 1;
        }
    }
    check(
        reference && sustained > 0,
        format!("{detail}; sustained to slot 100 in {sustained}/100 seeds"),
    )
}

fn criterion_4() -> Check {
    let (ok, detail) = sustained_avalanche("avalanche-committee-ghost", COMMITTEE_SEED);
    check(ok, detail)
}

fn side_weights(
    sim: &Simulation,
    side: Side,
    roots: (BlockId, BlockId),
    boost: Option<(u64, u64)>,
) -> BTreeSet<(u64, u64)> {
    sim.side_members(side)
        .map(|v| {
            let view = sim.view(v).unwrap();
            let b = boost.map_or(BoostState::none(), |(slot, w)| view.boost_at(slot, w));
            (
                view.subtree_weight(roots.0, &b).unwrap(),
                view.subtree_weight(roots.1, &b).unwrap(),
            )
        })
        .collect()
}

fn criterion_5() -> Check {
    let rf = preset("balancing-fig-sequence");
    let cfg = rf.to_config().unwrap();
    let mut sim = Simulation::new(cfg.clone()).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    let mut expect = |name: &str, cond: bool, parts: &mut Vec<String>| {
        ok &= cond;
        parts.push(format!("{name} {}", if cond { "ok" } else { "FAILED" }));
    };

    let p6 = sim.schedule().proposer(6).unwrap();
    expect(
        "slot-6 proposer on Left",
        sim.partition().side_of(p6) == Some(Side::Left),
        &mut parts,
    );
    let honest6: Vec<_> = sim
        .schedule()
        .committee(6)
        .iter()
        .filter(|v| !sim.schedule().is_adversarial(**v))
        .collect();
    let on_left = honest6
        .iter()
        .filter(|v| sim.partition().side_of(***v) == Some(Side::Left))
        .count();
    expect(
        "slot-6 honest committee 40/40",
        on_left == 40 && honest6.len() == 80,
        &mut parts,
    );

    sim.run_until(Tick(11));
    sim.deliver_due();
    let tree = sim.global().tree();
    let kids: Vec<_> = tree
        .children(tree.genesis())
        .map(|id| tree.get(id).unwrap().clone())
        .collect();
    let left = kids.iter().find(|b| b.disambiguator == 0).map(|b| b.id);
    let right = kids.iter().find(|b| b.disambiguator == 1).map(|b| b.id);
    let Some(roots) = left.zip(right) else {
        return check(false, "no Left/Right fork after setup");
    };
    let w = |a: u64, b: u64| BTreeSet::from([(a, b)]);
    expect(
        "80:0/0:80",
        side_weights(&sim, Side::Left, roots, None) == w(80, 0)
            && side_weights(&sim, Side::Right, roots, None) == w(0, 80),
        &mut parts,
    );

    sim.run_until(Tick(12));
    sim.deliver_due();
    let boost = Some((6, cfg.boost_weight));
    expect(
        "150 vs 0 / 70 vs 80",
        side_weights(&sim, Side::Left, roots, boost) == w(150, 0)
            && side_weights(&sim, Side::Right, roots, boost) == w(70, 80),
        &mut parts,
    );

    sim.run_until(Tick(13));
    sim.deliver_due();
    expect(
        "120:40/40:120",
        side_weights(&sim, Side::Left, roots, None) == w(120, 40)
            && side_weights(&sim, Side::Right, roots, None) == w(40, 120),
        &mut parts,
    );

    let trace = sim.run();
    let index = trace.block_index();
    let persists = trace.num_slots >= 56
        && trace.outcome.is_none()
        && trace.snapshots.iter().filter(|s| s.slot >= 6).all(|s| {
            s.heads.iter().enumerate().all(|(pos, h)| {
                let root = match trace.partition.side_of(trace.honest[pos]) {
                    Some(Side::Left) => roots.0,
                    _ => roots.1,
                };
                index.is_ancestor(root, *h)
            })
        });
    expect("balance holds slots 6-56", persists, &mut parts);

    let mut confirmed = Vec::new();
    for tconf in [1, 2, 4] {
        let longest = ledger_tips(&trace, &index, tconf)
            .iter()
            .flatten()
            .map(|t| index.get(*t).unwrap().depth)
            .max()
            .unwrap_or(0);
        confirmed.push(format!("Tconf={tconf}:{longest}"));
        expect(
            &format!("ledger genesis-only at Tconf {tconf}"),
            longest == 0,
            &mut parts,
        );
    }
    expect(
        "stall",
        !detect_liveness_stall(&trace, STALL_WINDOW).is_empty(),
        &mut parts,
    );
    let witnesses = detect_safety_violation(&trace).len();
    expect(
        &format!("no safety witness ({witnesses} found)"),
        witnesses == 0,
        &mut parts,
    );
    parts.push(format!("longest confirmed ledger {}", confirmed.join(" ")));
    check(ok, parts.join("; "))
}

fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn criterion_6() -> Check {
    let mut runner = runner();
    let strategy = oracle::scenario();
    let mut mismatches = 0;
    let mut checked = 0;
    for _ in 0..1000 {
        let s = strategy.new_tree(&mut runner).unwrap().current();
        let b = oracle::build(&s);
        for mode in [
            ForkChoiceMode::VanillaGhost,
            ForkChoiceMode::CommitteeGhost,
            ForkChoiceMode::CommitteeGhostLmd,
        ] {
            checked += 1;
            if oracle::fast_head(&b, mode) != oracle::brute_head(&b, mode) {
                mismatches += 1;
            }
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches in {checked} (tree, mode) pairs"),
    )
}

fn criterion_7() -> Check {
    let mut runner = runner();
    let strategy = oracle::lmd_votes();
    let mut failures = Vec::new();
    let mut equivocating = 0;
    for i in 0..1000 {
        let votes = strategy.new_tree(&mut runner).unwrap().current();
        let keys: BTreeSet<_> = votes.iter().map(|v| (v.voter, v.slot)).collect();
        let pairs: BTreeSet<_> = votes.iter().map(|v| (v.voter, v.slot, v.target)).collect();
        if pairs.len() > keys.len() {
            equivocating += 1;
        }
        if let Err(e) = oracle::check_lmd_sequence(&votes) {
            failures.push(format!("#{i}: {e}"));
        }
    }
    check(
        failures.is_empty() && equivocating > 0,
        format!(
            "{} failing of 1000 sequences, {equivocating} with equivocations {}",
            failures.len(),
            failures.first().map_or("", |s| s)
        ),
    )
}

fn criterion_8() -> Check {
    let mut runs = 0;
    let mut witnesses = 0;
    let mut stalls = 0;
    for mode in [
        ForkChoiceMode::VanillaGhost,
        ForkChoiceMode::CommitteeGhost,
        ForkChoiceMode::CommitteeGhostLmd,
    ] {
        for seed in 0..20 {
            let mut cfg = SimConfig::new(LotteryConfig::new(16, 8, Fraction::ZERO, seed), mode, 50);
            if mode == ForkChoiceMode::CommitteeGhostLmd {
                cfg.boost_weight = 3;
            }
            for tconf in 1..=5 {
                cfg.confirmation_depth = tconf;
                let trace = Simulation::new(cfg.clone()).unwrap().run();
                runs += 1;
                witnesses += detect_safety_violation_at(&trace, tconf).len();
                stalls += detect_liveness_stall(&trace, 1).len();
            }
        }
    }
    check(
        witnesses == 0 && stalls == 0,
        format!("{runs} runs, {witnesses} safety witnesses, {stalls} stalls (window 1)"),
    )
}

fn criterion_9() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in presets::NAMES {
        let rf = preset(name);
        let a = simulate(&rf).unwrap();
        let b = simulate(&rf).unwrap();
        let same_trace = export_trace(&a) == export_trace(&b);
        let mut same_dot = true;
        if name == "avalanche-fig1-4" || name == "balancing-fig-sequence" {
            let viewers = [
                Viewpoint::Global,
                Viewpoint::Validator(a.honest[0]),
                Viewpoint::Validator(*a.honest.last().unwrap()),
            ];
            for t in [1, 11, 14, 25, a.last_tick().0] {
                for v in viewers {
                    same_dot &=
                        export_dot(&a, Tick(t), v).unwrap() == export_dot(&b, Tick(t), v).unwrap();
                }
            }
        }
        ok &= same_trace && same_dot;
        notes.push(format!(
            "{name}:{}",
            if same_trace && same_dot {
                "identical"
            } else {
                "DIFFERS"
            }
        ));
    }
    check(ok, notes.join(" "))
}

fn main() {
    // Name, runtime limit, check.
    type Criterion = (&'static str, Option<Duration>, fn() -> Check);
    let criteria: [Criterion; 9] = [
        (
            "avalanche worked example",
            Some(Duration::from_secs(1)),
            criterion_1,
        ),
        (
            "quadratic displacement",
            Some(Duration::from_secs(5)),
            criterion_2,
        ),
        (
            "sustained avalanche, vanilla",
            Some(Duration::from_secs(30)),
            criterion_3,
        ),
        ("sustained avalanche, committee", None, criterion_4),
        (
            "balancing sequence",
            Some(Duration::from_secs(5)),
            criterion_5,
        ),
        (
            "fork-choice oracle",
            Some(Duration::from_secs(10)),
            criterion_6,
        ),
        (
            "LMD table properties",
            Some(Duration::from_secs(5)),
            criterion_7,
        ),
        (
            "beta=0 baseline",
            Some(Duration::from_secs(10)),
            criterion_8,
        ),
        ("determinism", None, criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let c = f();
        let took = start.elapsed();
        let in_time = limit.map_or(true, |l| took <= l);
        let pass = c.ok && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map_or("no limit".to_string(), |l| {
            format!("limit {:.0}s", l.as_secs_f64())
        });
        println!(
            "criterion {}: {} {name} [{:.2}s, {budget}] {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            c.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
