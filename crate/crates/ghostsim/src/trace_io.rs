//! JSON-lines trace files.
//!
//! One object per line, tagged by `record`. The first line is the header
//! carrying `schema`; then the slot duties, the message registry, the event
//! log, per-slot snapshots and a closing `end` record. Block ids are 16-digit
//! hex strings, validators are plain indices.

use std::io::{self, Write};

use ghostsim_core::adversary::AttackOutcome;
use ghostsim_core::engine::{Event, Trace};
use ghostsim_core::network::{Audience, Payload, Side};
use ghostsim_core::{BlockId, ValidatorId};
use serde::Serialize;

use crate::config::mode_name;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
enum Record<'a> {
    Header {
        schema: u32,
        num_slots: u64,
        confirmation_depth: u64,
        mode: &'static str,
        boost_weight: u64,
        genesis: String,
        honest: Vec<u32>,
        left: Vec<u32>,
        right: Vec<u32>,
    },
    Duty {
        slot: u64,
        proposer: u32,
        adversarial: bool,
        committee: &'a [u32],
    },
    Block {
        msg: u32,
        tick: u64,
        id: String,
        slot: u64,
        proposer: u32,
        parent: String,
        disambiguator: u32,
    },
    Vote {
        msg: u32,
        tick: u64,
        voter: u32,
        slot: u64,
        target: String,
    },
    Mint {
        tick: u64,
        msg: u32,
    },
    Cast {
        tick: u64,
        msg: u32,
    },
    Withhold {
        tick: u64,
        msg: u32,
    },
    Deliver {
        tick: u64,
        msg: u32,
        to: String,
    },
    Release {
        tick: u64,
        tip: String,
        blocks: Vec<String>,
    },
    Head {
        tick: u64,
        validator: u32,
        head: String,
    },
    Ignored {
        tick: u64,
        validator: u32,
        count: u32,
    },
    Outcome {
        tick: u64,
        outcome: &'static str,
        slot: u64,
    },
    Snapshot {
        slot: u64,
        heads: Vec<String>,
        ledger_tips: Vec<String>,
    },
    End {
        outcome: Option<&'static str>,
        preference: Vec<String>,
    },
}

fn hex(id: BlockId) -> String {
    id.to_string()
}

fn hexes(ids: &[BlockId]) -> Vec<String> {
    ids.iter().map(|b| hex(*b)).collect()
}

fn ids(vs: &[ValidatorId]) -> Vec<u32> {
    vs.iter().map(|v| v.0).collect()
}

fn audience(a: Audience) -> String {
    match a {
        Audience::AllHonest => "all-honest".into(),
        Audience::Group(Side::Left) => "left".into(),
        Audience::Group(Side::Right) => "right".into(),
        Audience::Only(v) => v.0.to_string(),
    }
}

fn outcome_record(tick: u64, o: AttackOutcome) -> Record<'static> {
    Record::Outcome {
        tick,
        outcome: o.name(),
        slot: o.slot(),
    }
}

pub fn write_trace<W: Write>(trace: &Trace, mut w: W) -> io::Result<()> {
    let mut put = |r: &Record<'_>| -> io::Result<()> {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")
    };
    put(&Record::Header {
        schema: SCHEMA_VERSION,
        num_slots: trace.num_slots,
        confirmation_depth: trace.confirmation_depth,
        mode: mode_name(trace.mode),
        boost_weight: trace.boost_weight,
        genesis: hex(trace.genesis),
        honest: ids(&trace.honest),
        left: ids(trace.partition.members(Side::Left)),
        right: ids(trace.partition.members(Side::Right)),
    })?;
    for slot in 1..=trace.num_slots {
        let duty = trace.schedule.duty(slot).expect("slot inside run");
        let committee = ids(&duty.committee);
        put(&Record::Duty {
            slot,
            proposer: duty.proposer.0,
            adversarial: duty.adversarial_proposer,
            committee: &committee,
        })?;
    }
    for rec in &trace.messages {
        let (msg, tick) = (rec.id.0, rec.tick.0);
        match &rec.message.payload {
            Payload::Block(b) => put(&Record::Block {
                msg,
                tick,
                id: hex(b.id),
                slot: b.slot,
                proposer: b.proposer.0,
                parent: hex(b.parent.expect("only genesis lacks a parent")),
                disambiguator: b.disambiguator,
            })?,
            Payload::Vote(v) => put(&Record::Vote {
                msg,
                tick,
                voter: v.voter.0,
                slot: v.slot,
                target: hex(v.target),
            })?,
        }
    }
    for e in &trace.events {
        let r = match e {
            Event::Mint { tick, msg } => Record::Mint {
                tick: tick.0,
                msg: msg.0,
            },
            Event::Vote { tick, msg } => Record::Cast {
                tick: tick.0,
                msg: msg.0,
            },
            Event::Withhold { tick, msg } => Record::Withhold {
                tick: tick.0,
                msg: msg.0,
            },
            Event::Deliver {
                tick,
                msg,
                audience: a,
            } => Record::Deliver {
                tick: tick.0,
                msg: msg.0,
                to: audience(*a),
            },
            Event::Release { tick, tip, blocks } => Record::Release {
                tick: tick.0,
                tip: hex(*tip),
                blocks: hexes(blocks),
            },
            Event::Head {
                tick,
                validator,
                head,
            } => Record::Head {
                tick: tick.0,
                validator: validator.0,
                head: hex(*head),
            },
            Event::Ignored {
                tick,
                validator,
                count,
            } => Record::Ignored {
                tick: tick.0,
                validator: validator.0,
                count: *count,
            },
            Event::Outcome { tick, outcome } => outcome_record(tick.0, *outcome),
        };
        put(&r)?;
    }
    for s in &trace.snapshots {
        put(&Record::Snapshot {
            slot: s.slot,
            heads: hexes(&s.heads),
            ledger_tips: hexes(&s.ledger_tips),
        })?;
    }
    put(&Record::End {
        outcome: trace.outcome.map(|o| o.name()),
        preference: hexes(&trace.preference),
    })
}

pub fn export_trace(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}
