//! Graphviz snapshots of a block tree as one viewpoint saw it at a tick.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use ghostsim_core::engine::{Event, Trace};
use ghostsim_core::honest::ValidatorView;
use ghostsim_core::network::{Audience, MsgId, Payload, Tick};
use ghostsim_core::ValidatorId;
use thiserror::Error;

const HONEST_FILL: &str = "#7fc97f";
const ADVERSARIAL_FILL: &str = "#f0027f";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Viewpoint {
    /// Everything that exists, withheld messages included.
    Global,
    Validator(ValidatorId),
}

impl FromStr for Viewpoint {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(Viewpoint::Global),
            _ => Ok(Viewpoint::Validator(ValidatorId(
                s.trim_start_matches('v').parse()?,
            ))),
        }
    }
}

impl std::fmt::Display for Viewpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Viewpoint::Global => f.write_str("global"),
            Viewpoint::Validator(v) => write!(f, "{}", v.0),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DotError {
    #[error("tick {tick} is outside the run (last tick {last})")]
    TickOutOfRange { tick: u64, last: u64 },
    #[error("{0} has no view in this run")]
    NoView(ValidatorId),
}

fn receives(trace: &Trace, v: ValidatorId, msg: MsgId, audience: Audience) -> bool {
    match audience {
        Audience::AllHonest => trace.message(msg).message.origin != v,
        Audience::Group(side) => trace.partition.side_of(v) == Some(side),
        Audience::Only(x) => x == v,
    }
}

/// Rebuilds the view of `viewpoint` as it stood after every delivery up to
/// and including `tick`.
pub fn replay_view(
    trace: &Trace,
    tick: Tick,
    viewpoint: Viewpoint,
) -> Result<ValidatorView, DotError> {
    let last = trace.last_tick();
    if tick > last {
        return Err(DotError::TickOutOfRange {
            tick: tick.0,
            last: last.0,
        });
    }
    match viewpoint {
        Viewpoint::Global => {
            let mut view = ValidatorView::new(ValidatorId::GENESIS, trace.mode);
            for rec in trace.messages.iter().take_while(|r| r.tick <= tick) {
                view.on_receive(&rec.message, &trace.schedule);
            }
            Ok(view)
        }
        Viewpoint::Validator(v) => {
            if !trace.is_honest(v) {
                return Err(DotError::NoView(v));
            }
            let mut view = ValidatorView::new(v, trace.mode);
            for e in &trace.events {
                if e.tick() > tick {
                    break;
                }
                if let Event::Deliver { msg, audience, .. } = e {
                    if receives(trace, v, *msg, *audience) {
                        view.on_receive(&trace.message(*msg).message, &trace.schedule);
                    }
                }
            }
            Ok(view)
        }
    }
}

/// DOT text for the tree of `viewpoint` at `tick`. Nodes appear in the order
/// the view learned of them, edges point from child to parent, labels are
/// slot numbers and `xlabel` carries the subtree weight. Blocks no honest
/// validator had received yet are dashed.
pub fn export_dot(trace: &Trace, tick: Tick, viewpoint: Viewpoint) -> Result<String, DotError> {
    let view = replay_view(trace, tick, viewpoint)?;
    let tree = view.tree();
    let weights = view.weights();

    let mut delivered = BTreeSet::new();
    for e in &trace.events {
        if e.tick() > tick {
            break;
        }
        if let Event::Deliver { msg, .. } = e {
            if let Payload::Block(b) = &trace.message(*msg).message.payload {
                delivered.insert(b.id);
            }
        }
    }

    let mut out = String::new();
    let name = match viewpoint {
        Viewpoint::Global => "global".to_string(),
        Viewpoint::Validator(v) => v.to_string(),
    };
    writeln!(out, "digraph blocktree {{").unwrap();
    writeln!(out, "  label=\"{name} view at tick {}\";", tick.0).unwrap();
    writeln!(out, "  rankdir=RL;").unwrap();
    writeln!(
        out,
        "  node [shape=box, style=filled, fontname=\"Helvetica\"];"
    )
    .unwrap();
    for (i, b) in tree.blocks().enumerate() {
        let label = if b.parent.is_none() {
            "G".to_string()
        } else {
            b.slot.to_string()
        };
        let fill = if b.parent.is_none() || trace.is_honest(b.proposer) {
            HONEST_FILL
        } else {
            ADVERSARIAL_FILL
        };
        let style = if b.parent.is_some() && !delivered.contains(&b.id) {
            "\"filled,dashed\""
        } else {
            "filled"
        };
        writeln!(
            out,
            "  b{} [label=\"{label}\", fillcolor=\"{fill}\", style={style}, xlabel=\"{}\"];",
            b.id, weights[i]
        )
        .unwrap();
    }
    for b in tree.blocks() {
        if let Some(p) = b.parent {
            writeln!(out, "  b{} -> b{};", b.id, p).unwrap();
        }
    }
    writeln!(out, "}}").unwrap();
    Ok(out)
}
