//! TOML run files.
//!
//! Every field is optional in the document so that missing required fields
//! can be reported together. Defaults: `confirmation_depth = 2`,
//! `tiebreak = "adversarial"`, `boost_weight = 0`, `seed = 0`,
//! `sampling = "random"`, attack `none`, partition `balanced`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ghostsim_core::adversary::{AvalancheParams, BalancingParams, SetupMode};
use ghostsim_core::engine::{AttackConfig, PartitionSpec, TieBreakPolicy};
use ghostsim_core::lottery::{Fraction, LotteryConfig, ProposerOverride, SamplingMode};
use ghostsim_core::{ForkChoiceMode, SimConfig, ValidatorId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CONFIRMATION_DEPTH: u64 = 2;
pub const DEFAULT_STALL_WINDOW: u64 = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required fields: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("invalid value for {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lottery: Option<LotterySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export: Option<ExportSection>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_slots: Option<u64>,
    /// `vanilla`, `committee` or `committee-lmd`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confirmation_depth: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boost_weight: Option<u64>,
    /// `adversarial`, `first-inserted` or `lowest-id`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tiebreak: Option<String>,
}

/// A proposer override value: `"adversarial"`, `"honest"` or a validator index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProposerValue {
    Validator(u32),
    Kind(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LotterySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validators: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub committee_size: Option<u32>,
    /// `"a/b"` or a decimal such as `"0.3"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adversary_fraction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `random` or `exact-fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<String>,
    /// Keys are a slot (`"7"`) or an inclusive range (`"1-6"`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub proposers: BTreeMap<String, ProposerValue>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub committees: BTreeMap<String, Vec<u32>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    /// `none`, `avalanche` or `balancing`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_withheld: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_threshold: Option<u64>,
    /// `strict` or `opportunistic`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setup: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// `balanced`, `jitter` or `explicit`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<Vec<u32>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dot_ticks: Vec<u64>,
    /// `"global"` or validator indices as strings.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dot_views: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stall_window: Option<u64>,
}

/// Where and what to write after a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportOptions {
    pub out_dir: Option<PathBuf>,
    pub trace: bool,
    pub dot_ticks: Vec<u64>,
    pub dot_views: Vec<crate::dot::Viewpoint>,
    pub stall_window: u64,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].lines().count().max(1)
            });
            ConfigError::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("run file serializes")
    }

    /// Validated simulator config with defaults applied.
    pub fn to_config(&self) -> Result<SimConfig, ConfigError> {
        let run = self.run.clone().unwrap_or_default();
        let lot = self.lottery.clone().unwrap_or_default();
        let mut missing = Vec::new();
        if run.num_slots.is_none() {
            missing.push("run.num_slots".to_string());
        }
        if run.mode.is_none() {
            missing.push("run.mode".to_string());
        }
        if lot.validators.is_none() {
            missing.push("lottery.validators".to_string());
        }
        if lot.committee_size.is_none() {
            missing.push("lottery.committee_size".to_string());
        }
        if lot.adversary_fraction.is_none() {
            missing.push("lottery.adversary_fraction".to_string());
        }
        if !missing.is_empty() {
            return Err(ConfigError::Missing(missing));
        }
        let num_slots = run.num_slots.unwrap();
        let n = lot.validators.unwrap();
        let w = lot.committee_size.unwrap();
        if num_slots == 0 {
            return Err(invalid("run.num_slots", "must be at least 1"));
        }
        if n == 0 {
            return Err(invalid("lottery.validators", "must be at least 1"));
        }
        if w == 0 || w > n {
            return Err(invalid(
                "lottery.committee_size",
                format!("must be in 1..={n}"),
            ));
        }
        let mode = parse_mode(run.mode.as_deref().unwrap())?;
        let beta = Fraction::parse(lot.adversary_fraction.as_deref().unwrap())
            .map_err(|e| invalid("lottery.adversary_fraction", e.to_string()))?;
        if !beta.is_below_one() {
            return Err(invalid("lottery.adversary_fraction", "must be below 1"));
        }

        let mut lottery = LotteryConfig::new(n, w, beta, lot.seed.unwrap_or(0));
        lottery.mode = match lot.sampling.as_deref().unwrap_or("random") {
            "random" => SamplingMode::Random,
            "exact-fraction" => SamplingMode::ExactFraction,
            other => {
                return Err(invalid(
                    "lottery.sampling",
                    format!("unknown sampling `{other}`"),
                ))
            }
        };
        for (key, value) in &lot.proposers {
            let field = format!("lottery.proposers.{key}");
            let p = match value {
                ProposerValue::Validator(v) if *v < n => {
                    ProposerOverride::Validator(ValidatorId(*v))
                }
                ProposerValue::Validator(v) => {
                    return Err(invalid(field, format!("validator {v} out of range")))
                }
                ProposerValue::Kind(k) if k == "adversarial" => ProposerOverride::Adversarial,
                ProposerValue::Kind(k) if k == "honest" => ProposerOverride::Honest,
                ProposerValue::Kind(k) => {
                    return Err(invalid(field, format!("unknown proposer `{k}`")))
                }
            };
            for slot in slot_range(key).ok_or_else(|| invalid(&field, "bad slot or range"))? {
                lottery.overrides.proposers.insert(slot, p);
            }
        }
        for (key, members) in &lot.committees {
            let field = format!("lottery.committees.{key}");
            if members.iter().any(|v| *v >= n) {
                return Err(invalid(field, "validator out of range"));
            }
            let members: Vec<ValidatorId> = members.iter().map(|v| ValidatorId(*v)).collect();
            for slot in slot_range(key).ok_or_else(|| invalid(&field, "bad slot or range"))? {
                lottery.overrides.committees.insert(slot, members.clone());
            }
        }
        lottery
            .validate()
            .map_err(|e| invalid("lottery", e.to_string()))?;

        let mut cfg = SimConfig::new(lottery, mode, num_slots);
        cfg.confirmation_depth = run.confirmation_depth.unwrap_or(DEFAULT_CONFIRMATION_DEPTH);
        cfg.boost_weight = run.boost_weight.unwrap_or(0);
        cfg.tiebreak = match run.tiebreak.as_deref().unwrap_or("adversarial") {
            "adversarial" => TieBreakPolicy::AdversarialPreference,
            "first-inserted" => TieBreakPolicy::FirstInserted,
            "lowest-id" => TieBreakPolicy::LowestId,
            other => {
                return Err(invalid(
                    "run.tiebreak",
                    format!("unknown tie-breaker `{other}`"),
                ))
            }
        };

        let attack = self.attack.clone().unwrap_or_default();
        cfg.attack = match attack.kind.as_deref().unwrap_or("none") {
            "none" => AttackConfig::None,
            "avalanche" => {
                let k = attack
                    .initial_withheld
                    .ok_or_else(|| ConfigError::Missing(vec!["attack.initial_withheld".into()]))?;
                AttackConfig::Avalanche(AvalancheParams {
                    initial_withheld: k,
                })
            }
            "balancing" => {
                let setup = match attack.setup.as_deref().unwrap_or("strict") {
                    "strict" => SetupMode::Strict,
                    "opportunistic" => SetupMode::Opportunistic,
                    other => {
                        return Err(invalid("attack.setup", format!("unknown setup `{other}`")))
                    }
                };
                AttackConfig::Balancing(BalancingParams {
                    drift_threshold: attack.drift_threshold.unwrap_or(0),
                    setup,
                })
            }
            other => return Err(invalid("attack.kind", format!("unknown attack `{other}`"))),
        };

        let net = self.network.clone().unwrap_or_default();
        cfg.partition = match net.partition.as_deref().unwrap_or("balanced") {
            "balanced" => PartitionSpec::Balanced,
            "jitter" => {
                let flip = Fraction::parse(net.flip.as_deref().unwrap_or("0"))
                    .map_err(|e| invalid("network.flip", e.to_string()))?;
                PartitionSpec::Jitter {
                    flip,
                    seed: net.partition_seed.unwrap_or(0),
                }
            }
            "explicit" => {
                let ids = |v: Option<Vec<u32>>| {
                    v.unwrap_or_default().into_iter().map(ValidatorId).collect()
                };
                PartitionSpec::Explicit {
                    left: ids(net.left),
                    right: ids(net.right),
                }
            }
            other => {
                return Err(invalid(
                    "network.partition",
                    format!("unknown partition `{other}`"),
                ))
            }
        };
        Ok(cfg)
    }

    pub fn export_options(&self) -> Result<ExportOptions, ConfigError> {
        let e = self.export.clone().unwrap_or_default();
        let dot_views = e
            .dot_views
            .iter()
            .map(|v| {
                v.parse()
                    .map_err(|_| invalid("export.dot_views", format!("bad viewpoint `{v}`")))
            })
            .collect::<Result<_, _>>()?;
        Ok(ExportOptions {
            out_dir: e.out_dir,
            trace: e.trace.unwrap_or(true),
            dot_ticks: e.dot_ticks,
            dot_views,
            stall_window: e.stall_window.unwrap_or(DEFAULT_STALL_WINDOW),
        })
    }

    pub fn run_mut(&mut self) -> &mut RunSection {
        self.run.get_or_insert_with(Default::default)
    }

    pub fn lottery_mut(&mut self) -> &mut LotterySection {
        self.lottery.get_or_insert_with(Default::default)
    }

    pub fn export_mut(&mut self) -> &mut ExportSection {
        self.export.get_or_insert_with(Default::default)
    }
}

pub fn parse_mode(s: &str) -> Result<ForkChoiceMode, ConfigError> {
    match s {
        "vanilla" => Ok(ForkChoiceMode::VanillaGhost),
        "committee" => Ok(ForkChoiceMode::CommitteeGhost),
        "committee-lmd" => Ok(ForkChoiceMode::CommitteeGhostLmd),
        other => Err(invalid("run.mode", format!("unknown mode `{other}`"))),
    }
}

pub fn mode_name(mode: ForkChoiceMode) -> &'static str {
    match mode {
        ForkChoiceMode::VanillaGhost => "vanilla",
        ForkChoiceMode::CommitteeGhost => "committee",
        ForkChoiceMode::CommitteeGhostLmd => "committee-lmd",
    }
}

/// `"7"` or `"1-6"`, slots start at 1.
fn slot_range(key: &str) -> Option<std::ops::RangeInclusive<u64>> {
    let (a, b) = match key.split_once('-') {
        Some((a, b)) => (a.trim().parse().ok()?, b.trim().parse().ok()?),
        None => {
            let s = key.trim().parse().ok()?;
            (s, s)
        }
    };
    (a >= 1 && a <= b).then_some(a..=b)
}
