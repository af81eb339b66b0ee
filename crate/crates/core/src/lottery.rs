//! Per-slot proposer and committee draws.
//!
//! Randomness is ChaCha8 (`rand_chacha`), seeded with `seed_from_u64(seed)`
//! and split into independent streams with `set_stream`, one per
//! (purpose, slot). Bounded integers use Lemire's multiply-and-reject method
//! on `next_u32`, and sampling without replacement is a partial
//! Fisher-Yates shuffle. Both are implemented here so that the exact
//! sequence of draws is pinned by this crate and not by a dependency's
//! sampling internals.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::chain::{Slot, ValidatorId};

/// Exact non-negative rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self, LotteryError> {
        if den == 0 {
            return Err(LotteryError::InvalidConfig(
                "fraction with zero denominator",
            ));
        }
        let g = gcd(num, den);
        Ok(Fraction {
            num: num / g,
            den: den / g,
        })
    }

    /// Parses `"a/b"` or a plain decimal such as `"0.3"`.
    pub fn parse(s: &str) -> Result<Self, LotteryError> {
        let bad = LotteryError::InvalidConfig("malformed fraction");
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let a = a.trim().parse::<u64>().map_err(|_| bad.clone())?;
            let b = b.trim().parse::<u64>().map_err(|_| bad)?;
            return Fraction::new(a, b);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || frac.len() > 18 {
            return Err(bad);
        }
        let digits_ok = |p: &str| p.bytes().all(|c| c.is_ascii_digit());
        if !digits_ok(int) || !digits_ok(frac) {
            return Err(bad);
        }
        let den = 10u64.pow(frac.len() as u32);
        let int_v = if int.is_empty() {
            0
        } else {
            int.parse::<u64>().map_err(|_| bad.clone())?
        };
        let frac_v = if frac.is_empty() {
            0
        } else {
            frac.parse::<u64>().map_err(|_| bad.clone())?
        };
        let num = int_v
            .checked_mul(den)
            .and_then(|x| x.checked_add(frac_v))
            .ok_or(bad)?;
        Fraction::new(num, den)
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    /// `floor(self * n)`.
    pub fn floor_mul(self, n: u64) -> u64 {
        ((n as u128 * self.num as u128) / self.den as u128) as u64
    }

    pub fn is_below_one(self) -> bool {
        self.num < self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    if a == 0 {
        1
    } else {
        a
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LotteryError {
    #[error("invalid lottery config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    /// Proposer uniform over all validators, committee uniform without replacement.
    Random,
    /// Every committee holds exactly `floor(beta * W)` adversarial members.
    ExactFraction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposerOverride {
    Adversarial,
    Honest,
    Validator(ValidatorId),
}

/// Scripted parts of a schedule. Slots not mentioned are drawn normally.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScheduleOverride {
    pub proposers: BTreeMap<Slot, ProposerOverride>,
    pub committees: BTreeMap<Slot, Vec<ValidatorId>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LotteryConfig {
    pub num_validators: u32,
    pub committee_size: u32,
    pub adversary_fraction: Fraction,
    pub seed: u64,
    pub mode: SamplingMode,
    pub overrides: ScheduleOverride,
}

impl LotteryConfig {
    pub fn new(
        num_validators: u32,
        committee_size: u32,
        adversary_fraction: Fraction,
        seed: u64,
    ) -> Self {
        LotteryConfig {
            num_validators,
            committee_size,
            adversary_fraction,
            seed,
            mode: SamplingMode::Random,
            overrides: ScheduleOverride::default(),
        }
    }

    /// `floor(beta * N)`; validators `0..count` are adversarial.
    pub fn num_adversarial(&self) -> u32 {
        self.adversary_fraction
            .floor_mul(self.num_validators as u64) as u32
    }

    pub fn validate(&self) -> Result<(), LotteryError> {
        let n = self.num_validators;
        let a = self.num_adversarial();
        if n == 0 {
            return Err(LotteryError::InvalidConfig("no validators"));
        }
        if self.committee_size == 0 {
            return Err(LotteryError::InvalidConfig("empty committee"));
        }
        if self.committee_size > n {
            return Err(LotteryError::InvalidConfig(
                "committee larger than validator set",
            ));
        }
        if !self.adversary_fraction.is_below_one() {
            return Err(LotteryError::InvalidConfig(
                "adversary fraction must be below 1",
            ));
        }
        if self.mode == SamplingMode::ExactFraction {
            let adv = self
                .adversary_fraction
                .floor_mul(self.committee_size as u64) as u32;
            if adv > a || self.committee_size - adv > n - a {
                return Err(LotteryError::InvalidConfig(
                    "exact-fraction committee cannot be filled",
                ));
            }
        }
        for ov in self.overrides.proposers.values() {
            match *ov {
                ProposerOverride::Adversarial if a == 0 => {
                    return Err(LotteryError::InvalidConfig(
                        "adversarial slot without adversarial validators",
                    ))
                }
                ProposerOverride::Honest if a == n => {
                    return Err(LotteryError::InvalidConfig(
                        "honest slot without honest validators",
                    ))
                }
                ProposerOverride::Validator(v) if v.0 >= n => {
                    return Err(LotteryError::InvalidConfig(
                        "override proposer out of range",
                    ))
                }
                _ => {}
            }
        }
        for members in self.overrides.committees.values() {
            let mut sorted = members.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != members.len() || members.is_empty() {
                return Err(LotteryError::InvalidConfig(
                    "override committee empty or repeats a member",
                ));
            }
            if sorted.iter().any(|v| v.0 >= n) {
                return Err(LotteryError::InvalidConfig(
                    "override committee member out of range",
                ));
            }
        }
        Ok(())
    }
}

pub fn is_adversarial(v: ValidatorId, config: &LotteryConfig) -> bool {
    v.0 < config.num_adversarial()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotDuty {
    pub proposer: ValidatorId,
    /// Sorted by id.
    pub committee: Vec<ValidatorId>,
    pub adversarial_proposer: bool,
}

/// Duties for slots `1..=num_slots`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotSchedule {
    num_validators: u32,
    num_adversarial: u32,
    duties: Vec<SlotDuty>,
}

impl SlotSchedule {
    pub fn num_slots(&self) -> u64 {
        self.duties.len() as u64
    }

    pub fn num_validators(&self) -> u32 {
        self.num_validators
    }

    pub fn num_adversarial(&self) -> u32 {
        self.num_adversarial
    }

    pub fn duty(&self, slot: Slot) -> Option<&SlotDuty> {
        if slot == 0 {
            return None;
        }
        self.duties.get(slot as usize - 1)
    }

    pub fn proposer(&self, slot: Slot) -> Option<ValidatorId> {
        self.duty(slot).map(|d| d.proposer)
    }

    pub fn committee(&self, slot: Slot) -> &[ValidatorId] {
        self.duty(slot).map(|d| &d.committee[..]).unwrap_or(&[])
    }

    pub fn is_committee_member(&self, slot: Slot, v: ValidatorId) -> bool {
        self.committee(slot).binary_search(&v).is_ok()
    }

    pub fn is_adversarial_slot(&self, slot: Slot) -> bool {
        self.duty(slot).is_some_and(|d| d.adversarial_proposer)
    }

    pub fn is_adversarial(&self, v: ValidatorId) -> bool {
        v.0 < self.num_adversarial
    }

    pub fn validators(&self) -> impl Iterator<Item = ValidatorId> {
        (0..self.num_validators).map(ValidatorId)
    }

    pub fn honest_validators(&self) -> impl Iterator<Item = ValidatorId> {
        (self.num_adversarial..self.num_validators).map(ValidatorId)
    }

    pub fn adversarial_validators(&self) -> impl Iterator<Item = ValidatorId> {
        (0..self.num_adversarial).map(ValidatorId)
    }
}

const STREAM_PROPOSER: u64 = 1;
const STREAM_COMMITTEE: u64 = 2;
const STREAM_PERMUTATION: u64 = 3;
pub(crate) const STREAM_PARTITION: u64 = 4;

/// Independent generator for one (purpose, index) pair under `seed`.
pub(crate) fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 56) ^ index);
    rng
}

/// Uniform integer in `0..n` (Lemire's method). `n` must be positive.
pub(crate) fn below(rng: &mut impl RngCore, n: u32) -> u32 {
    debug_assert!(n > 0);
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = rng.next_u32() as u64 * n as u64;
        if (m as u32) >= threshold {
            return (m >> 32) as u32;
        }
    }
}

/// First `k` entries of a uniformly shuffled copy of `pool`.
pub(crate) fn sample<T: Copy>(rng: &mut impl RngCore, pool: &[T], k: usize) -> Vec<T> {
    let mut items = pool.to_vec();
    let k = k.min(items.len());
    for i in 0..k {
        let j = i + below(rng, (items.len() - i) as u32) as usize;
        items.swap(i, j);
    }
    items.truncate(k);
    items
}

pub fn draw_schedule(config: &LotteryConfig, num_slots: u64) -> Result<SlotSchedule, LotteryError> {
    if num_slots == 0 {
        return Err(LotteryError::InvalidConfig("no slots"));
    }
    config.validate()?;
    let n = config.num_validators;
    let a = config.num_adversarial();
    let w = config.committee_size as usize;
    let everyone: Vec<ValidatorId> = (0..n).map(ValidatorId).collect();
    let adversarial = &everyone[..a as usize];
    let honest = &everyone[a as usize..];

    // Exact-fraction committees walk through fixed shuffles of each group in
    // consecutive chunks, so neighbouring slots use disjoint members.
    let (adv_order, honest_order) = match config.mode {
        SamplingMode::ExactFraction => {
            let mut rng = stream(config.seed, STREAM_PERMUTATION, 0);
            let adv = sample(&mut rng, adversarial, adversarial.len());
            let hon = sample(&mut rng, honest, honest.len());
            (adv, hon)
        }
        SamplingMode::Random => (Vec::new(), Vec::new()),
    };
    let adv_per_slot = config.adversary_fraction.floor_mul(w as u64) as usize;

    let mut duties = Vec::with_capacity(num_slots as usize);
    for slot in 1..=num_slots {
        let mut rng = stream(config.seed, STREAM_PROPOSER, slot);
        let proposer = match config.overrides.proposers.get(&slot) {
            Some(ProposerOverride::Adversarial) => adversarial[below(&mut rng, a) as usize],
            Some(ProposerOverride::Honest) => honest[below(&mut rng, n - a) as usize],
            Some(ProposerOverride::Validator(v)) => *v,
            None => ValidatorId(below(&mut rng, n)),
        };
        let mut committee = match config.overrides.committees.get(&slot) {
            Some(members) => members.clone(),
            None => match config.mode {
                SamplingMode::Random => {
                    let mut rng = stream(config.seed, STREAM_COMMITTEE, slot);
                    sample(&mut rng, &everyone, w)
                }
                SamplingMode::ExactFraction => {
                    let mut members = Vec::with_capacity(w);
                    let t = (slot - 1) as usize;
                    let h = w - adv_per_slot;
                    for i in 0..adv_per_slot {
                        members.push(adv_order[(t * adv_per_slot + i) % adv_order.len()]);
                    }
                    for i in 0..h {
                        members.push(honest_order[(t * h + i) % honest_order.len()]);
                    }
                    members
                }
            },
        };
        committee.sort();
        duties.push(SlotDuty {
            proposer,
            committee,
            adversarial_proposer: proposer.0 < a,
        });
    }
    Ok(SlotSchedule {
        num_validators: n,
        num_adversarial: a,
        duties,
    })
}
