//! Scheduling policies.
//!
//! Every policy is a pure function of a delayed view of the network. The
//! single-winner policies resolve ties toward the smallest link index; the
//! elimination heuristics live in [`lc`] and the exact threshold policies in
//! [`threshold`].

pub mod lc;
pub mod threshold;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::channel::LinkChannels;
use crate::state::NsiView;
use crate::topology::{DelayTable, InterferenceSpec, ThresholdVariant};
use crate::Error;

pub use lc::{schedule_lc, schedule_lc_as, schedule_multi_interference, LcVariant, RoundRecord};
pub use threshold::{ThresholdPolicy, ThresholdVector};

/// The scheduling policies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "DQIC1")]
    Dqic1,
    #[serde(rename = "DQIC2")]
    Dqic2,
    O,
    #[serde(rename = "IC")]
    Ic,
    #[serde(rename = "LC-ELDR")]
    LcEldr,
    #[serde(rename = "LC-ERDMC")]
    LcErdmc,
    R,
    H,
}

impl Policy {
    pub const ALL: [Policy; 8] =
        [Self::Dqic1, Self::Dqic2, Self::O, Self::Ic, Self::LcEldr, Self::LcErdmc, Self::R, Self::H];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dqic1 => "DQIC1",
            Self::Dqic2 => "DQIC2",
            Self::O => "O",
            Self::Ic => "IC",
            Self::LcEldr => "LC-ELDR",
            Self::LcErdmc => "LC-ERDMC",
            Self::R => "R",
            Self::H => "H",
        }
    }

    pub fn threshold_variant(self) -> Option<ThresholdVariant> {
        match self {
            Self::R => Some(ThresholdVariant::R),
            Self::H => Some(ThresholdVariant::H),
            _ => None,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown policy `{s}`")))
    }
}

/// The links granted transmission in one slot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScheduleDecision {
    pub transmit: Vec<usize>,
    pub trace: Vec<RoundRecord>,
}

impl ScheduleDecision {
    pub fn single(link: usize) -> Self {
        Self { transmit: vec![link], trace: Vec::new() }
    }

    /// The sole transmitter, if exactly one link transmits.
    pub fn winner(&self) -> Option<usize> {
        match self.transmit.as_slice() {
            [l] => Some(*l),
            _ => None,
        }
    }
}

/// Index of the first maximum.
pub(crate) fn argmax_first(links: &[usize], score: impl Fn(usize) -> f64) -> usize {
    let mut best = links[0];
    let mut best_score = score(best);
    for &l in &links[1..] {
        let s = score(l);
        if s > best_score {
            best = l;
            best_score = s;
        }
    }
    best
}

/// Repeatedly takes the best remaining link and drops it and its interferers.
fn greedy_independent(links: usize, interference: &InterferenceSpec, score: &[f64]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..links).collect();
    let mut chosen = Vec::new();
    while !remaining.is_empty() {
        let w = argmax_first(&remaining, |l| score[l]);
        chosen.push(w);
        remaining.retain(|&l| l != w && !interference.interferes(w, l));
    }
    chosen.sort_unstable();
    chosen
}

fn queue_weight<V: NsiView>(view: &V, link: usize, delay: u32, saturated: bool) -> Result<f64, Error> {
    if saturated {
        Ok(1.0)
    } else {
        Ok(view.queue(link, delay)? as f64)
    }
}

/// `argmax Q_l[t - d_l] * C_l[t]` with `d_l = tau_max` (DQIC1) or `tau_{l,max}` (DQIC2).
pub fn schedule_dqic<V: NsiView>(
    view: &V,
    table: &DelayTable,
    channels: &LinkChannels,
    interference: &InterferenceSpec,
    policy: Policy,
    saturated: bool,
) -> Result<ScheduleDecision, Error> {
    let tau_max = table.tau_max();
    let mut score = Vec::with_capacity(table.len());
    for l in 0..table.len() {
        let d = match policy {
            Policy::Dqic1 => tau_max,
            Policy::Dqic2 => table.tau_l_max(l),
            _ => return Err(Error::InvalidConfig(format!("{policy} is not a DQIC policy"))),
        };
        let c = channels.rate(l, view.channel(l, 0)?) as f64;
        score.push(queue_weight(view, l, d, saturated)? * c);
    }
    Ok(ScheduleDecision { transmit: greedy_independent(table.len(), interference, &score), trace: Vec::new() })
}

/// `argmax Q_l[t - tau_{l,max}] * E[C_l[t] | C_l[t - tau_{l,max}]]`.
pub fn schedule_o<V: NsiView>(
    view: &V,
    table: &DelayTable,
    channels: &LinkChannels,
    interference: &InterferenceSpec,
    saturated: bool,
) -> Result<ScheduleDecision, Error> {
    let mut score = Vec::with_capacity(table.len());
    for l in 0..table.len() {
        let d = table.tau_l_max(l);
        let e = channels.mean(l, d, view.channel(l, d)?);
        score.push(queue_weight(view, l, d, saturated)? * e);
    }
    Ok(ScheduleDecision { transmit: greedy_independent(table.len(), interference, &score), trace: Vec::new() })
}

/// `argmax Q_l[t] * C_l[t]` on instantaneous information.
pub fn schedule_ic<V: NsiView>(
    view: &V,
    channels: &LinkChannels,
    interference: &InterferenceSpec,
    saturated: bool,
) -> Result<ScheduleDecision, Error> {
    let n = view.num_links();
    let mut score = Vec::with_capacity(n);
    for l in 0..n {
        let c = channels.rate(l, view.channel(l, 0)?) as f64;
        score.push(queue_weight(view, l, 0, saturated)? * c);
    }
    Ok(ScheduleDecision { transmit: greedy_independent(n, interference, &score), trace: Vec::new() })
}

/// A policy bound to a network, ready to schedule slot after slot.
#[derive(Debug)]
pub struct Scheduler {
    policy: Policy,
    table: DelayTable,
    channels: LinkChannels,
    interference: InterferenceSpec,
    saturated: bool,
    threshold: Option<ThresholdPolicy>,
}

impl Scheduler {
    /// Binds `policy`; the exact threshold policies check `budget` here.
    pub fn new(
        policy: Policy,
        table: DelayTable,
        channels: LinkChannels,
        interference: InterferenceSpec,
        saturated: bool,
        budget: u64,
    ) -> Result<Self, Error> {
        if channels.len() != table.len() || interference.len() != table.len() {
            return Err(Error::InvalidConfig("link counts of table, channels and interference differ".into()));
        }
        if channels.max_steps() < table.tau_max() {
            return Err(Error::InvalidConfig("channel step table shallower than tau_max".into()));
        }
        let threshold = match policy.threshold_variant() {
            Some(v) => Some(ThresholdPolicy::new(table.clone(), channels.clone(), interference.clone(), v, budget)?),
            None => None,
        };
        Ok(Self { policy, table, channels, interference, saturated, threshold })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn table(&self) -> &DelayTable {
        &self.table
    }

    pub fn channels(&self) -> &LinkChannels {
        &self.channels
    }

    pub fn interference(&self) -> &InterferenceSpec {
        &self.interference
    }

    pub fn threshold_policy(&self) -> Option<&ThresholdPolicy> {
        self.threshold.as_ref()
    }

    /// Decision from the full (omniscient) view.
    pub fn decide<V: NsiView>(&self, view: &V) -> Result<ScheduleDecision, Error> {
        let (t, ch, ifr, sat) = (&self.table, &self.channels, &self.interference, self.saturated);
        match self.policy {
            Policy::Dqic1 | Policy::Dqic2 => schedule_dqic(view, t, ch, ifr, self.policy, sat),
            Policy::O => schedule_o(view, t, ch, ifr, sat),
            Policy::Ic => schedule_ic(view, ch, ifr, sat),
            Policy::LcEldr | Policy::LcErdmc => {
                let variant = if self.policy == Policy::LcEldr { LcVariant::Eldr } else { LcVariant::Erdmc };
                if ifr.is_complete() {
                    let all: Vec<usize> = (0..t.len()).collect();
                    schedule_lc(view, t, ch, variant, &all, sat)
                } else {
                    schedule_multi_interference(view, t, ch, ifr, variant, sat)
                }
            }
            Policy::R | Policy::H => self.threshold.as_ref().expect("bound at construction").decide(view, sat),
        }
    }

    /// Decision for slots before the delayed history exists: instantaneous `Q * C`.
    pub fn decide_warmup<V: NsiView>(&self, view: &V) -> Result<ScheduleDecision, Error> {
        schedule_ic(view, &self.channels, &self.interference, self.saturated)
    }
}
