//! Low-complexity elimination policies.
//!
//! Each round computes, for every surviving link, the largest delay with
//! which the survivors see it, and weights the link by its delayed queue
//! length times its expected current rate. The best link is protected; among
//! the others, a link whose removal shortens some survivor's delay is an
//! elimination candidate. One candidate is dropped per round until no
//! candidate remains or two links are left, and the best link then wins.
//!
//! Ties for the best link resolve to the smallest index; ties for the link
//! to drop resolve to the largest index.

use serde::{Deserialize, Serialize};

use super::{argmax_first, ScheduleDecision};
use crate::channel::LinkChannels;
use crate::state::NsiView;
use crate::topology::{DelayTable, InterferenceSpec};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LcVariant {
    /// Drop the candidate with the lowest weighted expected rate.
    Eldr,
    /// Drop the candidate that shortens the most rows, breaking ties by lowest weighted rate.
    Erdmc,
}

/// One elimination round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub active: Vec<usize>,
    /// Per-link maximum delay among survivors; `None` for eliminated links.
    pub tau: Vec<Option<u32>>,
    /// Per-link weighted expected rate; `None` for eliminated links.
    pub weights: Vec<Option<f64>>,
    pub protected: usize,
    pub candidates: Vec<usize>,
    pub eliminated: Option<usize>,
}

/// Runs the elimination rounds over `active` from the omniscient view.
pub fn schedule_lc<V: NsiView>(
    view: &V,
    table: &DelayTable,
    channels: &LinkChannels,
    variant: LcVariant,
    active: &[usize],
    saturated: bool,
) -> Result<ScheduleDecision, Error> {
    let (winner, trace) = run(view, table, channels, variant, active, saturated, None)?;
    Ok(ScheduleDecision { transmit: winner.into_iter().collect(), trace })
}

/// Runs the rounds as transmitter `observer` would, stopping as soon as its
/// own link is eliminated. Returns whether `observer` transmits.
pub fn schedule_lc_as<V: NsiView>(
    view: &V,
    table: &DelayTable,
    channels: &LinkChannels,
    variant: LcVariant,
    active: &[usize],
    saturated: bool,
    observer: usize,
) -> Result<(bool, Vec<RoundRecord>), Error> {
    let (winner, trace) = run(view, table, channels, variant, active, saturated, Some(observer))?;
    Ok((winner == Some(observer), trace))
}

fn run<V: NsiView>(
    view: &V,
    table: &DelayTable,
    channels: &LinkChannels,
    variant: LcVariant,
    active: &[usize],
    saturated: bool,
    observer: Option<usize>,
) -> Result<(Option<usize>, Vec<RoundRecord>), Error> {
    let n = table.len();
    let mut act: Vec<usize> = active.to_vec();
    act.sort_unstable();
    act.dedup();
    let mut trace = Vec::new();
    loop {
        match act.len() {
            0 => return Ok((None, trace)),
            1 => return Ok((Some(act[0]), trace)),
            _ => {}
        }
        let masked = table.restrict(&act);
        let mut tau = vec![None; n];
        let mut weights = vec![None; n];
        for &l in &act {
            let d = masked.tau_l_max(l);
            let q = if saturated { 1.0 } else { view.queue(l, d)? as f64 };
            tau[l] = Some(d);
            weights[l] = Some(q * channels.mean(l, d, view.channel(l, d)?));
        }
        let w = |l: usize| weights[l].expect("active link");
        let protected = argmax_first(&act, w);
        let mut record = RoundRecord {
            active: act.clone(),
            tau: tau.clone(),
            weights: weights.clone(),
            protected,
            candidates: Vec::new(),
            eliminated: None,
        };
        if act.len() == 2 {
            trace.push(record);
            return Ok((Some(protected), trace));
        }
        // Rows whose maximum strictly drops when `k` is masked.
        let drops = |k: usize| {
            let without = masked.mask(k);
            act.iter().filter(|&&l| l != k && without.tau_l_max(l) < tau[l].expect("active link")).count()
        };
        let scored: Vec<(usize, usize)> =
            act.iter().filter(|&&k| k != protected).map(|&k| (k, drops(k))).filter(|&(_, c)| c > 0).collect();
        record.candidates = scored.iter().map(|&(k, _)| k).collect();
        if scored.is_empty() {
            trace.push(record);
            return Ok((Some(protected), trace));
        }
        let pool: Vec<usize> = match variant {
            LcVariant::Eldr => record.candidates.clone(),
            LcVariant::Erdmc => {
                let most = scored.iter().map(|&(_, c)| c).max().expect("non-empty");
                scored.iter().filter(|&&(_, c)| c == most).map(|&(k, _)| k).collect()
            }
        };
        let mut victim = pool[0];
        for &k in &pool[1..] {
            if w(k) <= w(victim) {
                victim = k;
            }
        }
        record.eliminated = Some(victim);
        trace.push(record);
        act.retain(|&l| l != victim);
        if observer == Some(victim) {
            return Ok((None, trace));
        }
    }
}

/// Repeats the elimination over links not yet blocked, each time adding the
/// winner and removing it and its interferers. Delays between links that do
/// not interfere are treated as zero.
pub fn schedule_multi_interference<V: NsiView>(
    view: &V,
    table: &DelayTable,
    channels: &LinkChannels,
    interference: &InterferenceSpec,
    variant: LcVariant,
    saturated: bool,
) -> Result<ScheduleDecision, Error> {
    let effective = table.with_interference(interference);
    let mut remaining: Vec<usize> = (0..table.len()).collect();
    let mut chosen = Vec::new();
    let mut trace = Vec::new();
    while !remaining.is_empty() {
        let (winner, rounds) = run(view, &effective, channels, variant, &remaining, saturated, None)?;
        trace.extend(rounds);
        let w = winner.expect("non-empty active set has a winner");
        chosen.push(w);
        remaining.retain(|&l| l != w && !interference.interferes(w, l));
    }
    chosen.sort_unstable();
    Ok(ScheduleDecision { transmit: chosen, trace })
}
