//! Exact evaluators for saturated throughput and per-packet delay.
//!
//! The saturated throughput of the elimination policies is a finite sum over
//! winners, termination rounds and the delayed channel realizations the
//! rounds read. [`analytic_saturated_throughput`] walks that sum round by
//! round: each round reads every survivor's channel at its (shrinking)
//! maximum delay, weighting a fresh reading by the stationary law or by the
//! transition probability over the gap since the previous reading of the
//! same link. [`oracle_saturated_throughput`] instead enumerates every joint
//! realization of all delayed channel states up front and runs the scheduler
//! itself. The two share only the channel probabilities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{ChannelModel, LinkChannels};
use crate::policies::{schedule_lc, LcVariant};
use crate::sim::{replay, DelaySample, Mode, SimConfig};
use crate::state::{ArrivalProcess, MapView};
use crate::topology::{BigPower, DelayTable};
use crate::Error;

/// What a winning link contributes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reward {
    /// Its expected current rate given its last reading.
    Rate,
    /// One, so that the probability weights alone are summed.
    Unit,
}

/// Contribution of one `(winner, termination round)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub winner: usize,
    pub round: usize,
    pub value: f64,
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(self) -> f64 {
        self.s + self.c
    }
}

fn check_budget(table: &DelayTable, channels: &LinkChannels, budget: u64) -> Result<(), Error> {
    let mut log = 0.0;
    for m in 0..table.len() {
        let k = channels.model(m).num_states() as f64;
        log += table.row_delays(m).len().max(1) as f64 * k.log2();
    }
    let count = BigPower::from_u64(2, log.ceil() as u64);
    if log > (budget as f64).log2() {
        return Err(Error::RealizationBudgetExceeded(count, budget));
    }
    Ok(())
}

/// Expected saturated throughput of an elimination policy on a
/// complete-interference network, by the round-by-round sum.
pub fn analytic_saturated_throughput(
    table: &DelayTable,
    channels: &LinkChannels,
    variant: LcVariant,
    budget: u64,
) -> Result<f64, Error> {
    Ok(analytic_breakdown(table, channels, variant, Reward::Rate, budget)?.iter().map(|s| s.value).sum())
}

/// Per `(winner, round)` terms of the analytic sum.
pub fn analytic_breakdown(
    table: &DelayTable,
    channels: &LinkChannels,
    variant: LcVariant,
    reward: Reward,
    budget: u64,
) -> Result<Vec<Slice>, Error> {
    check_budget(table, channels, budget)?;
    let n = table.len();
    let mut walk =
        Walk { rows: table.rows(), channels, variant, reward, sums: vec![vec![Sum::default(); n.max(2)]; n] };
    let active: Vec<usize> = (0..n).collect();
    let readings = vec![None; n];
    walk.round(&active, &readings, 1.0, 1);
    let mut out = Vec::new();
    for (winner, rounds) in walk.sums.iter().enumerate() {
        for (round, s) in rounds.iter().enumerate() {
            let v = s.value();
            if v != 0.0 {
                out.push(Slice { winner, round, value: v });
            }
        }
    }
    Ok(out)
}

struct Walk<'a> {
    rows: &'a [Vec<u32>],
    channels: &'a LinkChannels,
    variant: LcVariant,
    reward: Reward,
    /// `sums[i][r]`: mass of link `i` winning in round `r`.
    sums: Vec<Vec<Sum>>,
}

impl Walk<'_> {
    fn row_max(&self, active: &[usize], j: usize, without: Option<usize>) -> u32 {
        active.iter().filter(|&&k| k != j && Some(k) != without).map(|&k| self.rows[j][k]).max().unwrap_or(0)
    }

    /// `readings[j]`: the latest `(delay, state)` read for link `j`.
    fn round(&mut self, active: &[usize], readings: &[Option<(u32, usize)>], weight: f64, r: usize) {
        let tau: Vec<u32> = active.iter().map(|&j| self.row_max(active, j, None)).collect();
        let fresh: Vec<usize> =
            (0..active.len()).filter(|&a| readings[active[a]].map(|(d, _)| d) != Some(tau[a])).collect();
        let radix: Vec<usize> = fresh.iter().map(|&a| self.channels.model(active[a]).num_states()).collect();
        let total: usize = radix.iter().product();
        for mut code in 0..total {
            let mut next = readings.to_vec();
            let mut w = weight;
            for (f, &a) in fresh.iter().enumerate().rev() {
                let s = code % radix[f];
                code /= radix[f];
                let j = active[a];
                w *= match readings[j] {
                    None => self.channels.stationary(j)[s],
                    Some((d, prev)) => self.channels.prob(j, d - tau[a], prev, s),
                };
                next[j] = Some((tau[a], s));
            }
            if w == 0.0 {
                continue;
            }
            self.settle(active, &tau, &next, w, r);
        }
    }

    fn settle(&mut self, active: &[usize], tau: &[u32], readings: &[Option<(u32, usize)>], w: f64, r: usize) {
        let rate: Vec<f64> = active
            .iter()
            .zip(tau)
            .map(|(&j, &d)| self.channels.mean(j, d, readings[j].expect("read this round").1))
            .collect();
        // Protected link: first maximum.
        let mut top = 0;
        for a in 1..active.len() {
            if rate[a] > rate[top] {
                top = a;
            }
        }
        let mut finish = active.len() <= 2;
        let mut victim = None;
        if !finish {
            let mut best: Option<(usize, usize)> = None;
            for a in 0..active.len() {
                if a == top {
                    continue;
                }
                let k = active[a];
                let drops =
                    (0..active.len()).filter(|&b| b != a && self.row_max(active, active[b], Some(k)) < tau[b]).count();
                if drops == 0 {
                    continue;
                }
                // Later candidates win ties on rate; more dropped rows win outright for ERDMC.
                let better = match best {
                    None => true,
                    Some((b, bd)) => match self.variant {
                        LcVariant::Eldr => rate[a] <= rate[b],
                        LcVariant::Erdmc => drops > bd || (drops == bd && rate[a] <= rate[b]),
                    },
                };
                if better {
                    best = Some((a, drops));
                }
            }
            match best {
                Some((a, _)) => victim = Some(a),
                None => finish = true,
            }
        }
        if finish {
            let gain = match self.reward {
                Reward::Rate => rate[top],
                Reward::Unit => 1.0,
            };
            let slot = r.min(self.sums[active[top]].len() - 1);
            self.sums[active[top]][slot].add(w * gain);
            return;
        }
        let e = active[victim.expect("candidate")];
        let rest: Vec<usize> = active.iter().copied().filter(|&j| j != e).collect();
        self.round(&rest, readings, w, r + 1);
    }
}

/// Expected saturated throughput by enumerating every joint realization of
/// the delayed channel states and running the scheduler on each.
pub fn oracle_saturated_throughput(
    table: &DelayTable,
    channels: &LinkChannels,
    variant: LcVariant,
    budget: u64,
) -> Result<f64, Error> {
    check_budget(table, channels, budget)?;
    let n = table.len();
    // Per link: descending delays read, always including at least one.
    let delays: Vec<Vec<u32>> = (0..n)
        .map(|m| {
            let mut d = table.row_delays(m);
            if d.is_empty() {
                d.push(0);
            }
            d.reverse();
            d
        })
        .collect();
    // Per link: every path over its delays, with its probability.
    let paths: Vec<Vec<(f64, Vec<usize>)>> = (0..n)
        .map(|m| {
            let k = channels.model(m).num_states();
            let mut ps: Vec<(f64, Vec<usize>)> = (0..k).map(|s| (channels.stationary(m)[s], vec![s])).collect();
            for w in delays[m].windows(2) {
                ps = ps
                    .into_iter()
                    .flat_map(|(p, st)| {
                        let prev = *st.last().expect("non-empty");
                        (0..k).map(move |s| {
                            let mut v = st.clone();
                            v.push(s);
                            (p * channels.prob(m, w[0] - w[1], prev, s), v)
                        })
                    })
                    .collect();
            }
            ps
        })
        .collect();
    let total: usize = paths.iter().map(Vec::len).product();
    let all: Vec<usize> = (0..n).collect();
    let terms: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|mut code| -> Result<f64, Error> {
            let mut view = MapView::new(n);
            let mut p = 1.0;
            let mut pick = vec![0; n];
            for m in (0..n).rev() {
                pick[m] = code % paths[m].len();
                code /= paths[m].len();
            }
            for m in 0..n {
                let (q, states) = &paths[m][pick[m]];
                p *= q;
                for (&d, &s) in delays[m].iter().zip(states) {
                    view.set_channel(m, d, s);
                }
            }
            if p == 0.0 {
                return Ok(0.0);
            }
            let d = schedule_lc(&view, table, channels, variant, &all, true)?;
            let w = d.winner().expect("one winner");
            let tau = d.trace.last().and_then(|r| r.tau[w]).unwrap_or(0);
            let s = view_state(&view, w, tau)?;
            Ok(p * channels.mean(w, tau, s))
        })
        .collect::<Result<_, _>>()?;
    let mut sum = Sum::default();
    for t in terms {
        sum.add(t);
    }
    Ok(sum.value())
}

fn view_state(view: &MapView, link: usize, delay: u32) -> Result<usize, Error> {
    use crate::state::NsiView;
    view.channel(link, delay)
}

/// `E[max_l C_l[t]]` under the stationary law: the instantaneous-information bound.
pub fn ic_saturated_throughput(channels: &LinkChannels) -> f64 {
    let n = channels.len();
    let radix: Vec<usize> = (0..n).map(|l| channels.model(l).num_states()).collect();
    let total: usize = radix.iter().product();
    (0..total)
        .map(|mut code| {
            let mut p = 1.0;
            let mut best = 0;
            for l in (0..n).rev() {
                let s = code % radix[l];
                code /= radix[l];
                p *= channels.stationary(l)[s];
                best = best.max(channels.rate(l, s));
            }
            p * best as f64
        })
        .sum()
}

/// Expected saturated throughput of the omniscient policy: every link is
/// scored by its expected rate given its reading at its own maximum delay,
/// and the first best link wins.
pub fn o_saturated_throughput(table: &DelayTable, channels: &LinkChannels) -> f64 {
    let n = channels.len();
    let radix: Vec<usize> = (0..n).map(|l| channels.model(l).num_states()).collect();
    let delays: Vec<u32> = (0..n).map(|l| table.tau_l_max(l)).collect();
    let total: usize = radix.iter().product();
    let mut sum = Sum::default();
    for mut code in 0..total {
        let mut states = vec![0; n];
        for l in (0..n).rev() {
            states[l] = code % radix[l];
            code /= radix[l];
        }
        let p: f64 = (0..n).map(|l| channels.stationary(l)[states[l]]).product();
        let score = |l: usize| channels.mean(l, delays[l], states[l]);
        let mut best = 0;
        for l in 1..n {
            if score(l) > score(best) {
                best = l;
            }
        }
        sum.add(p * score(best));
    }
    sum.value()
}

/// Size `((A_max + 1) C)^{L (tau_max + T)}` of the exhaustive delay evaluation.
pub fn delay_evaluation_complexity(links: u64, a_max: u64, num_states: u64, tau_max: u64, horizon: u64) -> BigPower {
    BigPower::from_u64((a_max + 1) * num_states, links * (tau_max + horizon))
}

/// Average per-packet delay over the given samples, each replayed exactly.
///
/// Every sample contributes the mean delay of the packets it serves from
/// slot 0 on; samples are weighted uniformly.
pub fn analytic_mean_delay(config: &SimConfig, samples: &[DelaySample]) -> Result<f64, Error> {
    if config.mode != Mode::Queued {
        return Err(Error::InvalidConfig("delay evaluation needs queued mode".into()));
    }
    let scheduler = config.scheduler()?;
    let per: Vec<Option<f64>> = samples
        .par_iter()
        .map(|s| replay(&scheduler, Mode::Queued, s, &[]).map(|o| o.mean_delay()))
        .collect::<Result<_, _>>()?;
    let vals: Vec<f64> = per.into_iter().flatten().collect();
    if vals.is_empty() {
        return Err(Error::EmptyServiceSet);
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Settings for drawing typical samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Typicality {
    /// Largest allowed deviation of any empirical frequency from its model probability.
    pub epsilon: f64,
    /// Draws allowed per path before giving up.
    pub max_attempts: usize,
}

impl Default for Typicality {
    fn default() -> Self {
        Self { epsilon: 0.05, max_attempts: 10_000 }
    }
}

/// Whether a channel path's empirical one-step transition frequencies are
/// within `eps` of the model's, with every state left at least once.
pub fn is_typical_path(model: &ChannelModel, path: &[usize], eps: f64) -> bool {
    let k = model.num_states();
    let mut counts = vec![vec![0u64; k]; k];
    for w in path.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    (0..k).all(|i| {
        let total: u64 = counts[i].iter().sum();
        total > 0 && (0..k).all(|j| (counts[i][j] as f64 / total as f64 - model.p(i, j)).abs() <= eps)
    })
}

/// Whether an arrival stream's empirical histogram is within `eps` of the law.
pub fn is_typical_arrivals(process: &ArrivalProcess, stream: &[u32], eps: f64) -> bool {
    if stream.is_empty() {
        return false;
    }
    let top = stream.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0u64; top + 2];
    for &a in stream {
        hist[a as usize] += 1;
    }
    let n = stream.len() as f64;
    hist.iter().enumerate().all(|(a, &c)| (c as f64 / n - process.pmf(a as u32)).abs() <= eps)
}

/// Draws `count` samples whose every channel path and arrival stream is typical.
///
/// Each path is rejection-sampled independently; sample `i` uses stream `i`
/// under `seed`.
pub fn generate_typical_samples(
    channels: &[ChannelModel],
    arrivals: &[ArrivalProcess],
    slots: usize,
    count: usize,
    seed: u64,
    typicality: Typicality,
) -> Result<Vec<DelaySample>, Error> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut paths = Vec::with_capacity(channels.len());
            for model in channels {
                let mut found = None;
                for _ in 0..typicality.max_attempts {
                    let p = model.sample_path(None, slots, &mut rng)?;
                    if is_typical_path(model, &p, typicality.epsilon) {
                        found = Some(p);
                        break;
                    }
                }
                paths.push(found.ok_or(Error::TypicalityUnreachable(typicality.max_attempts))?);
            }
            let mut streams = Vec::with_capacity(arrivals.len());
            for process in arrivals {
                let mut found = None;
                for _ in 0..typicality.max_attempts {
                    let s: Vec<u32> = (0..slots).map(|_| process.sample(&mut rng)).collect();
                    if is_typical_arrivals(process, &s, typicality.epsilon) {
                        found = Some(s);
                        break;
                    }
                }
                streams.push(found.ok_or(Error::TypicalityUnreachable(typicality.max_attempts))?);
            }
            Ok(DelaySample { arrivals: streams, channels: paths })
        })
        .collect()
}

/// Draws `count` samples with no typicality filter, using the same streams.
pub fn generate_random_samples(
    channels: &[ChannelModel],
    arrivals: &[ArrivalProcess],
    slots: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<DelaySample>, Error> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            DelaySample::draw(channels, arrivals, slots, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn ch(links: usize, crossover: f64, max: u32) -> LinkChannels {
        LinkChannels::shared(&ChannelModel::two_state(crossover).unwrap(), links, max).unwrap()
    }

    #[test]
    fn single_link_is_stationary_mean() {
        let t = DelayTable::new(vec![vec![0]]).unwrap();
        let c = ch(1, 0.1, 0);
        for v in [LcVariant::Eldr, LcVariant::Erdmc] {
            assert!((analytic_saturated_throughput(&t, &c, v, 1 << 20).unwrap() - 1.5).abs() < 1e-12);
            assert!((oracle_saturated_throughput(&t, &c, v, 1 << 20).unwrap() - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn two_link_hand_enumeration() {
        // Both links read at delay 1. Winner: the larger E, link 0 on ties.
        let t = presets::table3(1);
        let c = ch(2, 0.1, 1);
        let e = |s: usize| -> f64 {
            if s == 0 {
                1.1
            } else {
                1.9
            }
        };
        let mut hand = 0.0;
        for s0 in 0..2 {
            for s1 in 0..2 {
                hand += 0.25 * e(s0).max(e(s1));
            }
        }
        let a = analytic_saturated_throughput(&t, &c, LcVariant::Eldr, 1 << 20).unwrap();
        let o = oracle_saturated_throughput(&t, &c, LcVariant::Eldr, 1 << 20).unwrap();
        assert!((a - hand).abs() < 1e-12);
        assert!((o - hand).abs() < 1e-12);
    }

    #[test]
    fn unit_reward_sums_to_one() {
        for t in [presets::table1(), presets::table4(), presets::md()] {
            let c = ch(t.len(), 0.3, t.tau_max());
            let total: f64 = analytic_breakdown(&t, &c, LcVariant::Eldr, Reward::Unit, 1 << 30)
                .unwrap()
                .iter()
                .map(|s| s.value)
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ic_bound_three_links() {
        assert!((ic_saturated_throughput(&ch(3, 0.1, 0)) - 1.875).abs() < 1e-15);
    }

    #[test]
    fn omniscient_two_links_one_slot_stale() {
        // High reading predicts 1.9, low predicts 1.1; the larger prediction wins.
        let v = o_saturated_throughput(&presets::table3(1), &ch(2, 0.1, 1));
        assert!((v - (0.75 * 1.9 + 0.25 * 1.1)).abs() < 1e-12);
    }

    #[test]
    fn delay_evaluation_count() {
        assert_eq!(delay_evaluation_complexity(2, 1, 2, 2, 10), BigPower::from_u64(4, 24));
        assert_eq!(delay_evaluation_complexity(2, 1, 2, 2, 10).expand(), BigPower::from_u64(2, 48).expand());
    }

    #[test]
    fn typicality_unreachable_for_short_paths() {
        let m = ChannelModel::two_state(0.1).unwrap();
        let r = generate_typical_samples(
            &[m],
            &[ArrivalProcess::poisson(0.25)],
            10,
            1,
            0,
            Typicality { epsilon: 0.001, max_attempts: 200 },
        );
        assert!(matches!(r, Err(Error::TypicalityUnreachable(200))));
    }

    #[test]
    fn typical_paths_flip_near_crossover() {
        let m = ChannelModel::two_state(0.1).unwrap();
        let s = generate_typical_samples(&[m], &[], 2000, 5, 3, Typicality::default()).unwrap();
        for sample in s {
            let p = &sample.channels[0];
            let flips = p.windows(2).filter(|w| w[0] != w[1]).count() as f64 / (p.len() - 1) as f64;
            assert!((0.05..=0.15).contains(&flips));
        }
    }
}
