//! Exact threshold-function policies.
//!
//! Given the commonly known conditioning symbols and queue weights, every
//! transmitter solves the same finite optimization: choose, for each link and
//! each realization of that link's free critical symbols, a rate threshold
//! from the `M + 1` representatives `c_1 - 1/2, ..., c_M + 1/2`. The link then
//! transmits iff its current rate clears its threshold.
//!
//! The search is exact. All links but the one with the most cells are
//! enumerated; for each such partial vector the objective is separable over
//! the cells of the remaining link, which are optimized independently.
//! Maxima are compared with an absolute tolerance of `1e-12` and ties go to
//! the vector that comes first in the canonical order: links ascending with
//! the separable link moved last, cells ascending, representatives
//! ascending.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::ScheduleDecision;
use crate::channel::LinkChannels;
use crate::state::NsiView;
use crate::topology::{DelayTable, InterferenceSpec, ThresholdVariant};
use crate::Error;

const EPS: f64 = 1e-12;
const CHUNK: u64 = 1 << 12;

/// Threshold choice per link and per cell, as indices into the representatives.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdVector {
    pub choices: Vec<Vec<u8>>,
    /// Objective value `sum_l w_l R_l(T)` at this vector.
    pub value: f64,
}

impl ThresholdVector {
    /// Whether `link` transmits in cell `cell` at current state index `state`.
    pub fn transmits(&self, link: usize, cell: usize, state: usize) -> bool {
        (self.choices[link][cell] as usize) <= state
    }
}

/// One joint realization of every unknown symbol given the conditioning.
#[derive(Clone, Debug)]
struct Outcome {
    prob: f64,
    cell: Vec<u32>,
    state: Vec<u8>,
}

type CacheKey = (Vec<u64>, Vec<usize>);

/// An exact R or H policy bound to one network.
#[derive(Debug)]
pub struct ThresholdPolicy {
    variant: ThresholdVariant,
    table: DelayTable,
    channels: LinkChannels,
    interference: InterferenceSpec,
    /// Per link: delays read for that link, conditioning first, then descending.
    chain: Vec<Vec<u32>>,
    /// Position of delay 0 in `chain`.
    current: Vec<usize>,
    /// Per link: its free parameters as `(link, chain position)`.
    params: Vec<Vec<(usize, usize)>>,
    cells: Vec<usize>,
    cache: RwLock<HashMap<CacheKey, Arc<ThresholdVector>>>,
}

impl ThresholdPolicy {
    /// Prepares the policy, refusing if the search space exceeds `budget`.
    pub fn new(
        table: DelayTable,
        channels: LinkChannels,
        interference: InterferenceSpec,
        variant: ThresholdVariant,
        budget: u64,
    ) -> Result<Self, Error> {
        let n = table.len();
        let max_states = (0..n).map(|l| channels.model(l).num_states()).max().unwrap_or(1) as u32;
        let vectors = table.complexity_threshold_vectors(max_states, variant);
        let paths = table.complexity_sample_paths(max_states, variant);
        let within = vectors.checked_product(&paths).is_some_and(|p| p <= BigUint::from(budget));
        if !within {
            return Err(Error::BudgetExceeded { threshold_vectors: vectors, sample_paths: paths, budget });
        }

        let cond = table.conditioning(variant);
        let raw_params: Vec<Vec<(usize, u32)>> = (0..n).map(|l| table.threshold_params(l, variant)).collect();
        let mut chain = Vec::with_capacity(n);
        let mut current = Vec::with_capacity(n);
        for (m, &(_, c)) in cond.iter().enumerate() {
            let mut ds: Vec<u32> = raw_params.iter().flatten().filter(|s| s.0 == m).map(|s| s.1).collect();
            ds.push(0);
            ds.retain(|&d| d != c);
            ds.sort_unstable_by(|a, b| b.cmp(a));
            ds.dedup();
            let mut ch = vec![c];
            ch.extend(ds);
            current.push(ch.iter().position(|&d| d == 0).expect("delay 0 present"));
            chain.push(ch);
        }
        let params: Vec<Vec<(usize, usize)>> = raw_params
            .iter()
            .map(|ps| {
                ps.iter().map(|&(m, d)| (m, chain[m].iter().position(|&x| x == d).expect("param in chain"))).collect()
            })
            .collect();
        let cells = params.iter().map(|ps| ps.iter().map(|&(m, _)| channels.model(m).num_states()).product()).collect();
        Ok(Self {
            variant,
            table,
            channels,
            interference,
            chain,
            current,
            params,
            cells,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn variant(&self) -> ThresholdVariant {
        self.variant
    }

    /// Number of threshold cells per link.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Representative thresholds of link `l`: below, between and above its rates.
    pub fn representatives(&self, l: usize) -> Vec<f64> {
        let s = self.channels.model(l).states();
        let mut reps = vec![s[0] as f64 - 0.5];
        reps.extend(s.windows(2).map(|w| (w[0] + w[1]) as f64 / 2.0));
        reps.push(s[s.len() - 1] as f64 + 0.5);
        reps
    }

    fn num_choices(&self, l: usize) -> usize {
        self.channels.model(l).num_states() + 1
    }

    /// Delays each conditioning symbol is read at.
    pub fn conditioning_delays(&self) -> Vec<u32> {
        self.chain.iter().map(|c| c[0]).collect()
    }

    fn outcomes(&self, cond: &[usize]) -> Vec<Outcome> {
        let n = self.table.len();
        let per_link: Vec<Vec<(f64, Vec<usize>)>> = (0..n)
            .map(|m| {
                let ch = &self.chain[m];
                let k = self.channels.model(m).num_states();
                let mut paths = vec![(1.0, vec![cond[m]])];
                for w in ch.windows(2) {
                    let gap = w[0] - w[1];
                    let mut next = Vec::with_capacity(paths.len() * k);
                    for (p, states) in &paths {
                        let prev = *states.last().expect("non-empty");
                        for s in 0..k {
                            let q = self.channels.prob(m, gap, prev, s);
                            if q > 0.0 {
                                let mut st = states.clone();
                                st.push(s);
                                next.push((p * q, st));
                            }
                        }
                    }
                    paths = next;
                }
                paths
            })
            .collect();

        let mut out = Vec::new();
        let mut idx = vec![0usize; n];
        loop {
            let prob: f64 = (0..n).map(|m| per_link[m][idx[m]].0).product();
            let states = |m: usize, pos: usize| per_link[m][idx[m]].1[pos];
            let cell = (0..n)
                .map(|l| {
                    self.params[l].iter().fold(0u32, |acc, &(m, pos)| {
                        acc * self.channels.model(m).num_states() as u32 + states(m, pos) as u32
                    })
                })
                .collect();
            let state = (0..n).map(|m| states(m, self.current[m]) as u8).collect();
            out.push(Outcome { prob, cell, state });
            let mut m = n;
            loop {
                if m == 0 {
                    return out;
                }
                m -= 1;
                idx[m] += 1;
                if idx[m] < per_link[m].len() {
                    break;
                }
                idx[m] = 0;
            }
        }
    }

    fn service(&self, weights: &[f64], o: &Outcome, tx: &[bool]) -> f64 {
        let mut v = 0.0;
        for l in 0..tx.len() {
            if !tx[l] {
                continue;
            }
            let clear = self.interference.interferers(l).iter().all(|&m| !tx[m]);
            let g = self.interference.gamma(l);
            let factor = if clear { 1.0 } else { g };
            v += weights[l] * self.channels.rate(l, o.state[l] as usize) as f64 * factor;
        }
        v
    }

    /// Objective `sum_l w_l R_l(T)` of a given vector.
    pub fn evaluate(&self, cond: &[usize], weights: &[f64], t: &ThresholdVector) -> f64 {
        let n = self.table.len();
        let mut tx = vec![false; n];
        self.outcomes(cond)
            .iter()
            .map(|o| {
                for (l, x) in tx.iter_mut().enumerate() {
                    *x = t.transmits(l, o.cell[l] as usize, o.state[l] as usize);
                }
                o.prob * self.service(weights, o, &tx)
            })
            .sum()
    }

    /// The vector that transmits whenever the rate clears representative `k` everywhere.
    pub fn constant_vector(&self, k: u8) -> ThresholdVector {
        ThresholdVector { choices: self.cells.iter().map(|&c| vec![k; c]).collect(), value: f64::NAN }
    }

    fn free_link(&self) -> usize {
        let mut f = 0;
        for l in 0..self.cells.len() {
            if self.cells[l] >= self.cells[f] {
                f = l;
            }
        }
        f
    }

    /// Links in canonical digit order: ascending with the separable link last.
    fn digit_links(&self) -> Vec<usize> {
        let f = self.free_link();
        let mut order: Vec<usize> = (0..self.cells.len()).filter(|&l| l != f).collect();
        order.push(f);
        order
    }

    /// Optimal vector for the given conditioning states and queue weights.
    pub fn solve(&self, cond: &[usize], weights: &[f64]) -> ThresholdVector {
        let n = self.table.len();
        let outcomes = self.outcomes(cond);
        let f = self.free_link();
        let order = self.digit_links();
        let others = &order[..n - 1];
        // Digit list of (link, cell, radix) for the enumerated links.
        let digits: Vec<(usize, usize, usize)> = others
            .iter()
            .flat_map(|&l| (0..self.cells[l]).map(move |c| (l, c, 0)))
            .map(|(l, c, _)| (l, c, self.num_choices(l)))
            .collect();
        let total: u64 = digits.iter().map(|&(_, _, r)| r as u64).product();
        let kf = self.num_choices(f);
        let cf = self.cells[f];

        let eval_chunk = |start: u64, end: u64| -> (f64, u64, Vec<u8>) {
            let mut d = decode(start, &digits);
            let mut choices: Vec<Vec<u8>> = self.cells.iter().map(|&c| vec![0u8; c]).collect();
            let mut acc = vec![0.0; cf * kf];
            let mut tx = vec![false; n];
            let mut best = (f64::NEG_INFINITY, start, vec![0u8; cf]);
            for idx in start..end {
                for (pos, &(l, c, _)) in digits.iter().enumerate() {
                    choices[l][c] = d[pos];
                }
                acc.iter_mut().for_each(|a| *a = 0.0);
                for o in &outcomes {
                    for &l in others {
                        tx[l] = (choices[l][o.cell[l] as usize] as usize) <= o.state[l] as usize;
                    }
                    tx[f] = false;
                    let v0 = self.service(weights, o, &tx);
                    tx[f] = true;
                    let v1 = self.service(weights, o, &tx);
                    let row = o.cell[f] as usize * kf;
                    let s = o.state[f] as usize;
                    for k in 0..kf {
                        acc[row + k] += o.prob * if k <= s { v1 } else { v0 };
                    }
                }
                let mut value = 0.0;
                let mut inner = vec![0u8; cf];
                for c in 0..cf {
                    let row = &acc[c * kf..(c + 1) * kf];
                    let mut bk = 0;
                    for k in 1..kf {
                        if row[k] > row[bk] + EPS {
                            bk = k;
                        }
                    }
                    inner[c] = bk as u8;
                    value += row[bk];
                }
                if value > best.0 + EPS {
                    best = (value, idx, inner);
                }
                increment(&mut d, &digits);
            }
            best
        };

        let chunks: Vec<(u64, u64)> =
            (0..total.div_ceil(CHUNK)).map(|i| (i * CHUNK, ((i + 1) * CHUNK).min(total))).collect();
        let results: Vec<(f64, u64, Vec<u8>)> = chunks.par_iter().map(|&(a, b)| eval_chunk(a, b)).collect();
        let mut best = results[0].clone();
        for r in results.into_iter().skip(1) {
            if r.0 > best.0 + EPS {
                best = r;
            }
        }
        let mut choices: Vec<Vec<u8>> = self.cells.iter().map(|&c| vec![0u8; c]).collect();
        for (pos, &(l, c, _)) in digits.iter().enumerate() {
            choices[l][c] = decode(best.1, &digits)[pos];
        }
        choices[f] = best.2;
        ThresholdVector { choices, value: best.0 }
    }

    /// Optimal vector by scoring every vector in canonical order. Only
    /// practical for tiny networks; used to check [`Self::solve`].
    pub fn solve_exhaustive(&self, cond: &[usize], weights: &[f64]) -> ThresholdVector {
        let digits: Vec<(usize, usize, usize)> = self
            .digit_links()
            .into_iter()
            .flat_map(|l| (0..self.cells[l]).map(move |c| (l, c)))
            .map(|(l, c)| (l, c, self.num_choices(l)))
            .collect();
        let total: u64 = digits.iter().map(|&(_, _, r)| r as u64).product();
        let mut best = ThresholdVector { choices: Vec::new(), value: f64::NEG_INFINITY };
        let mut d = vec![0u8; digits.len()];
        for _ in 0..total {
            let mut t = self.constant_vector(0);
            for (pos, &(l, c, _)) in digits.iter().enumerate() {
                t.choices[l][c] = d[pos];
            }
            let v = self.evaluate(cond, weights, &t);
            if v > best.value + EPS {
                t.value = v;
                best = t;
            }
            increment(&mut d, &digits);
        }
        best
    }

    /// Cached optimum for `(weights, conditioning states)`.
    pub fn optimal(&self, weights: &[u64], cond: &[usize]) -> Arc<ThresholdVector> {
        let key = (weights.to_vec(), cond.to_vec());
        if let Some(t) = self.cache.read().expect("cache lock").get(&key) {
            return t.clone();
        }
        let w: Vec<f64> = weights.iter().map(|&x| x as f64).collect();
        let t = Arc::new(self.solve(cond, &w));
        self.cache.write().expect("cache lock").entry(key).or_insert(t).clone()
    }

    fn common<V: NsiView>(&self, view: &V, saturated: bool) -> Result<(Vec<u64>, Vec<usize>), Error> {
        let n = self.table.len();
        let mut weights = Vec::with_capacity(n);
        let mut cond = Vec::with_capacity(n);
        for m in 0..n {
            let d = self.chain[m][0];
            cond.push(view.channel(m, d)?);
            weights.push(if saturated { 1 } else { view.queue(m, d)? });
        }
        Ok((weights, cond))
    }

    fn cell_of<V: NsiView>(&self, view: &V, l: usize) -> Result<usize, Error> {
        let mut cell = 0;
        for &(m, pos) in &self.params[l] {
            cell = cell * self.channels.model(m).num_states() + view.channel(m, self.chain[m][pos])?;
        }
        Ok(cell)
    }

    /// Transmit set from the omniscient view.
    pub fn decide<V: NsiView>(&self, view: &V, saturated: bool) -> Result<ScheduleDecision, Error> {
        let (weights, cond) = self.common(view, saturated)?;
        let t = self.optimal(&weights, &cond);
        let mut transmit = Vec::new();
        for l in 0..self.table.len() {
            if t.transmits(l, self.cell_of(view, l)?, view.channel(l, 0)?) {
                transmit.push(l);
            }
        }
        Ok(ScheduleDecision { transmit, trace: Vec::new() })
    }

    /// Whether transmitter `observer` transmits, reading only what it may see.
    pub fn decide_as<V: NsiView>(&self, view: &V, saturated: bool, observer: usize) -> Result<bool, Error> {
        let (weights, cond) = self.common(view, saturated)?;
        let t = self.optimal(&weights, &cond);
        Ok(t.transmits(observer, self.cell_of(view, observer)?, view.channel(observer, 0)?))
    }

    /// Exact expected saturated throughput: the optimum averaged over the
    /// stationary law of the conditioning states.
    pub fn saturated_throughput(&self) -> f64 {
        let n = self.table.len();
        let radix: Vec<usize> = (0..n).map(|m| self.channels.model(m).num_states()).collect();
        let total: usize = radix.iter().product();
        let weights = vec![1u64; n];
        (0..total)
            .map(|mut i| {
                let mut cond = vec![0; n];
                for m in (0..n).rev() {
                    cond[m] = i % radix[m];
                    i /= radix[m];
                }
                let p: f64 = (0..n).map(|m| self.channels.stationary(m)[cond[m]]).product();
                p * self.optimal(&weights, &cond).value
            })
            .sum()
    }

    /// Number of partial vectors [`Self::solve`] enumerates.
    pub fn enumerated_vectors(&self) -> Option<u64> {
        let f = self.free_link();
        let mut total = BigUint::from(1u32);
        for l in (0..self.cells.len()).filter(|&l| l != f) {
            total *= BigUint::from(self.num_choices(l)).pow(self.cells[l] as u32);
        }
        total.to_u64()
    }
}

fn decode(mut idx: u64, digits: &[(usize, usize, usize)]) -> Vec<u8> {
    let mut d = vec![0u8; digits.len()];
    for pos in (0..digits.len()).rev() {
        let r = digits[pos].2 as u64;
        d[pos] = (idx % r) as u8;
        idx /= r;
    }
    d
}

fn increment(d: &mut [u8], digits: &[(usize, usize, usize)]) {
    for pos in (0..d.len()).rev() {
        d[pos] += 1;
        if (d[pos] as usize) < digits[pos].2 {
            return;
        }
        d[pos] = 0;
    }
}
