//! Delay tables, critical information sets and search-space sizes.
//!
//! Links are indexed from zero. Entry `(i, j)` of a [`DelayTable`] is the
//! delay with which the transmitter of link `j` learns the state of link `i`:
//! rows are observed links, columns are observers.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::Error;

/// A delayed channel-state symbol `C_link[t - delay]`.
pub type Symbol = (usize, u32);

/// Matrix of per-observer information delays with an optional set of masked links.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u32>>", into = "Vec<Vec<u32>>")]
pub struct DelayTable {
    delays: Vec<Vec<u32>>,
    active: Vec<bool>,
}

impl DelayTable {
    pub fn new(delays: Vec<Vec<u32>>) -> Result<Self, Error> {
        let n = delays.len();
        if n == 0 {
            return Err(Error::InvalidTable("no links".into()));
        }
        for (i, row) in delays.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidTable(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row[i] != 0 {
                return Err(Error::InvalidTable(format!("diagonal entry {i} is {}", row[i])));
            }
        }
        Ok(Self { delays, active: vec![true; n] })
    }

    /// Number of links, masked or not.
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.delays
    }

    /// `tau_observer(observed)`.
    pub fn delay(&self, observed: usize, observer: usize) -> u32 {
        self.delays[observed][observer]
    }

    pub fn is_active(&self, link: usize) -> bool {
        self.active[link]
    }

    pub fn active_links(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&l| self.active[l])
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Copy with `link` masked out.
    pub fn mask(&self, link: usize) -> Self {
        let mut t = self.clone();
        t.active[link] = false;
        t
    }

    /// Copy with exactly the links in `active` unmasked.
    pub fn restrict(&self, active: &[usize]) -> Self {
        let mut t = self.clone();
        t.active = vec![false; self.len()];
        for &l in active {
            t.active[l] = true;
        }
        t
    }

    /// Largest off-diagonal delay among unmasked links.
    pub fn tau_max(&self) -> u32 {
        self.active_links().map(|l| self.tau_l_max(l)).max().unwrap_or(0)
    }

    /// Largest delay with which any unmasked transmitter sees `link`.
    pub fn tau_l_max(&self, link: usize) -> u32 {
        self.active_links().filter(|&k| k != link).map(|k| self.delays[link][k]).max().unwrap_or(0)
    }

    /// Sorted distinct off-diagonal delays of row `link` over unmasked observers.
    pub fn row_delays(&self, link: usize) -> Vec<u32> {
        let set: BTreeSet<u32> = self.active_links().filter(|&k| k != link).map(|k| self.delays[link][k]).collect();
        set.into_iter().collect()
    }

    /// Table with `delta_ij = 0` wherever link `i` does not interfere with link `j`.
    pub fn with_interference(&self, spec: &InterferenceSpec) -> Self {
        let mut t = self.clone();
        for (i, row) in t.delays.iter_mut().enumerate() {
            for (j, d) in row.iter_mut().enumerate() {
                if i != j && !spec.interferes(j, i) {
                    *d = 0;
                }
            }
        }
        t
    }

    /// Network critical set: every `(link, delay)` some other transmitter observes.
    pub fn network_critical_set(&self) -> BTreeSet<Symbol> {
        self.active_links().flat_map(|m| self.row_delays(m).into_iter().map(move |d| (m, d))).collect()
    }

    /// Critical symbols visible to transmitter `observer` under the given policy.
    pub fn link_critical_set(&self, observer: usize, variant: ThresholdVariant) -> BTreeSet<Symbol> {
        let tau_max = self.tau_max();
        self.network_critical_set()
            .into_iter()
            .filter(|&(m, d)| {
                let upper = match variant {
                    ThresholdVariant::R => tau_max,
                    ThresholdVariant::H => self.tau_l_max(m),
                };
                d >= self.delays[m][observer] && d <= upper
            })
            .collect()
    }

    pub fn critical_sets(&self, variant: ThresholdVariant) -> CriticalSets {
        CriticalSets {
            network: self.network_critical_set(),
            per_link: (0..self.len())
                .map(|l| if self.active[l] { self.link_critical_set(l, variant) } else { BTreeSet::new() })
                .collect(),
        }
    }

    /// The commonly known symbols each policy conditions on.
    pub fn conditioning(&self, variant: ThresholdVariant) -> Vec<Symbol> {
        let tau_max = self.tau_max();
        self.active_links()
            .map(|m| match variant {
                ThresholdVariant::R => (m, tau_max),
                ThresholdVariant::H => (m, self.tau_l_max(m)),
            })
            .collect()
    }

    /// Free parameters of link `observer`'s threshold function: its critical
    /// set minus the conditioning symbols.
    pub fn threshold_params(&self, observer: usize, variant: ThresholdVariant) -> Vec<Symbol> {
        let cond: BTreeSet<Symbol> = self.conditioning(variant).into_iter().collect();
        self.link_critical_set(observer, variant).into_iter().filter(|s| !cond.contains(s)).collect()
    }

    /// Number of threshold function vectors the exact policy searches.
    pub fn complexity_threshold_vectors(&self, num_states: u32, variant: ThresholdVariant) -> BigPower {
        let c = BigUint::from(num_states);
        let exponent = self
            .active_links()
            .map(|l| c.pow(self.threshold_params(l, variant).len() as u32))
            .fold(BigUint::zero(), |acc, x| acc + x);
        BigPower::new(num_states as u64 + 1, exponent)
    }

    /// Number of channel sample paths the exact policy averages over.
    pub fn complexity_sample_paths(&self, num_states: u32, variant: ThresholdVariant) -> BigPower {
        let exponent: u64 = match variant {
            ThresholdVariant::R => self.num_active() as u64 * self.tau_max() as u64,
            ThresholdVariant::H => self.active_links().map(|l| self.tau_l_max(l) as u64).sum(),
        };
        BigPower::new(num_states as u64, BigUint::from(exponent))
    }

    /// Sorts each row's off-diagonal delays into descending order, left to right.
    pub fn worst_case_rearrange(&self) -> Result<Self, Error> {
        let mut t = self.clone();
        for (i, row) in t.delays.iter_mut().enumerate() {
            let mut off: Vec<u32> = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d).collect();
            let distinct: BTreeSet<u32> = off.iter().copied().collect();
            if distinct.len() != off.len() {
                return Err(Error::NonDistinctDelays { row: i });
            }
            off.sort_unstable_by(|a, b| b.cmp(a));
            let mut it = off.into_iter();
            for (j, d) in row.iter_mut().enumerate() {
                if j != i {
                    *d = it.next().expect("row length");
                }
            }
        }
        Ok(t)
    }
}

impl TryFrom<Vec<Vec<u32>>> for DelayTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u32>>) -> Result<Self, Error> {
        Self::new(rows)
    }
}

impl From<DelayTable> for Vec<Vec<u32>> {
    fn from(t: DelayTable) -> Self {
        t.delays
    }
}

impl fmt::Display for DelayTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.delays {
            let cells: Vec<String> = row.iter().map(|d| format!("{d:>3}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Which exact threshold policy a calculation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdVariant {
    /// Conditions on the network-wide maximum delay.
    R,
    /// Conditions on each link's own maximum delay.
    H,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalSets {
    pub network: BTreeSet<Symbol>,
    pub per_link: Vec<BTreeSet<Symbol>>,
}

/// Closed-form exponent `sum_i C^{i(L-2)+(L-1)}` for a worst-case R table.
pub fn worst_case_exponent_r(links: u32, num_states: u32) -> BigUint {
    let c = BigUint::from(num_states);
    (1..=links).map(|i| c.pow(i * (links - 2) + (links - 1))).sum()
}

/// Closed-form exponent `sum_i C^{i(L-2)}` for a worst-case H table.
pub fn worst_case_exponent_h(links: u32, num_states: u32) -> BigUint {
    let c = BigUint::from(num_states);
    (1..=links).map(|i| c.pow(i * (links - 2))).sum()
}

/// Which links interfere with which, and how much of a collided transmission survives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSpec {
    interferers: Vec<Vec<usize>>,
    gamma: Vec<f64>,
}

impl InterferenceSpec {
    pub fn new(interferers: Vec<Vec<usize>>, gamma: Vec<f64>) -> Result<Self, Error> {
        let n = interferers.len();
        if gamma.len() != n {
            return Err(Error::InvalidInterference("gamma length differs from link count".into()));
        }
        let mut sets = Vec::with_capacity(n);
        for (l, set) in interferers.into_iter().enumerate() {
            let s: BTreeSet<usize> = set.into_iter().collect();
            if s.contains(&l) {
                return Err(Error::InvalidInterference(format!("link {l} listed as its own interferer")));
            }
            if s.iter().any(|&m| m >= n) {
                return Err(Error::InvalidInterference(format!("link {l} has an out-of-range interferer")));
            }
            sets.push(s.into_iter().collect());
        }
        if gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidInterference("gamma outside [0,1]".into()));
        }
        Ok(Self { interferers: sets, gamma })
    }

    /// Every link interferes with every other and collisions deliver nothing.
    pub fn complete(links: usize) -> Self {
        let sets = (0..links).map(|l| (0..links).filter(|&m| m != l).collect()).collect();
        Self { interferers: sets, gamma: vec![0.0; links] }
    }

    /// No link interferes with any other.
    pub fn none(links: usize) -> Self {
        Self { interferers: vec![Vec::new(); links], gamma: vec![0.0; links] }
    }

    pub fn len(&self) -> usize {
        self.interferers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interferers.is_empty()
    }

    pub fn interferers(&self, link: usize) -> &[usize] {
        &self.interferers[link]
    }

    /// Whether `other` is in `I_link`.
    pub fn interferes(&self, link: usize, other: usize) -> bool {
        self.interferers[link].binary_search(&other).is_ok()
    }

    pub fn gamma(&self, link: usize) -> f64 {
        self.gamma[link]
    }

    pub fn is_complete(&self) -> bool {
        self.interferers.iter().all(|s| s.len() + 1 == self.len())
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|l| self.interferers[l].iter().all(|&m| self.interferes(m, l)))
    }

    /// Checks that `gamma_l * c` is integral for every rate.
    pub fn validate_rates(&self, states: &[u32]) -> Result<(), Error> {
        for (l, &g) in self.gamma.iter().enumerate() {
            for &c in states {
                let x = g * c as f64;
                if (x - x.round()).abs() > 1e-9 {
                    return Err(Error::InvalidInterference(format!("gamma_{l} * {c} is not an integer")));
                }
            }
        }
        Ok(())
    }
}

/// An exact count `base^exponent`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BigPower {
    pub base: u64,
    pub exponent: BigUint,
}

impl BigPower {
    pub fn new(base: u64, exponent: BigUint) -> Self {
        Self { base, exponent }
    }

    pub fn from_u64(base: u64, exponent: u64) -> Self {
        Self::new(base, BigUint::from(exponent))
    }

    /// Natural logarithm of the value.
    pub fn ln(&self) -> f64 {
        if self.exponent.is_zero() || self.base == 1 {
            return 0.0;
        }
        if self.base == 0 {
            return f64::NEG_INFINITY;
        }
        self.exponent.to_f64().unwrap_or(f64::INFINITY) * (self.base as f64).ln()
    }

    pub fn log10(&self) -> f64 {
        self.ln() / std::f64::consts::LN_10
    }

    /// Exact value, if the exponent is small enough to expand.
    pub fn expand(&self) -> Option<BigUint> {
        let e = self.exponent.to_u32().filter(|&e| e < 10_000)?;
        Some(BigUint::from(self.base).pow(e))
    }

    /// Value as `u64` if it fits.
    pub fn to_u64(&self) -> Option<u64> {
        let e = self.exponent.to_u32()?;
        if self.base <= 1 || e == 0 {
            return Some(if e == 0 { 1 } else { self.base });
        }
        self.base.checked_pow(e)
    }

    /// Product of two counts, exact when both expand.
    pub fn checked_product(&self, other: &BigPower) -> Option<BigUint> {
        Some(self.expand()? * other.expand()?)
    }

    /// Compares values, exactly when both expand.
    pub fn value_cmp(&self, other: &BigPower) -> Ordering {
        if self.base == other.base {
            return self.exponent.cmp(&other.exponent);
        }
        match (self.expand(), other.expand()) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => self.ln().total_cmp(&other.ln()),
        }
    }

    /// Whether the value is at most `bound`.
    pub fn at_most(&self, bound: u64) -> bool {
        self.to_u64().is_some_and(|v| v <= bound)
    }
}

impl fmt::Display for BigPower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.base, self.exponent)
    }
}
