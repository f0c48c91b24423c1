//! Per-link Markov channel models.
//!
//! A link's rate evolves as a finite discrete-time Markov chain over integer
//! rates `c_1 < ... < c_M`. Schedulers only ever see a delayed sample of the
//! chain, so the interesting quantities are n-step transition matrices and
//! the expected current rate given an old observation.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::Error;

const ROW_SUM_TOL: f64 = 1e-12;

/// A finite-state Markov channel with integer rate states.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelModel {
    states: Vec<u32>,
    transition: DMatrix<f64>,
}

impl ChannelModel {
    /// Builds a model from ascending rates and a row-stochastic matrix.
    pub fn new(states: Vec<u32>, transition: Vec<Vec<f64>>) -> Result<Self, Error> {
        let m = states.len();
        if m == 0 {
            return Err(Error::InvalidChannel("empty state space".into()));
        }
        if states.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidChannel("states must be strictly increasing".into()));
        }
        if transition.len() != m || transition.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidChannel(format!("transition matrix must be {m}x{m}")));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidChannel(format!("row {i} has an entry outside [0,1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidChannel(format!("row {i} sums to {sum}")));
            }
        }
        let transition = DMatrix::from_fn(m, m, |i, j| transition[i][j]);
        Ok(Self { states, transition })
    }

    /// Symmetric two-state chain on rates `{1, 2}` flipping with probability `crossover`.
    pub fn two_state(crossover: f64) -> Result<Self, Error> {
        let q = 1.0 - crossover;
        Self::new(vec![1, 2], vec![vec![q, crossover], vec![crossover, q]])
    }

    pub fn from_profile(profile: ChannelProfile) -> Self {
        Self::two_state(profile.crossover()).expect("preset crossover is a probability")
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn rate(&self, index: usize) -> u32 {
        self.states[index]
    }

    /// Index of a rate value in the state space.
    pub fn index_of(&self, rate: u32) -> Option<usize> {
        self.states.iter().position(|&c| c == rate)
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// One-step transition probability `p_ij`.
    pub fn p(&self, from: usize, to: usize) -> f64 {
        self.transition[(from, to)]
    }

    /// `P^n` by repeated squaring; `n = 0` gives the identity.
    pub fn n_step_matrix(&self, n: u32) -> DMatrix<f64> {
        let m = self.num_states();
        let mut result = DMatrix::identity(m, m);
        let mut base = self.transition.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Whether the chain is irreducible and aperiodic.
    ///
    /// A non-negative matrix is primitive iff its `(M-1)^2 + 1` power is
    /// strictly positive (Wielandt), checked on the boolean support.
    pub fn is_ergodic(&self) -> bool {
        let m = self.num_states();
        let support: Vec<Vec<bool>> = (0..m).map(|i| (0..m).map(|j| self.transition[(i, j)] > 0.0).collect()).collect();
        let mut reach = support.clone();
        let power = (m - 1) * (m - 1) + 1;
        for _ in 1..power {
            let mut next = vec![vec![false; m]; m];
            for i in 0..m {
                for k in 0..m {
                    if reach[i][k] {
                        for j in 0..m {
                            next[i][j] |= support[k][j];
                        }
                    }
                }
            }
            reach = next;
        }
        reach.iter().all(|row| row.iter().all(|&b| b))
    }

    /// Stationary distribution from `(P^T - I) pi = 0` with one row replaced by `sum(pi) = 1`.
    pub fn stationary(&self) -> Result<Vec<f64>, Error> {
        if !self.is_ergodic() {
            return Err(Error::NonErgodic);
        }
        let m = self.num_states();
        let mut a = self.transition.transpose() - DMatrix::<f64>::identity(m, m);
        let mut b = nalgebra::DVector::<f64>::zeros(m);
        for j in 0..m {
            a[(m - 1, j)] = 1.0;
        }
        b[m - 1] = 1.0;
        let pi = a.lu().solve(&b).ok_or(Error::NonErgodic)?;
        Ok(pi.iter().map(|&x| x.max(0.0)).collect())
    }

    /// Long-run mean rate `sum_j pi_j c_j`.
    pub fn stationary_mean(&self) -> Result<f64, Error> {
        let pi = self.stationary()?;
        Ok(pi.iter().zip(&self.states).map(|(p, &c)| p * c as f64).sum())
    }

    /// `E[C[t] | C[t - tau] = c_i]`.
    pub fn cond_expected_rate(&self, observed: usize, tau: u32) -> f64 {
        if tau == 0 {
            return self.states[observed] as f64;
        }
        let p = self.n_step_matrix(tau);
        expected_row(&p, observed, &self.states)
    }

    /// Draws the successor of `state`.
    pub fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        draw(self.transition.row(state).iter().copied(), rng)
    }

    /// Draws a state from `dist`.
    pub fn draw_from<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
        draw(dist.iter().copied(), rng)
    }

    /// A sample path of `length` state indices.
    ///
    /// The first state is `initial`, or a stationary draw when `initial` is `None`.
    pub fn sample_path<R: Rng + ?Sized>(
        &self,
        initial: Option<usize>,
        length: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, Error> {
        let mut path = Vec::with_capacity(length);
        if length == 0 {
            return Ok(path);
        }
        let first = match initial {
            Some(i) if i < self.num_states() => i,
            Some(i) => return Err(Error::InvalidChannel(format!("initial state {i} out of range"))),
            None => Self::draw_from(&self.stationary()?, rng),
        };
        path.push(first);
        let mut s = first;
        for _ in 1..length {
            s = self.step(s, rng);
            path.push(s);
        }
        Ok(path)
    }
}

fn expected_row(p: &DMatrix<f64>, row: usize, states: &[u32]) -> f64 {
    states.iter().enumerate().map(|(j, &c)| p[(row, j)] * c as f64).sum()
}

fn draw<R: Rng + ?Sized>(probs: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, p) in probs.enumerate() {
        acc += p;
        if p > 0.0 {
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    last
}

/// Cached `P^n` and conditional means for one chain, keyed by `n`.
#[derive(Clone, Debug)]
pub struct StepTable {
    model: ChannelModel,
    powers: Vec<DMatrix<f64>>,
    means: Vec<Vec<f64>>,
    pi: Option<Vec<f64>>,
}

impl StepTable {
    pub fn new(model: ChannelModel, max_steps: u32) -> Self {
        let m = model.num_states();
        let mut powers = Vec::with_capacity(max_steps as usize + 1);
        let mut current = DMatrix::identity(m, m);
        for n in 0..=max_steps {
            if n > 0 {
                current = model.n_step_matrix(n);
            }
            powers.push(current.clone());
        }
        let means = powers.iter().map(|p| (0..m).map(|i| expected_row(p, i, model.states())).collect()).collect();
        let pi = model.stationary().ok();
        Self { model, powers, means, pi }
    }

    /// Stationary law, if the chain is ergodic.
    pub fn stationary(&self) -> Option<&[f64]> {
        self.pi.as_deref()
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn max_steps(&self) -> u32 {
        self.powers.len() as u32 - 1
    }

    /// `P^n[i][j]`.
    pub fn prob(&self, n: u32, from: usize, to: usize) -> f64 {
        self.powers[n as usize][(from, to)]
    }

    /// `E[C[t] | C[t - n] = c_i]`.
    pub fn mean(&self, n: u32, observed: usize) -> f64 {
        self.means[n as usize][observed]
    }
}

/// One [`StepTable`] per link.
#[derive(Clone, Debug)]
pub struct LinkChannels {
    tables: Vec<StepTable>,
}

impl LinkChannels {
    /// The same ergodic chain on every link, with powers up to `max_delay`.
    pub fn shared(model: &ChannelModel, links: usize, max_delay: u32) -> Result<Self, Error> {
        Self::per_link(&vec![model.clone(); links], max_delay)
    }

    /// One ergodic chain per link.
    pub fn per_link(models: &[ChannelModel], max_delay: u32) -> Result<Self, Error> {
        let tables: Vec<StepTable> = models.iter().map(|m| StepTable::new(m.clone(), max_delay)).collect();
        if tables.iter().any(|t| t.pi.is_none()) {
            return Err(Error::NonErgodic);
        }
        Ok(Self { tables })
    }

    /// Stationary law of link `l`.
    pub fn stationary(&self, l: usize) -> &[f64] {
        self.tables[l].pi.as_deref().expect("checked ergodic")
    }

    pub fn max_steps(&self) -> u32 {
        self.tables.iter().map(|t| t.max_steps()).min().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn link(&self, l: usize) -> &StepTable {
        &self.tables[l]
    }

    pub fn model(&self, l: usize) -> &ChannelModel {
        self.tables[l].model()
    }

    pub fn rate(&self, l: usize, state: usize) -> u32 {
        self.tables[l].model().rate(state)
    }

    /// `E[C_l[t] | C_l[t - n] = c_i]`.
    pub fn mean(&self, l: usize, n: u32, observed: usize) -> f64 {
        self.tables[l].mean(n, observed)
    }

    /// `P_l^n[i][j]`.
    pub fn prob(&self, l: usize, n: u32, from: usize, to: usize) -> f64 {
        self.tables[l].prob(n, from, to)
    }
}

/// Named crossover profiles for the two-state `{1, 2}` chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChannelProfile {
    Vsvc,
    Svc,
    Mvc,
    Fvc,
    Vfvc,
}

impl ChannelProfile {
    pub const ALL: [ChannelProfile; 5] = [Self::Vsvc, Self::Svc, Self::Mvc, Self::Fvc, Self::Vfvc];

    pub fn crossover(self) -> f64 {
        match self {
            Self::Vsvc => 0.1,
            Self::Svc => 0.3,
            Self::Mvc => 0.5,
            Self::Fvc => 0.7,
            Self::Vfvc => 0.9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Vsvc => "VSVC",
            Self::Svc => "SVC",
            Self::Mvc => "MVC",
            Self::Fvc => "FVC",
            Self::Vfvc => "VFVC",
        }
    }
}

impl fmt::Display for ChannelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}
