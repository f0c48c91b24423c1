//! Seeded Monte-Carlo simulation.
//!
//! A trial starts `tau_max` slots before time zero with empty queues and
//! stationary channels, so every delayed read is defined from slot 0 on.
//! Warm-up slots schedule on instantaneous information, and only slots
//! `0..horizon` count toward the metrics. Trial `i` draws from a ChaCha8
//! stream `i` under the configured seed, so results are independent of the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, LinkChannels};
use crate::policies::{Policy, ScheduleDecision, Scheduler};
use crate::state::{ArrivalProcess, Network};
use crate::topology::{DelayTable, InterferenceSpec};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Infinite backlogs; every granted transmission is fully used.
    Saturated,
    /// Finite packet queues fed by the arrival processes.
    Queued,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub table: DelayTable,
    /// One chain per link.
    pub channels: Vec<ChannelModel>,
    pub interference: InterferenceSpec,
    pub policy: Policy,
    pub mode: Mode,
    /// One process per link; ignored when saturated.
    pub arrivals: Vec<ArrivalProcess>,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    /// Enumeration budget for the exact threshold policies.
    pub budget: u64,
    /// Lags at which to report the autocorrelation of link 0's queue.
    pub lags: Vec<u32>,
}

impl SimConfig {
    /// Saturated run on a complete-interference network sharing one chain.
    pub fn saturated(table: DelayTable, channel: ChannelModel, policy: Policy) -> Self {
        let n = table.len();
        Self {
            channels: vec![channel; n],
            interference: InterferenceSpec::complete(n),
            policy,
            mode: Mode::Saturated,
            arrivals: Vec::new(),
            horizon: 1,
            trials: 100_000,
            seed: 0,
            budget: 1_000_000_000,
            lags: Vec::new(),
            table,
        }
    }

    /// Queued run on a complete-interference network sharing one chain.
    pub fn queued(table: DelayTable, channel: ChannelModel, policy: Policy, arrivals: Vec<ArrivalProcess>) -> Self {
        Self { mode: Mode::Queued, arrivals, horizon: 1000, ..Self::saturated(table, channel, policy) }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_lags(mut self, lags: Vec<u32>) -> Self {
        self.lags = lags;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        let n = self.table.len();
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.channels.len() != n || self.interference.len() != n {
            return Err(Error::InvalidConfig("per-link settings do not match the table size".into()));
        }
        if self.mode == Mode::Queued && self.arrivals.len() != n {
            return Err(Error::InvalidConfig("queued mode needs one arrival process per link".into()));
        }
        for (l, ch) in self.channels.iter().enumerate() {
            self.interference
                .validate_rates(ch.states())
                .map_err(|e| Error::InvalidConfig(format!("link {l}: {e}")))?;
        }
        Ok(())
    }

    /// Binds the policy to the network.
    pub fn scheduler(&self) -> Result<Scheduler, Error> {
        self.validate()?;
        let channels = LinkChannels::per_link(&self.channels, self.table.tau_max())?;
        Scheduler::new(
            self.policy,
            self.table.clone(),
            channels,
            self.interference.clone(),
            self.mode == Mode::Saturated,
            self.budget,
        )
    }
}

/// Arrival streams and channel paths for slots `-tau_max .. horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelaySample {
    pub arrivals: Vec<Vec<u32>>,
    pub channels: Vec<Vec<usize>>,
}

impl DelaySample {
    /// Draws every link's path from its stationary law and its arrivals i.i.d.
    pub fn draw<R: Rng + ?Sized>(
        channels: &[ChannelModel],
        arrivals: &[ArrivalProcess],
        slots: usize,
        rng: &mut R,
    ) -> Result<Self, Error> {
        let paths = channels.iter().map(|c| c.sample_path(None, slots, rng)).collect::<Result<Vec<_>, _>>()?;
        let arr = arrivals.iter().map(|a| (0..slots).map(|_| a.sample(rng)).collect()).collect();
        Ok(Self { arrivals: arr, channels: paths })
    }

    pub fn slots(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

/// Totals from one trial.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialOutcome {
    pub delivered: u64,
    pub slots: usize,
    pub served_packets: u64,
    pub delay_sum: u64,
    pub max_queue: u64,
    pub queue_sum: Vec<u64>,
    /// Per lag: `(n, sum x, sum y, sum xy, sum x^2, sum y^2)` over `(Q_0[t], Q_0[t-lag])`.
    pub lag_stats: Vec<[f64; 6]>,
}

impl TrialOutcome {
    pub fn throughput(&self) -> f64 {
        self.delivered as f64 / self.slots as f64
    }

    /// Average delay of packets served at `t >= 0`.
    pub fn mean_delay(&self) -> Option<f64> {
        (self.served_packets > 0).then(|| self.delay_sum as f64 / self.served_packets as f64)
    }
}

/// Per-link service in a slot: `C_l` on success, `floor(gamma_l C_l)` on collision.
pub fn service(decision: &ScheduleDecision, rates: &[u32], interference: &InterferenceSpec) -> Vec<u32> {
    let mut s = vec![0; rates.len()];
    for &l in &decision.transmit {
        let collided = decision.transmit.iter().any(|&m| m != l && interference.interferes(l, m));
        s[l] = if collided { (interference.gamma(l) * rates[l] as f64).round() as u32 } else { rates[l] };
    }
    s
}

/// Replays one sample deterministically under `scheduler`.
pub fn replay(scheduler: &Scheduler, mode: Mode, sample: &DelaySample, lags: &[u32]) -> Result<TrialOutcome, Error> {
    let table = scheduler.table();
    let n = table.len();
    let tau_max = table.tau_max() as usize;
    let slots = sample.slots();
    if slots <= tau_max {
        return Err(Error::InvalidConfig("sample shorter than the warm-up".into()));
    }
    let max_lag = lags.iter().copied().max().unwrap_or(0) as usize;
    let mut net = Network::new(n, tau_max as u32, -(tau_max as i64));
    let mut out = TrialOutcome {
        slots: slots - tau_max,
        queue_sum: vec![0; n],
        lag_stats: vec![[0.0; 6]; lags.len()],
        ..TrialOutcome::default()
    };
    let mut q0 = Vec::with_capacity(if lags.is_empty() { 0 } else { slots });
    let mut c = vec![0usize; n];
    let mut rates = vec![0u32; n];
    let zeros = vec![0u32; n];
    let mut arrivals = vec![0u32; n];
    for k in 0..slots {
        let warm = k < tau_max;
        for l in 0..n {
            c[l] = sample.channels[l][k];
            rates[l] = scheduler.channels().rate(l, c[l]);
        }
        net.observe(&c);
        if mode == Mode::Saturated {
            if !warm {
                let d = scheduler.decide(net.history())?;
                out.delivered += service(&d, &rates, scheduler.interference()).iter().map(|&x| x as u64).sum::<u64>();
            }
            net.advance_slot(&zeros, &zeros);
            continue;
        }
        let d = if warm { scheduler.decide_warmup(net.history())? } else { scheduler.decide(net.history())? };
        let s = service(&d, &rates, scheduler.interference());
        for (a, stream) in arrivals.iter_mut().zip(&sample.arrivals) {
            *a = stream[k];
        }
        let served = net.advance_slot(&arrivals, &s);
        if !warm {
            out.delivered += served.iter().map(|&x| x as u64).sum::<u64>();
            let q = net.queue_lengths();
            for (sum, &ql) in out.queue_sum.iter_mut().zip(&q) {
                *sum += ql;
                out.max_queue = out.max_queue.max(ql);
            }
        }
        if !lags.is_empty() {
            q0.push(net.queue_lengths()[0] as f64);
        }
    }
    let (served, delay) = net.delay_totals();
    out.served_packets = served;
    out.delay_sum = delay;
    if !lags.is_empty() {
        let start = tau_max.max(max_lag);
        for (i, &lag) in lags.iter().enumerate() {
            let st = &mut out.lag_stats[i];
            for t in start..q0.len() {
                let (x, y) = (q0[t], q0[t - lag as usize]);
                st[0] += 1.0;
                st[1] += x;
                st[2] += y;
                st[3] += x * y;
                st[4] += x * x;
                st[5] += y * y;
            }
        }
    }
    Ok(out)
}

/// A mean with its standard error across trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(xs: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in xs {
            n += 1;
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
        }
        let stderr = if n > 1 { (m2 / (n - 1) as f64 / n as f64).sqrt() } else { f64::NAN };
        Self { mean, stderr, count: n }
    }

    /// Whether `value` lies within `k` standard errors.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }

    /// Whether two estimates agree within `k` combined standard errors.
    pub fn agrees(&self, other: &Estimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.stderr.hypot(other.stderr)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimMetrics {
    pub policy: Policy,
    pub trials: usize,
    pub seed: u64,
    /// Packets delivered per slot.
    pub throughput: Estimate,
    /// Per-packet queueing delay in slots, averaged per trial; queued mode only.
    pub delay: Option<Estimate>,
    pub mean_queue: Vec<f64>,
    pub max_queue: u64,
    /// `(lag, corr(Q_0[t], Q_0[t - lag]))`.
    pub correlations: Vec<(u32, f64)>,
}

/// Draws the sample for trial `index`.
pub fn trial_sample(config: &SimConfig, index: u64) -> Result<DelaySample, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let slots = config.table.tau_max() as usize + config.horizon;
    let arrivals: &[ArrivalProcess] = if config.mode == Mode::Queued { &config.arrivals } else { &[] };
    DelaySample::draw(&config.channels, arrivals, slots, &mut rng)
}

/// Runs every trial and aggregates in trial order.
pub fn run_trials(config: &SimConfig) -> Result<SimMetrics, Error> {
    let scheduler = config.scheduler()?;
    run_with(config, &scheduler, true)
}

/// Same as [`run_trials`] on one thread.
pub fn run_trials_sequential(config: &SimConfig) -> Result<SimMetrics, Error> {
    let scheduler = config.scheduler()?;
    run_with(config, &scheduler, false)
}

/// Runs the trials with an already-bound scheduler.
pub fn run_with(config: &SimConfig, scheduler: &Scheduler, parallel: bool) -> Result<SimMetrics, Error> {
    let one = |i: usize| -> Result<TrialOutcome, Error> {
        let sample = trial_sample(config, i as u64)?;
        replay(scheduler, config.mode, &sample, &config.lags)
    };
    let outcomes: Vec<TrialOutcome> = if parallel {
        (0..config.trials).into_par_iter().map(one).collect::<Result<_, _>>()?
    } else {
        (0..config.trials).map(one).collect::<Result<_, _>>()?
    };
    Ok(aggregate(config, &outcomes))
}

fn aggregate(config: &SimConfig, outcomes: &[TrialOutcome]) -> SimMetrics {
    let n = config.table.len();
    let throughput = Estimate::from_samples(outcomes.iter().map(TrialOutcome::throughput));
    let delay = (config.mode == Mode::Queued)
        .then(|| Estimate::from_samples(outcomes.iter().filter_map(TrialOutcome::mean_delay)));
    let slots: f64 = outcomes.iter().map(|o| o.slots as f64).sum();
    let mean_queue = (0..n).map(|l| outcomes.iter().map(|o| o.queue_sum[l] as f64).sum::<f64>() / slots).collect();
    let correlations = config
        .lags
        .iter()
        .enumerate()
        .map(|(i, &lag)| {
            let mut s = [0.0; 6];
            for o in outcomes {
                for (a, b) in s.iter_mut().zip(o.lag_stats[i]) {
                    *a += b;
                }
            }
            (lag, pearson(&s))
        })
        .collect();
    SimMetrics {
        policy: config.policy,
        trials: config.trials,
        seed: config.seed,
        throughput,
        delay,
        mean_queue,
        max_queue: outcomes.iter().map(|o| o.max_queue).max().unwrap_or(0),
        correlations,
    }
}

fn pearson(s: &[f64; 6]) -> f64 {
    let [n, sx, sy, sxy, sxx, syy] = *s;
    let cov = sxy / n - (sx / n) * (sy / n);
    let vx = sxx / n - (sx / n).powi(2);
    let vy = syy / n - (sy / n).powi(2);
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0)
}

/// Runs queued trials and reports whether every queue stayed below `queue_bound`.
pub fn stability_probe(config: &SimConfig, queue_bound: u64) -> Result<bool, Error> {
    if config.mode != Mode::Queued {
        return Err(Error::InvalidConfig("stability probe needs queued mode".into()));
    }
    Ok(run_trials(config)?.max_queue < queue_bound)
}
