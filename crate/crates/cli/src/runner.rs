//! Runs experiments and collects their results as flat rows.

use anyhow::{anyhow, bail, Result};
use hdsched::analysis::{
    analytic_mean_delay, analytic_saturated_throughput, generate_random_samples, generate_typical_samples,
    ic_saturated_throughput, o_saturated_throughput, oracle_saturated_throughput, Typicality,
};
use hdsched::channel::LinkChannels;
use hdsched::policies::{LcVariant, Policy};
use hdsched::sim::{run_trials, Mode, SimConfig};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, Instance, Method, SweepValue};

pub const DEFAULT_SEED: u64 = 2025;
pub const DEFAULT_SATURATED_TRIALS: usize = 10_000;
pub const DEFAULT_QUEUED_TRIALS: usize = 1_000;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_QUEUED_HORIZON: usize = 1_000;
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

/// One CSV line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub sweep_value: String,
    pub policy: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub method: String,
}

/// Command-line settings that take precedence over the file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub budget: Option<u64>,
}

/// A `(point, policy, method)` combination that could not be evaluated.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub sweep_value: String,
    pub policy: String,
    pub method: String,
    pub message: String,
}

/// Everything one experiment produced, plus the settings actually used.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    pub budget: u64,
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
}

impl Experiment {
    pub fn resolved_seed(&self, o: &Overrides) -> u64 {
        o.seed.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    pub fn resolved_trials(&self, o: &Overrides) -> usize {
        o.trials.or(self.trials).unwrap_or(match self.mode {
            Mode::Saturated => DEFAULT_SATURATED_TRIALS,
            Mode::Queued => DEFAULT_QUEUED_TRIALS,
        })
    }

    pub fn resolved_horizon(&self, o: &Overrides) -> usize {
        o.horizon.or(self.horizon).unwrap_or(match self.mode {
            Mode::Saturated => 1,
            Mode::Queued => DEFAULT_QUEUED_HORIZON,
        })
    }

    pub fn resolved_budget(&self, o: &Overrides) -> u64 {
        o.budget.or(self.budget).unwrap_or(DEFAULT_BUDGET)
    }

    fn sim_config(&self, inst: &Instance, policy: Policy, o: &Overrides) -> SimConfig {
        let n = inst.table.len();
        SimConfig {
            table: inst.table.clone(),
            channels: vec![inst.channel.clone(); n],
            interference: inst.interference.clone(),
            policy,
            mode: self.mode,
            arrivals: inst.arrivals.clone(),
            horizon: self.resolved_horizon(o),
            trials: self.resolved_trials(o),
            seed: self.resolved_seed(o),
            budget: self.resolved_budget(o),
            lags: self.lags.clone(),
        }
    }
}

/// Runs every sweep point, policy and method; failures are recorded, not raised.
pub fn run_experiment(exp: &Experiment, o: &Overrides) -> Report {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for point in exp.sweep_points() {
        let label = point.as_ref().map(SweepValue::to_string).unwrap_or_default();
        let inst = match exp.instance(point.as_ref()) {
            Ok(i) => i,
            Err(e) => {
                failures.push(Failure {
                    sweep_value: label,
                    policy: String::new(),
                    method: String::new(),
                    message: format!("{e:#}"),
                });
                continue;
            }
        };
        for &policy in &exp.policies {
            let cfg = exp.sim_config(&inst, policy, o);
            for &method in &exp.methods {
                let row = |metric: &str, value: f64, stderr: Option<f64>| Row {
                    sweep_value: label.clone(),
                    policy: policy.to_string(),
                    metric: metric.to_string(),
                    value,
                    stderr,
                    method: method.to_string(),
                };
                match evaluate(exp, &cfg, method, &row) {
                    Ok(mut r) => rows.append(&mut r),
                    Err(e) => failures.push(Failure {
                        sweep_value: label.clone(),
                        policy: policy.to_string(),
                        method: method.to_string(),
                        message: format!("{e:#}"),
                    }),
                }
            }
        }
    }
    Report {
        name: exp.name.clone(),
        seed: exp.resolved_seed(o),
        trials: exp.resolved_trials(o),
        horizon: exp.resolved_horizon(o),
        budget: exp.resolved_budget(o),
        rows,
        failures,
    }
}

fn evaluate(
    exp: &Experiment,
    cfg: &SimConfig,
    method: Method,
    row: &dyn Fn(&str, f64, Option<f64>) -> Row,
) -> Result<Vec<Row>> {
    match (method, cfg.mode) {
        (Method::Simulation, _) => {
            let m = run_trials(cfg)?;
            let mut out = vec![row("throughput", m.throughput.mean, Some(m.throughput.stderr))];
            if cfg.mode == Mode::Queued {
                if let Some(d) = m.delay {
                    out.push(row("delay", d.mean, Some(d.stderr)));
                }
                out.push(row("mean_queue", m.mean_queue.iter().sum(), None));
                out.push(row("max_queue", m.max_queue as f64, None));
                for (lag, r) in m.correlations {
                    out.push(row(&format!("corr_lag{lag}"), r, None));
                }
            }
            Ok(out)
        }
        (Method::Analytic, Mode::Saturated) => Ok(vec![row("throughput", exact_throughput(cfg)?, None)]),
        (Method::Oracle, Mode::Saturated) => {
            let v = lc_variant(cfg.policy).ok_or_else(|| anyhow!("the oracle covers the LC policies only"))?;
            complete_only(cfg)?;
            let ch = LinkChannels::per_link(&cfg.channels, cfg.table.tau_max())?;
            Ok(vec![row("throughput", oracle_saturated_throughput(&cfg.table, &ch, v, cfg.budget)?, None)])
        }
        (Method::Typical | Method::Random, Mode::Queued) => {
            let count = exp.samples.unwrap_or(DEFAULT_SAMPLES);
            let slots = cfg.horizon + cfg.table.tau_max() as usize;
            let samples = if method == Method::Typical {
                let t =
                    Typicality { epsilon: exp.epsilon.unwrap_or(Typicality::default().epsilon), ..Default::default() };
                generate_typical_samples(&cfg.channels, &cfg.arrivals, slots, count, cfg.seed, t)?
            } else {
                generate_random_samples(&cfg.channels, &cfg.arrivals, slots, count, cfg.seed)?
            };
            Ok(vec![row("delay", analytic_mean_delay(cfg, &samples)?, None)])
        }
        (m, mode) => bail!("method `{m}` is not available in {mode:?} mode"),
    }
}

fn lc_variant(p: Policy) -> Option<LcVariant> {
    match p {
        Policy::LcEldr => Some(LcVariant::Eldr),
        Policy::LcErdmc => Some(LcVariant::Erdmc),
        _ => None,
    }
}

fn complete_only(cfg: &SimConfig) -> Result<()> {
    if !cfg.interference.is_complete() {
        bail!("exact evaluation of {} needs complete interference", cfg.policy);
    }
    Ok(())
}

/// Exact expected saturated throughput of `cfg.policy`.
pub fn exact_throughput(cfg: &SimConfig) -> Result<f64> {
    let ch = LinkChannels::per_link(&cfg.channels, cfg.table.tau_max())?;
    let v = match cfg.policy {
        Policy::R | Policy::H => {
            let s = cfg.scheduler()?;
            s.threshold_policy().expect("threshold policy").saturated_throughput()
        }
        p => {
            complete_only(cfg)?;
            match p {
                Policy::LcEldr | Policy::LcErdmc => {
                    analytic_saturated_throughput(&cfg.table, &ch, lc_variant(p).expect("LC"), cfg.budget)?
                }
                Policy::O => o_saturated_throughput(&cfg.table, &ch),
                // Saturated DQIC scores every link by its current rate alone.
                _ => ic_saturated_throughput(&ch),
            }
        }
    };
    Ok(v)
}
