use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hdsched::analysis::delay_evaluation_complexity;
use hdsched::channel::{ChannelModel, ChannelProfile, LinkChannels};
use hdsched::policies::{Policy, Scheduler};
use hdsched::presets::{self, Preset, NAMES};
use hdsched::sim::Mode;
use hdsched::state::{ArrivalKind, NsiHistory};
use hdsched::topology::{DelayTable, InterferenceSpec, ThresholdVariant};
use hdsched_cli::config::{ArrivalSpec, ChannelSpec, DelaySource, Experiment, ExperimentFile, Method};
use hdsched_cli::output::{csv_path, csv_string, write_atomic, write_report};
use hdsched_cli::runner::{run_experiment, Overrides, Report};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "hdsched", version, about = "Link scheduling with heterogeneously delayed network-state information")]
struct Cli {
    /// Print every preset name and exit.
    #[arg(long)]
    list_presets: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// List presets, or print one.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
    /// Count threshold vectors and sample paths for the R and H policies.
    Complexity {
        #[command(flatten)]
        net: Network,
        /// Channel states per link.
        #[arg(long, default_value_t = 2)]
        states: u32,
        /// Also count the delay-evaluation realizations over this horizon.
        #[arg(long)]
        horizon: Option<u64>,
        /// Largest per-slot arrival count, for the delay-evaluation count.
        #[arg(long, default_value_t = 1)]
        a_max: u64,
    },
    /// Exact saturated throughput of each policy.
    Analyze {
        #[command(flatten)]
        net: Network,
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<Policy>>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo simulation, from an experiment file or from flags.
    Simulate {
        /// TOML file with `[[experiment]]` tables.
        #[arg(long, conflicts_with_all = ["preset", "delays"])]
        config: Option<PathBuf>,
        #[command(flatten)]
        net: Network,
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<Policy>>,
        #[arg(long, value_parser = parse_mode, default_value = "saturated")]
        mode: Mode,
        /// Per-link arrival rate in queued mode.
        #[arg(long, default_value_t = 0.25)]
        rate: f64,
        #[arg(long, value_parser = parse_kind, default_value = "poisson")]
        arrivals: ArrivalKind,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        lags: Vec<u32>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Time one scheduling decision per policy on a random network.
    Bench {
        #[arg(long, default_value_t = 20)]
        links: usize,
        #[arg(long, default_value_t = 30)]
        max_delay: u32,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 2025)]
        seed: u64,
    },
}

#[derive(Args)]
struct Network {
    /// Delay-table preset, e.g. MD or TABLE3(2).
    #[arg(long)]
    preset: Option<String>,
    /// Explicit delay table as JSON rows, e.g. "[[0,1],[2,0]]".
    #[arg(long, conflicts_with = "preset")]
    delays: Option<String>,
    /// Channel profile.
    #[arg(long)]
    profile: Option<ChannelProfile>,
    /// Two-state crossover probability.
    #[arg(long, conflicts_with = "profile")]
    crossover: Option<f64>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Enumeration budget for the exact methods.
    #[arg(long)]
    budget: Option<u64>,
    /// Output file (.csv) or directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s.to_ascii_lowercase().as_str() {
        "saturated" => Ok(Mode::Saturated),
        "queued" => Ok(Mode::Queued),
        _ => Err(format!("unknown mode `{s}`")),
    }
}

fn parse_kind(s: &str) -> Result<ArrivalKind, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "bernoulli" => Ok(ArrivalKind::Bernoulli),
        "poisson" => Ok(ArrivalKind::Poisson),
        "truncated_poisson" => Ok(ArrivalKind::TruncatedPoisson),
        _ => Err(format!("unknown arrival kind `{s}`")),
    }
}

impl Network {
    fn source(&self) -> Result<DelaySource> {
        match (&self.preset, &self.delays) {
            (Some(p), _) => {
                presets::delay_preset(p)?;
                Ok(DelaySource::Preset(p.clone()))
            }
            (None, Some(d)) => Ok(DelaySource::Table(serde_json::from_str(d).context("parsing --delays")?)),
            (None, None) => bail!("give --preset or --delays"),
        }
    }

    fn table(&self) -> Result<DelayTable> {
        match self.source()? {
            DelaySource::Preset(p) => Ok(presets::delay_preset(&p)?),
            DelaySource::Table(t) => Ok(t),
        }
    }

    fn channel(&self) -> ChannelSpec {
        ChannelSpec { profile: self.profile, crossover: self.crossover, ..ChannelSpec::default() }
    }

    fn label(&self) -> String {
        self.preset.clone().unwrap_or_else(|| "custom".into())
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns `Ok(false)` when some evaluations failed but the batch completed.
fn run(cli: Cli) -> Result<bool> {
    if cli.list_presets {
        for n in NAMES {
            println!("{n}");
        }
        return Ok(true);
    }
    let Some(command) = cli.command else {
        bail!("no command given; see --help");
    };
    match command {
        Command::Presets { show } => presets_cmd(show.as_deref()),
        Command::Complexity { net, states, horizon, a_max } => complexity(&net, states, horizon, a_max),
        Command::Analyze { net, policies, common } => analyze(&net, policies, &common),
        Command::Simulate { config, net, policies, mode, rate, arrivals, horizon, lags, trials, common } => {
            let overrides = Overrides { trials, horizon, seed: common.seed, budget: common.budget };
            let file = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    ExperimentFile::parse(&text).with_context(|| format!("in {}", path.display()))?
                }
                None => {
                    let mut e = Experiment::new(net.label(), net.source()?, policies.unwrap_or_else(default_policies));
                    e.channel = net.channel();
                    e.mode = mode;
                    e.lags = lags;
                    if mode == Mode::Queued {
                        e.arrivals = Some(ArrivalSpec { kind: arrivals, rates: vec![rate], cap: None });
                    }
                    let f = ExperimentFile { experiments: vec![e] };
                    f.validate()?;
                    f
                }
            };
            run_batch(&file, &overrides, common.out.as_deref())
        }
        Command::Bench { links, max_delay, runs, seed } => bench(links, max_delay, runs, seed),
    }
}

fn default_policies() -> Vec<Policy> {
    vec![Policy::Dqic1, Policy::Dqic2, Policy::O, Policy::Ic, Policy::LcEldr, Policy::LcErdmc]
}

fn presets_cmd(show: Option<&str>) -> Result<bool> {
    match show {
        None => {
            for n in NAMES {
                let kind = match n {
                    "TABLE3(x)" => "delays".to_string(),
                    _ => match presets::preset(n)? {
                        Preset::Delays(t) => format!("delays, {} links, tau_max {}", t.len(), t.tau_max()),
                        Preset::Channel(p) => format!("channel, crossover {}", p.crossover()),
                    },
                };
                println!("{n:<10} {kind}");
            }
        }
        Some(name) => match presets::preset(name)? {
            Preset::Delays(t) => {
                for row in t.rows() {
                    let cells: Vec<String> = row.iter().map(|d| format!("{d:>3}")).collect();
                    println!("{}", cells.join(" "));
                }
            }
            Preset::Channel(p) => {
                let m = ChannelModel::from_profile(p);
                println!("states {:?}", m.states());
                for i in 0..m.num_states() {
                    let row: Vec<String> = (0..m.num_states()).map(|j| format!("{:.3}", m.p(i, j))).collect();
                    println!("{}", row.join(" "));
                }
            }
        },
    }
    Ok(true)
}

fn complexity(net: &Network, states: u32, horizon: Option<u64>, a_max: u64) -> Result<bool> {
    let t = net.table()?;
    println!("variant,threshold_vectors,sample_paths,log10_product");
    for v in [ThresholdVariant::R, ThresholdVariant::H] {
        let tv = t.complexity_threshold_vectors(states, v);
        let sp = t.complexity_sample_paths(states, v);
        println!("{v:?},{tv},{sp},{:.3}", tv.log10() + sp.log10());
    }
    if let Some(h) = horizon {
        let d = delay_evaluation_complexity(t.len() as u64, a_max, states as u64, t.tau_max() as u64, h);
        println!("delay_evaluation,{d},,{:.3}", d.log10());
    }
    Ok(true)
}

fn analyze(net: &Network, policies: Option<Vec<Policy>>, common: &Common) -> Result<bool> {
    let policies = policies.unwrap_or_else(|| Policy::ALL.to_vec());
    let mut exact = Experiment::new(net.label(), net.source()?, policies.clone());
    exact.channel = net.channel();
    exact.methods = vec![Method::Analytic];
    let lc: Vec<Policy> = policies.into_iter().filter(|p| matches!(p, Policy::LcEldr | Policy::LcErdmc)).collect();
    let mut experiments = vec![exact.clone()];
    if !lc.is_empty() {
        experiments.push(Experiment { policies: lc, methods: vec![Method::Oracle], ..exact });
    }
    let overrides = Overrides { seed: common.seed, budget: common.budget, ..Overrides::default() };
    let mut rows = Vec::new();
    let mut ok = true;
    for e in &experiments {
        let r = run_experiment(e, &overrides);
        ok &= report_failures(&r);
        rows.extend(r.rows);
    }
    let text = csv_string(&rows)?;
    match &common.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(ok)
}

fn report_failures(r: &Report) -> bool {
    for f in &r.failures {
        eprintln!("warning: experiment `{}`: {} {} at `{}`: {}", r.name, f.policy, f.method, f.sweep_value, f.message);
    }
    r.failures.is_empty()
}

fn run_batch(file: &ExperimentFile, overrides: &Overrides, out: Option<&Path>) -> Result<bool> {
    let single = file.experiments.len() == 1;
    let mut ok = true;
    for e in &file.experiments {
        let start = Instant::now();
        let report = run_experiment(e, overrides);
        ok &= report_failures(&report);
        match out {
            Some(dir) => {
                let path = csv_path(dir, &e.name, single);
                write_report(e, &report, &path)?;
                eprintln!("{}: {} rows -> {} ({:.1?})", e.name, report.rows.len(), path.display(), start.elapsed());
            }
            None => {
                if !single {
                    println!("# {}", e.name);
                }
                print!("{}", csv_string(&report.rows)?);
            }
        }
    }
    Ok(ok)
}

fn bench(links: usize, max_delay: u32, runs: usize, seed: u64) -> Result<bool> {
    if links == 0 || max_delay == 0 || runs == 0 {
        bail!("links, max-delay and runs must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<u32>> = (0..links)
        .map(|i| (0..links).map(|j| if i == j { 0 } else { rng.random_range(1..=max_delay) }).collect())
        .collect();
    let table = DelayTable::new(rows)?;
    let model = ChannelModel::from_profile(ChannelProfile::Vsvc);
    let channels = LinkChannels::shared(&model, links, table.tau_max())?;
    let depth = table.tau_max() as usize + 1;
    let mut history = NsiHistory::new(links, depth, 0);
    for _ in 0..depth {
        let q: Vec<u64> = (0..links).map(|_| rng.random_range(0..50)).collect();
        let c: Vec<usize> = (0..links).map(|_| rng.random_range(0..model.num_states())).collect();
        history.record(&q, &c);
    }
    println!("policy,median_us,p90_us");
    for p in [Policy::LcEldr, Policy::LcErdmc, Policy::Dqic1, Policy::Dqic2, Policy::O, Policy::Ic] {
        let s = Scheduler::new(p, table.clone(), channels.clone(), InterferenceSpec::complete(links), false, 0)?;
        let mut times: Vec<Duration> = (0..runs)
            .map(|_| {
                let start = Instant::now();
                std::hint::black_box(s.decide(&history)).map(|_| start.elapsed())
            })
            .collect::<Result<_, _>>()?;
        times.sort_unstable();
        let us = |d: Duration| d.as_secs_f64() * 1e6;
        println!("{p},{:.1},{:.1}", us(times[runs / 2]), us(times[runs * 9 / 10]));
    }
    Ok(true)
}
