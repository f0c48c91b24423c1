//! Experiment files: one TOML document holding any number of `[[experiment]]` tables.

use std::collections::BTreeSet;
use std::fmt;

use anyhow::{bail, Context, Result};
use hdsched::channel::{ChannelModel, ChannelProfile};
use hdsched::policies::Policy;
use hdsched::presets::{self, Preset};
use hdsched::sim::Mode;
use hdsched::state::{ArrivalKind, ArrivalProcess};
use hdsched::topology::{DelayTable, InterferenceSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(rename = "experiment", default)]
    pub experiments: Vec<Experiment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub delays: DelaySource,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrivals: Option<ArrivalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interference: Option<InterferenceConfig>,
    pub policies: Vec<Policy>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lags: Vec<u32>,
    /// Samples per estimate for the sample-replay methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Typicality band for the `typical` method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn default_mode() -> Mode {
    Mode::Saturated
}

fn default_methods() -> Vec<Method> {
    vec![Method::Simulation]
}

/// A preset name (possibly containing the sweep variable) or an explicit matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelaySource {
    Preset(String),
    Table(DelayTable),
}

/// A named profile, a two-state crossover, or a full transition matrix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ChannelProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossover: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
}

impl ChannelSpec {
    pub fn from_profile(profile: ChannelProfile) -> Self {
        Self { profile: Some(profile), ..Self::default() }
    }

    pub fn model(&self) -> Result<ChannelModel> {
        let states = self.states.clone().unwrap_or_else(|| vec![1, 2]);
        let model = match (self.profile, self.crossover, &self.transition) {
            (Some(p), None, None) => ChannelModel::from_profile(p),
            (None, Some(c), None) => {
                if states.len() != 2 {
                    bail!("a crossover needs exactly two states");
                }
                ChannelModel::new(states, vec![vec![1.0 - c, c], vec![c, 1.0 - c]])?
            }
            (None, None, Some(t)) => ChannelModel::new(states, t.clone())?,
            (None, None, None) => ChannelModel::from_profile(ChannelProfile::Vsvc),
            _ => bail!("give only one of profile, crossover or transition"),
        };
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    pub kind: ArrivalKind,
    /// One rate per link, or a single rate for every link.
    pub rates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceConfig {
    /// Links each link collides with.
    pub sets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Simulation,
    Analytic,
    Oracle,
    /// Replay of typical samples.
    Typical,
    /// Replay of unfiltered samples.
    Random,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Simulation => "simulation",
            Self::Analytic => "analytic",
            Self::Oracle => "oracle",
            Self::Typical => "typical",
            Self::Random => "random",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<SweepValue>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    /// Substituted for `x` in a delay preset name such as `TABLE3(x)`.
    X,
    /// Arrival rate of every link.
    Rate,
    /// Channel profile name.
    Profile,
    /// Delay preset name.
    Delays,
    /// Two-state crossover probability.
    Crossover,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl SweepValue {
    fn as_f64(&self) -> Result<f64> {
        match self {
            Self::Int(i) => Ok(*i as f64),
            Self::Float(x) => Ok(*x),
            Self::Text(s) => bail!("sweep value `{s}` is not a number"),
        }
    }
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Int(i) => write!(f, "{i}"),
            Self::Float(x) => write!(f, "{x}"),
            Self::Text(s) => f.write_str(s),
        }
    }
}

/// An experiment with the sweep value substituted in.
#[derive(Clone, Debug)]
pub struct Instance {
    pub table: DelayTable,
    pub channel: ChannelModel,
    pub arrivals: Vec<ArrivalProcess>,
    pub interference: InterferenceSpec,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).context("invalid experiment file")?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            bail!("no [[experiment]] tables");
        }
        let mut names = BTreeSet::new();
        for e in &self.experiments {
            if !names.insert(e.name.as_str()) {
                bail!("experiment name `{}` is used twice", e.name);
            }
            e.validate()?;
        }
        Ok(())
    }
}

impl Experiment {
    /// A single-point experiment with default settings.
    pub fn new(name: impl Into<String>, delays: DelaySource, policies: Vec<Policy>) -> Self {
        Self {
            name: name.into(),
            mode: Mode::Saturated,
            delays,
            channel: ChannelSpec::default(),
            arrivals: None,
            interference: None,
            policies,
            methods: default_methods(),
            trials: None,
            horizon: None,
            seed: None,
            budget: None,
            lags: Vec::new(),
            samples: None,
            epsilon: None,
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = || format!("experiment `{}`", self.name);
        if self.name.trim().is_empty() {
            bail!("experiment with an empty name");
        }
        if self.policies.is_empty() {
            bail!("{}: no policies", ctx());
        }
        if self.methods.is_empty() {
            bail!("{}: no methods", ctx());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                bail!("{}: sweep over `{:?}` has no values", ctx(), s.variable);
            }
        }
        if self.mode == Mode::Queued && self.arrivals.is_none() {
            bail!("{}: queued mode needs arrivals", ctx());
        }
        for v in self.sweep_points() {
            self.instance(v.as_ref()).with_context(ctx)?;
        }
        Ok(())
    }

    /// The sweep values, or a single unnamed point.
    pub fn sweep_points(&self) -> Vec<Option<SweepValue>> {
        match &self.sweep {
            Some(s) => s.values.iter().cloned().map(Some).collect(),
            None => vec![None],
        }
    }

    fn variable(&self) -> Option<SweepVariable> {
        self.sweep.as_ref().map(|s| s.variable)
    }

    pub fn instance(&self, value: Option<&SweepValue>) -> Result<Instance> {
        let var = value.and(self.variable());
        let table = match (&self.delays, var) {
            (_, Some(SweepVariable::Delays)) => presets::delay_preset(&value.expect("sweep value").to_string())?,
            (DelaySource::Preset(name), Some(SweepVariable::X)) => {
                let x = value.expect("sweep value").to_string();
                presets::delay_preset(&name.to_ascii_uppercase().replace('X', &x))?
            }
            (DelaySource::Preset(name), _) => presets::delay_preset(name)?,
            (DelaySource::Table(t), _) => t.clone(),
        };
        let channel = match var {
            Some(SweepVariable::Profile) => match presets::preset(&value.expect("sweep value").to_string())? {
                Preset::Channel(p) => ChannelModel::from_profile(p),
                Preset::Delays(_) => bail!("`{}` is not a channel profile", value.expect("sweep value")),
            },
            Some(SweepVariable::Crossover) => {
                ChannelSpec { crossover: Some(value.expect("sweep value").as_f64()?), ..ChannelSpec::default() }
                    .model()?
            }
            _ => self.channel.model()?,
        };
        let n = table.len();
        let arrivals = match &self.arrivals {
            None => Vec::new(),
            Some(a) => {
                let rates: Vec<f64> = match var {
                    Some(SweepVariable::Rate) => vec![value.expect("sweep value").as_f64()?; n],
                    _ if a.rates.len() == 1 => vec![a.rates[0]; n],
                    _ => a.rates.clone(),
                };
                if rates.len() != n {
                    bail!("{} arrival rates for {n} links", rates.len());
                }
                rates
                    .into_iter()
                    .map(|r| ArrivalProcess::new(a.kind, r, a.cap.unwrap_or(8)))
                    .collect::<Result<_, _>>()?
            }
        };
        let interference = match &self.interference {
            None => InterferenceSpec::complete(n),
            Some(c) => InterferenceSpec::new(c.sets.clone(), c.gamma.clone().unwrap_or_else(|| vec![0.0; n]))?,
        };
        if interference.len() != n {
            bail!("interference lists {} links, table has {n}", interference.len());
        }
        Ok(Instance { table, channel, arrivals, interference })
    }
}
