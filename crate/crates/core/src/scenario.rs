//! TOML scenario files.
//!
//! ```toml
//! version = 1
//! name = "example"
//! scheme = "seven_op"          # seven_op | five_op_bp | five_op_priority | routing
//! pressure = "inter_virtual"   # virtual | inter_virtual
//! seed = 1
//! horizon = 100000             # slots, or seconds with rate adaptation
//! theta = 0.45                 # scales arrivals.rates
//!
//! [channel]
//! support = [1, 2]
//! mode = "iid"                 # iid | periodic | markov
//! frequencies = [0.5, 0.5]
//! quality = [{ p = [0.0, 0.5, 0.5, 0.0] }, { independent = [1.0, 1.0] }]
//!
//! [arrivals]
//! rates = [1.0, 1.0]
//! distribution = "bernoulli"   # bernoulli | batch | poisson_time
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{
    ArrivalDistribution, ArrivalProcess, ChannelQualityProcess, QualityMode, ReceptionVector,
    DEFAULT_BATCH_CAP,
};
use crate::codec::DEFAULT_PAYLOAD_LEN;
use crate::error::ScenarioError;
use crate::rateadapt::McsCombo;
use crate::spn::PressureMode;
use crate::vrnet::Topology;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SevenOp,
    FiveOpBp,
    FiveOpPriority,
    Routing,
}

impl Scheme {
    pub const ALL: [Scheme; 4] =
        [Scheme::SevenOp, Scheme::FiveOpBp, Scheme::FiveOpPriority, Scheme::Routing];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::SevenOp => "seven_op",
            Scheme::FiveOpBp => "five_op_bp",
            Scheme::FiveOpPriority => "five_op_priority",
            Scheme::Routing => "routing",
        }
    }

    pub fn topology(self) -> Topology {
        match self {
            Scheme::SevenOp => Topology::SevenOp,
            _ => Topology::FiveOp,
        }
    }

    /// Scheduled by the deficit max-weight rule on virtual counters.
    pub fn uses_dmw(self) -> bool {
        matches!(self, Scheme::SevenOp | Scheme::FiveOpBp)
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Iid,
    Periodic,
    Markov,
}

/// One channel quality: a full reception vector or independent per-receiver success.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceptionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independent: Option<[f64; 2]>,
}

impl ReceptionSpec {
    pub fn vector(p: [f64; 4]) -> Self {
        Self { p: Some(p), independent: None }
    }

    pub fn independent(q1: f64, q2: f64) -> Self {
        Self { p: None, independent: Some([q1, q2]) }
    }

    fn build(&self, field: &str) -> Result<ReceptionVector, ScenarioError> {
        match (self.p, self.independent) {
            (Some(p), None) => ReceptionVector::from_array(p)
                .map_err(|e| ScenarioError::invalid(format!("{field}.p"), e)),
            (None, Some([q1, q2])) => ReceptionVector::independent(q1, q2)
                .map_err(|e| ScenarioError::invalid(format!("{field}.independent"), e)),
            _ => Err(ScenarioError::invalid(field, "give exactly one of `p` or `independent`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub support: Vec<u32>,
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    /// Sequence of support labels repeated forever.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    /// Starting label of the Markov chain; defaults to the first label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<u32>,
    pub quality: Vec<ReceptionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    /// Per-session rates at `theta = 1`.
    pub rates: [f64; 2],
    #[serde(default = "default_distribution")]
    pub distribution: ArrivalDistribution,
    #[serde(default = "default_batch_cap")]
    pub batch_cap: u32,
}

fn default_distribution() -> ArrivalDistribution {
    ArrivalDistribution::Bernoulli
}

fn default_batch_cap() -> u32 {
    DEFAULT_BATCH_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComboSpec {
    #[serde(rename = "T")]
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independent: Option<[f64; 2]>,
    /// One reception vector per channel quality.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_quality: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateAdaptationSpec {
    #[serde(default = "default_arrival_mode")]
    pub arrival_mode: ArrivalDistribution,
    pub combo: Vec<ComboSpec>,
}

fn default_arrival_mode() -> ArrivalDistribution {
    ArrivalDistribution::PoissonTime
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    pub sample_stride: u64,
    pub prune_period: u64,
    pub payload_len: usize,
    pub infeasible_fallback: bool,
    /// Steps between decodability checks; 0 disables the oracle.
    pub decodability_every: u64,
    /// Abort on the first invariant violation instead of counting it.
    pub strict: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            sample_stride: 100,
            prune_period: 1,
            payload_len: DEFAULT_PAYLOAD_LEN,
            infeasible_fallback: false,
            decodability_every: 1000,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    /// Free-form tag carried into CSV output, e.g. "conservative".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub scheme: Scheme,
    #[serde(default)]
    pub pressure: PressureMode,
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    pub arrivals: ArrivalSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_adaptation: Option<RateAdaptationSpec>,
    #[serde(default)]
    pub options: Options,
}

fn default_theta() -> f64 {
    1.0
}

/// Runtime objects derived from a validated scenario.
#[derive(Debug, Clone)]
pub struct Built {
    pub channel: ChannelQualityProcess,
    pub arrivals: ArrivalProcess,
    pub combos: Vec<McsCombo>,
    pub rate_adaptation: bool,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.scheme.name())
    }

    pub fn rates(&self) -> [f64; 2] {
        self.arrivals.rates.map(|r| r * self.theta)
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates().iter().sum()
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<Built, ScenarioError> {
        if self.version != SCHEMA_VERSION {
            return Err(ScenarioError::invalid(
                "version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.version),
            ));
        }
        if !(self.horizon >= 1.0 && self.horizon.is_finite()) {
            return Err(ScenarioError::invalid("horizon", "must be at least 1"));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(ScenarioError::invalid("theta", "must be non-negative"));
        }
        let o = &self.options;
        if o.sample_stride == 0 {
            return Err(ScenarioError::invalid("options.sample_stride", "must be positive"));
        }
        if o.prune_period == 0 {
            return Err(ScenarioError::invalid("options.prune_period", "must be positive"));
        }
        if o.payload_len == 0 {
            return Err(ScenarioError::invalid("options.payload_len", "must be positive"));
        }
        let channel = match &self.channel {
            Some(spec) => build_channel(spec)?,
            None if self.rate_adaptation.is_some() => {
                // Quality is irrelevant when every combo carries one vector.
                ChannelQualityProcess::constant(1, ReceptionVector::from_array([1.0, 0.0, 0.0, 0.0]).expect("valid"))
            }
            None => return Err(ScenarioError::invalid("channel", "missing section")),
        };
        let combos = match &self.rate_adaptation {
            Some(ra) => build_combos(ra, channel.len())?,
            None => vec![McsCombo::new(1.0, channel.receptions().to_vec())],
        };
        let distribution = match &self.rate_adaptation {
            Some(ra) => ra.arrival_mode,
            None => self.arrivals.distribution,
        };
        if distribution == ArrivalDistribution::PoissonTime && self.rate_adaptation.is_none() {
            return Err(ScenarioError::invalid(
                "arrivals.distribution",
                "poisson_time requires a rate_adaptation section",
            ));
        }
        let arrivals = ArrivalProcess::new(self.rates(), distribution, self.arrivals.batch_cap)
            .map_err(|e| ScenarioError::invalid("arrivals.rates", e))?;
        Ok(Built { channel, arrivals, combos, rate_adaptation: self.rate_adaptation.is_some() })
    }
}

fn build_channel(spec: &ChannelSpec) -> Result<ChannelQualityProcess, ScenarioError> {
    if spec.support.is_empty() {
        return Err(ScenarioError::invalid("channel.support", "must not be empty"));
    }
    if spec.quality.len() != spec.support.len() {
        return Err(ScenarioError::invalid(
            "channel.quality",
            format!("expected {} entries, got {}", spec.support.len(), spec.quality.len()),
        ));
    }
    let receptions = spec
        .quality
        .iter()
        .enumerate()
        .map(|(i, q)| q.build(&format!("channel.quality[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let index_of = |field: &str, label: u32| {
        spec.support
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| ScenarioError::invalid(field, format!("label {label} not in support")))
    };
    let mode = match spec.mode {
        ModeName::Iid => {
            let frequencies = match &spec.frequencies {
                Some(f) => f.clone(),
                None if spec.support.len() == 1 => vec![1.0],
                None => return Err(ScenarioError::invalid("channel.frequencies", "required for iid mode")),
            };
            QualityMode::Iid { frequencies }
        }
        ModeName::Periodic => {
            let labels = spec
                .pattern
                .as_ref()
                .ok_or_else(|| ScenarioError::invalid("channel.pattern", "required for periodic mode"))?;
            let pattern = labels
                .iter()
                .map(|&l| index_of("channel.pattern", l))
                .collect::<Result<Vec<_>, _>>()?;
            QualityMode::Periodic { pattern }
        }
        ModeName::Markov => {
            let transition = spec
                .transition
                .clone()
                .ok_or_else(|| ScenarioError::invalid("channel.transition", "required for markov mode"))?;
            let initial = match spec.initial {
                Some(l) => index_of("channel.initial", l)?,
                None => 0,
            };
            QualityMode::Markov { transition, initial }
        }
    };
    let field = match spec.mode {
        ModeName::Iid => "channel.frequencies",
        ModeName::Periodic => "channel.pattern",
        ModeName::Markov => "channel.transition",
    };
    ChannelQualityProcess::new(spec.support.clone(), receptions, mode)
        .map_err(|e| ScenarioError::invalid(field, e))
}

fn build_combos(ra: &RateAdaptationSpec, qualities: usize) -> Result<Vec<McsCombo>, ScenarioError> {
    if ra.combo.is_empty() {
        return Err(ScenarioError::invalid("rate_adaptation.combo", "at least one combo required"));
    }
    ra.combo
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let field = format!("rate_adaptation.combo[{i}]");
            if !(c.duration > 0.0 && c.duration.is_finite()) {
                return Err(ScenarioError::invalid(format!("{field}.T"), "must be positive"));
            }
            let reception = match (c.p, c.independent, &c.per_quality) {
                (Some(_), None, None) | (None, Some(_), None) => {
                    vec![ReceptionSpec { p: c.p, independent: c.independent }.build(&field)?]
                }
                (None, None, Some(list)) => {
                    if list.len() != qualities {
                        return Err(ScenarioError::invalid(
                            format!("{field}.per_quality"),
                            format!("expected {qualities} vectors, got {}", list.len()),
                        ));
                    }
                    list.iter()
                        .map(|p| {
                            ReceptionVector::from_array(*p)
                                .map_err(|e| ScenarioError::invalid(format!("{field}.per_quality"), e))
                        })
                        .collect::<Result<Vec<_>, _>>()?
                }
                _ => {
                    return Err(ScenarioError::invalid(
                        field,
                        "give exactly one of `p`, `independent` or `per_quality`",
                    ))
                }
            };
            Ok(McsCombo::new(c.duration, reception))
        })
        .collect()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    if text.trim().is_empty() {
        return Err(ScenarioError::Parse(format!("{}: file is empty", path.display())));
    }
    Scenario::from_toml(&text)
}
