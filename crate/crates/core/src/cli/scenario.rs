//! TOML scenario files.
//!
//! A scenario carries the network plus one optional block per command:
//!
//! ```toml
//! [phy]                      # every field optional
//! sinr_threshold = 3.0
//!
//! [[nodes]]
//! id = 0
//! position = [0.0, 0.5]
//!
//! [[links]]
//! id = 0
//! tx = 0
//! rx = 1
//!
//! [rates]                    # r = [...] or lambda = [...]; zeros when absent
//! r = [0.693147, 0.0, 0.0]
//!
//! [simulate]
//! horizon = 1e6
//! seed = 7
//!
//! [adapt]
//! targets = [0.5, 0.5, 0.5]
//!
//! [capacity]
//! x = [0.66, 0.66, 0.66]
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::adapt::{AdaptConfig, ArrivalProcess, StepSchedule};
use crate::ctmc::RateParams;
use crate::phy::{build_channel_matrix, ChannelMatrix, Link, NetworkTopology, Node, PhyConfig};
use crate::setspace::{Enumeration, Membership, DEFAULT_ENUMERATION_CAP};
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub phy: PhyConfig<f64>,
    pub nodes: Vec<Node<f64>>,
    pub links: Vec<Link<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<CapacitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapt: Option<AdaptSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    /// Backoff exponents; `λ = exp(r)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    /// Backoff rates given directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Departure rates; unit when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnumerationMode {
    #[default]
    Exhaustive,
    Reachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default)]
    pub enumeration: EnumerationMode,
}

fn default_cap() -> usize {
    DEFAULT_ENUMERATION_CAP
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { cap: DEFAULT_ENUMERATION_CAP, enumeration: EnumerationMode::Exhaustive }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    /// A tenth of the horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    #[serde(default = "yes")]
    pub check_safety: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MembershipMode {
    #[default]
    Dominated,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    pub x: Vec<f64>,
    #[serde(default)]
    pub membership: MembershipMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    /// `a0 / (1 + i / i0)`.
    #[default]
    Diminishing,
    /// `a0` at every update.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalMode {
    #[default]
    Deterministic,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptSection {
    pub targets: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub step: StepMode,
    #[serde(default = "default_a0")]
    pub a0: f64,
    #[serde(default = "default_i0")]
    pub i0: f64,
    #[serde(default = "default_period")]
    pub update_period: f64,
    #[serde(default = "default_updates")]
    pub max_updates: usize,
    #[serde(default = "default_r_cap")]
    pub r_cap: f64,
    #[serde(default)]
    pub margin: f64,
    #[serde(default)]
    pub arrivals: ArrivalMode,
}

fn default_a0() -> f64 {
    0.1
}
fn default_i0() -> f64 {
    100.0
}
fn default_period() -> f64 {
    100.0
}
fn default_updates() -> usize {
    500
}
fn default_r_cap() -> f64 {
    25.0
}

/// A parsed and admitted scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub topology: NetworkTopology<f64>,
    pub channel: ChannelMatrix<f64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file = ScenarioFile::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        Self::new(file)
    }

    /// Builds the topology and rejects any link that cannot be decoded alone.
    pub fn new(file: ScenarioFile) -> Result<Self> {
        let topology = NetworkTopology::new(file.nodes.clone(), file.links.clone(), file.phy.clone())?;
        let channel = build_channel_matrix(&topology);
        topology.admit(&channel)?;
        Ok(Self { file, topology, channel })
    }

    pub fn num_links(&self) -> usize {
        self.topology.num_links()
    }

    pub fn rate_params(&self) -> Result<RateParams<f64>> {
        let k = self.num_links();
        let params = match &self.file.rates {
            None => RateParams::zeros(k),
            Some(RatesSection { r, lambda, mu }) => {
                let mu = mu.clone().unwrap_or_else(|| vec![1.0; k]);
                match (r, lambda) {
                    (Some(_), Some(_)) => bail!("rates: give either r or lambda, not both"),
                    (Some(r), None) => RateParams { r: r.clone(), mu },
                    (None, Some(lambda)) => {
                        if lambda.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                            bail!("rates.lambda: every entry must be finite and > 0");
                        }
                        RateParams::from_lambda(lambda, mu)
                    }
                    (None, None) => RateParams { r: vec![0.0; k], mu },
                }
            }
        };
        params.validate(k)?;
        Ok(params)
    }

    pub fn analysis(&self) -> (usize, Enumeration) {
        let a = self.file.analysis.clone().unwrap_or_default();
        let mode = match a.enumeration {
            EnumerationMode::Exhaustive => Enumeration::Exhaustive,
            EnumerationMode::Reachable => Enumeration::Reachable,
        };
        (a.cap, mode)
    }

    pub fn sim_config(&self, seed: Option<u64>, horizon: Option<f64>) -> Result<SimConfig<f64>> {
        let Some(s) = &self.file.simulate else { bail!("scenario has no [simulate] section") };
        let horizon = horizon.unwrap_or(s.horizon);
        let mut cfg = SimConfig::new(horizon, seed.unwrap_or(s.seed), self.rate_params()?);
        if let Some(w) = s.warmup {
            cfg.warmup = w;
        }
        cfg.check_safety = s.check_safety;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn capacity(&self) -> Result<(Vec<f64>, Membership)> {
        let Some(c) = &self.file.capacity else { bail!("scenario has no [capacity] section") };
        let m = match c.membership {
            MembershipMode::Dominated => Membership::Dominated,
            MembershipMode::Exact => Membership::Exact,
        };
        Ok((c.x.clone(), m))
    }

    /// `horizon` overrides the number of updates as `floor(horizon / update_period)`.
    pub fn adapt_config(&self, seed: Option<u64>, horizon: Option<f64>) -> Result<AdaptConfig<f64>> {
        let Some(a) = &self.file.adapt else { bail!("scenario has no [adapt] section") };
        let mut cfg = AdaptConfig::new(a.targets.clone(), seed.unwrap_or(a.seed));
        cfg.step = match a.step {
            StepMode::Diminishing => StepSchedule::Diminishing { a0: a.a0, i0: a.i0 },
            StepMode::Constant => StepSchedule::Constant(a.a0),
        };
        cfg.update_period = a.update_period;
        cfg.max_updates = match horizon {
            Some(h) if h.is_finite() && h >= 0.0 => (h / a.update_period).floor() as usize,
            Some(h) => bail!("horizon {h} must be finite and >= 0"),
            None => a.max_updates,
        };
        cfg.r_cap = a.r_cap;
        cfg.margin = a.margin;
        cfg.arrivals = match a.arrivals {
            ArrivalMode::Deterministic => ArrivalProcess::Deterministic,
            ArrivalMode::Poisson => ArrivalProcess::Poisson,
        };
        if let Some(RatesSection { mu: Some(mu), .. }) = &self.file.rates {
            cfg.mu = Some(mu.clone());
        }
        cfg.validate(self.num_links())?;
        Ok(cfg)
    }
}
