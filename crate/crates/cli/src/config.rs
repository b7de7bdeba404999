//! Experiment configuration files.
//!
//! A config is a flat TOML table:
//!
//! ```toml
//! game = "g1"            # or "g2"
//! d = 30
//! eta = 0.5
//! delta = 0.9            # g2 only
//! reference_f = 5        # grid index of the firm's reference action; omit for zero
//! reference_w = 15
//! conv_threshold = 1e-7  # default 1e-7 (g1) or 1e-6 (g2)
//! max_steps = 8000       # default 8000 (g1) or 15000 (g2)
//! arithmetic = "float"   # or "exact" (g1 only)
//! firm_axis = "pure"     # "pure", "uniform" or a list of strategies
//! worker_axis = "pure"
//! output_dir = "out"
//! threads = 4            # default: all hardware threads
//! seed = 42              # audits only
//! ```
//!
//! Strategies are written as a grid index in g1 (`3` or `"3"`), as
//! `"offer:threshold"` for the g2 firm and `"threshold:counter"` for the g2
//! worker, or as `"uniform"`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bargain_core::metagame::{InitialStrategy, SweepAxes};
use bargain_core::{ActionGrid, Agent, Arithmetic, LearnerConfig, Reference};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameName {
    G1,
    G2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticName {
    Float,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum StrategySpec {
    Index(usize),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Named(String),
    List(Vec<StrategySpec>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameName,
    pub d: usize,
    pub eta: f64,
    pub delta: Option<f64>,
    pub reference_f: Option<usize>,
    pub reference_w: Option<usize>,
    pub conv_threshold: Option<f64>,
    pub max_steps: Option<usize>,
    pub arithmetic: Option<ArithmeticName>,
    pub firm_axis: Option<AxisSpec>,
    pub worker_axis: Option<AxisSpec>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.learner()?;
        Ok(cfg)
    }

    /// The validated learner configuration.
    pub fn learner(&self) -> Result<LearnerConfig> {
        let grid = ActionGrid::new(self.d)?;
        let mut cfg = match (self.game, self.delta) {
            (GameName::G1, None) => LearnerConfig::ultimatum(grid, self.eta),
            (GameName::G1, Some(_)) => bail!("delta only applies to game = \"g2\""),
            (GameName::G2, Some(delta)) => LearnerConfig::two_round(grid, self.eta, delta),
            (GameName::G2, None) => bail!("game = \"g2\" needs delta"),
        };
        let reference = |r: Option<usize>| r.map_or(Reference::Zero, Reference::Pure);
        cfg = cfg.with_references(reference(self.reference_f), reference(self.reference_w));
        if let Some(t) = self.conv_threshold {
            cfg.conv_threshold = t;
        }
        if let Some(n) = self.max_steps {
            cfg.max_steps = n;
        }
        if self.arithmetic == Some(ArithmeticName::Exact) {
            cfg.arithmetic = Arithmetic::ExactRational;
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sweep axes; both default to every pure strategy.
    pub fn axes(&self) -> Result<SweepAxes> {
        let cfg = self.learner()?;
        let pure = SweepAxes::pure(&cfg);
        let build =
            |spec: &Option<AxisSpec>, agent: Agent, all: Vec<InitialStrategy>| -> Result<Vec<InitialStrategy>> {
                let axis = match spec {
                    None => all,
                    Some(AxisSpec::Named(s)) if s == "pure" => all,
                    Some(AxisSpec::Named(s)) if s == "uniform" => vec![InitialStrategy::Uniform],
                    Some(AxisSpec::Named(s)) => bail!("unknown {} axis {s:?}", agent.name()),
                    Some(AxisSpec::List(items)) => items
                        .iter()
                        .map(|item| match item {
                            StrategySpec::Index(k) => parse_strategy(&k.to_string(), self.game, agent),
                            StrategySpec::Text(s) => parse_strategy(s, self.game, agent),
                        })
                        .collect::<Result<_>>()?,
                };
                if axis.is_empty() {
                    bail!("the {} axis is empty", agent.name());
                }
                for s in &axis {
                    s.vector(&cfg, agent)?;
                }
                Ok(axis)
            };
        Ok(SweepAxes {
            firm: build(&self.firm_axis, Agent::Firm, pure.firm)?,
            worker: build(&self.worker_axis, Agent::Worker, pure.worker)?,
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Parses one strategy in the notation of the module docs.
pub fn parse_strategy(text: &str, game: GameName, agent: Agent) -> Result<InitialStrategy> {
    let text = text.trim();
    if text == "uniform" {
        return Ok(InitialStrategy::Uniform);
    }
    let index = |s: &str| s.trim().parse::<usize>().with_context(|| format!("bad grid index {s:?}"));
    match game {
        GameName::G1 => Ok(InitialStrategy::Pure(index(text)?)),
        GameName::G2 => {
            let Some((a, b)) = text.split_once(':') else {
                bail!("two-round strategies are written \"x:y\", got {text:?}");
            };
            let (a, b) = (index(a)?, index(b)?);
            Ok(match agent {
                Agent::Firm => InitialStrategy::FirmPlan { offer: a, threshold: b },
                Agent::Worker => InitialStrategy::WorkerPlan { threshold: a, counter: b },
            })
        }
    }
}

/// The inverse of [`parse_strategy`].
pub fn format_strategy(s: &InitialStrategy) -> String {
    match *s {
        InitialStrategy::Pure(k) => k.to_string(),
        InitialStrategy::FirmPlan { offer, threshold } => format!("{offer}:{threshold}"),
        InitialStrategy::WorkerPlan { threshold, counter } => format!("{threshold}:{counter}"),
        InitialStrategy::Uniform => "uniform".into(),
    }
}
