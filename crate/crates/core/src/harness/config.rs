//! JSON experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::deep::DdpgParams;
use crate::dsl::{load_prm, SourceDocument};
use crate::envs::toy_machine;
use crate::error::{Error, Result};
use crate::label::PropositionSet;
use crate::prm::{DiscreteMachine, Discretization, PrmDefinition};
use crate::product::AttachedMachine;
use crate::shaping::{value_iteration, PotentialTable, DEFAULT_TOL};
use crate::tabular::TabularParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ql,
    QlRs,
    Prme,
    PrmeRs,
    Ddpg,
    DdpgRs,
    DdpgPrme,
    DdpgPrmeRs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Self::Ql,
        Self::QlRs,
        Self::Prme,
        Self::PrmeRs,
        Self::Ddpg,
        Self::DdpgRs,
        Self::DdpgPrme,
        Self::DdpgPrmeRs,
    ];

    pub fn is_tabular(self) -> bool {
        matches!(self, Self::Ql | Self::QlRs | Self::Prme | Self::PrmeRs)
    }

    pub fn uses_prme(self) -> bool {
        matches!(self, Self::Prme | Self::PrmeRs | Self::DdpgPrme | Self::DdpgPrmeRs)
    }

    pub fn uses_shaping(self) -> bool {
        matches!(self, Self::QlRs | Self::PrmeRs | Self::DdpgRs | Self::DdpgPrmeRs)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ql => "ql",
            Self::QlRs => "ql_rs",
            Self::Prme => "prme",
            Self::PrmeRs => "prme_rs",
            Self::Ddpg => "ddpg",
            Self::DdpgRs => "ddpg_rs",
            Self::DdpgPrme => "ddpg_prme",
            Self::DdpgPrmeRs => "ddpg_prme_rs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    Office,
    TwoTank,
    FiveRoom,
    FiveRoad,
    #[serde(rename = "toy_1d")]
    Toy1d,
}

impl EnvName {
    pub fn is_tabular(self) -> bool {
        matches!(self, Self::Office | Self::TwoTank)
    }

    pub fn is_continuous(self) -> bool {
        !matches!(self, Self::Office)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: EnvName,
    /// Office map file; the shipped map when absent.
    #[serde(default)]
    pub map: Option<PathBuf>,
    /// Additive process noise of the continuous models.
    #[serde(default = "default_true")]
    pub noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    /// `.prm` file. Exactly one of `path` and `fixture` must be set.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Shipped machine: `a_r1`, `a_r2`, `a_r3` or `toy`.
    #[serde(default)]
    pub fixture: Option<String>,
    /// Machine symbol to environment symbol renames.
    #[serde(default)]
    pub label_map: BTreeMap<String, String>,
    /// Cell width per continuous variable; one cell per variable when
    /// absent.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub machines: Vec<MachineConfig>,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub tabular: TabularParams,
    #[serde(default)]
    pub ddpg: DdpgParams,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Overrides the step budget of the selected learner.
    #[serde(default)]
    pub max_training_steps: Option<u64>,
    #[serde(default = "default_shaping_tol")]
    pub shaping_tol: f64,
    #[serde(default = "default_oracle_limit")]
    pub oracle_state_limit: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_true() -> bool {
    true
}

fn default_trials() -> usize {
    1
}

fn default_shaping_tol() -> f64 {
    DEFAULT_TOL
}

fn default_oracle_limit() -> usize {
    1_000_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads, resolves and validates a config file. Relative paths are
    /// taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes paths absolute against `base` and writes the algorithm's
    /// switches and the step override into the learner parameters, so that
    /// the serialized config states every effective value.
    pub fn resolve(&mut self, base: &Path) {
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(m) = self.env.map.as_mut() {
            rebase(m);
        }
        for m in &mut self.machines {
            if let Some(p) = m.path.as_mut() {
                rebase(p);
            }
        }
        rebase(&mut self.output_dir);
        let (prme, rs) = (self.algorithm.uses_prme(), self.algorithm.uses_shaping());
        self.tabular.use_prme = prme;
        self.tabular.use_shaping = rs;
        self.ddpg.use_prme = prme;
        self.ddpg.use_shaping = rs;
        if let Some(n) = self.max_training_steps {
            self.tabular.max_training_steps = n;
            self.ddpg.max_training_steps = n;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.machines.is_empty() {
            return Err(Error::Config("at least one machine is required".into()));
        }
        if self.algorithm.is_tabular() && !self.env.name.is_tabular() {
            return Err(Error::Config(format!(
                "algorithm `{}` needs a discrete environment",
                self.algorithm.name()
            )));
        }
        if !self.algorithm.is_tabular() && !self.env.name.is_continuous() {
            return Err(Error::Config(format!(
                "algorithm `{}` needs a continuous environment",
                self.algorithm.name()
            )));
        }
        if self.env.map.is_some() && self.env.name != EnvName::Office {
            return Err(Error::Config("`map` applies to the office environment only".into()));
        }
        if let Some(m) = &self.env.map {
            if !m.is_file() {
                return Err(Error::Config(format!("map file {} does not exist", m.display())));
            }
        }
        for (i, m) in self.machines.iter().enumerate() {
            match (&m.path, &m.fixture) {
                (Some(p), None) if !p.is_file() => {
                    return Err(Error::Config(format!("machine file {} does not exist", p.display())))
                }
                (Some(_), None) => {}
                (None, Some(name)) if fixture(name).is_none() => {
                    return Err(Error::Config(format!("unknown machine fixture `{name}`")))
                }
                (None, Some(_)) => {}
                _ => return Err(Error::Config(format!("machine {i}: set exactly one of `path` and `fixture`"))),
            }
        }
        if !(self.shaping_tol > 0.0 && self.shaping_tol < 1.0) {
            return Err(Error::Config("shaping_tol must lie in (0, 1)".into()));
        }
        if self.algorithm.is_tabular() {
            self.tabular.check()
        } else {
            self.ddpg.check()
        }
    }

    /// Discount of the selected learner.
    pub fn lambda(&self) -> f64 {
        if self.algorithm.is_tabular() {
            self.tabular.lambda
        } else {
            self.ddpg.lambda
        }
    }

    /// Parses, discretizes and attaches every machine.
    pub fn load_machines(&self, env_props: &PropositionSet) -> Result<Vec<AttachedMachine>> {
        self.machines
            .iter()
            .map(|m| {
                let prm = Arc::new(match (&m.path, &m.fixture) {
                    (Some(p), _) => load_prm(&SourceDocument::read(p)?)?,
                    (None, Some(name)) => fixture(name).ok_or_else(|| Error::Config(format!("unknown fixture `{name}`")))?,
                    (None, None) => return Err(Error::Config("machine source missing".into())),
                });
                let grid = match &m.grid {
                    Some(w) => Discretization::new(&prm, w)?,
                    None => Discretization::coarse(&prm)?,
                };
                let dm = Arc::new(DiscreteMachine::new(prm, grid)?);
                let renames: Vec<(String, String)> = m.label_map.iter().map(|(a, b)| (a.clone(), b.clone())).collect();
                AttachedMachine::new(dm, env_props, &renames)
            })
            .collect()
    }

    /// Shaping potentials for every machine, when the algorithm shapes.
    pub fn potentials(&self, machines: &[AttachedMachine]) -> Result<Option<Vec<PotentialTable>>> {
        if !self.algorithm.uses_shaping() {
            return Ok(None);
        }
        machines
            .iter()
            .map(|m| value_iteration(m.machine.clone(), self.lambda(), self.shaping_tol))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

fn fixture(name: &str) -> Option<PrmDefinition> {
    match name {
        "toy" => Some(toy_machine()),
        other => crate::fixtures::by_name(other),
    }
}
