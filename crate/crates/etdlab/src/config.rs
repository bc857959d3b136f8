//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use etdlab_core::learners::StepsizeSchedule;
use etdlab_core::mdp::ProblemSpec;
use etdlab_core::scenarios;
use serde::{Deserialize, Serialize};

use crate::spec_file::{self, SpecFileError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Etd,
    EtdConstrained,
    Elstd,
    TdOffpolicy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Etd => "etd",
            Self::EtdConstrained => "etd_constrained",
            Self::Elstd => "elstd",
            Self::TdOffpolicy => "td_offpolicy",
        }
    }

    pub fn default_schedule(self) -> StepsizeSchedule {
        match self {
            Self::Elstd => StepsizeSchedule::ELSTD_DEFAULT,
            _ => StepsizeSchedule::ETD_DEFAULT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleConfig {
    Power { a: f64, c: f64 },
    Harmonic { c1: f64, c2: f64 },
    Constant { alpha: f64 },
}

impl From<ScheduleConfig> for StepsizeSchedule {
    fn from(s: ScheduleConfig) -> Self {
        match s {
            ScheduleConfig::Power { a, c } => StepsizeSchedule::Power { a, c },
            ScheduleConfig::Harmonic { c1, c2 } => StepsizeSchedule::Harmonic { c1, c2 },
            ScheduleConfig::Constant { alpha } => StepsizeSchedule::Constant(alpha),
        }
    }
}

/// Built-in problems usable in place of a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Scenario {
    Reference,
    ReferencePositiveInterest,
    Divergence,
    /// Also accepted under its older name `remark_a1`.
    #[serde(alias = "remark_a1")]
    OneStateRatio {
        #[serde(default = "half")]
        q: f64,
        #[serde(default = "point_nine")]
        gamma: f64,
        #[serde(default)]
        reward: f64,
    },
    TabularOnpolicy {
        #[serde(default = "five")]
        n_states: usize,
        #[serde(default = "point_nine")]
        gamma: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn half() -> f64 {
    0.5
}
fn point_nine() -> f64 {
    0.9
}
fn five() -> usize {
    5
}

impl Scenario {
    pub fn build(&self) -> ProblemSpec {
        match *self {
            Self::Reference => scenarios::reference(),
            Self::ReferencePositiveInterest => scenarios::reference_positive_interest(),
            Self::Divergence => scenarios::divergence(),
            Self::OneStateRatio { q, gamma, reward } => scenarios::one_state_ratio(q, gamma, reward),
            Self::TabularOnpolicy { n_states, gamma, seed } => scenarios::tabular_on_policy(n_states, gamma, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Spec file, relative to the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    /// Algorithms run side by side by `compare`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub algorithms: Vec<Algorithm>,
    /// Defaults to the algorithm's standard schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    /// Allows ETD-family runs with stepsizes that are not `O(1/t)`.
    #[serde(default)]
    pub experimental_schedule: bool,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    /// Defaults to `0` plus the grid `10^2, 10^2.5, 10^3, ...` up to the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_radius: Option<f64>,
    /// Radius as a multiple of the oracle's `‖b‖₂/c` threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_factor: Option<f64>,
    #[serde(default)]
    pub initial_state: usize,
    /// Writes the first `n` transitions of the first seed to `trajectory.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_dump: Option<u64>,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Etd
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spec(#[from] SpecFileError),
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative `spec_path` and `output_dir` relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &self.spec_path {
            if p.is_relative() {
                self.spec_path = Some(base.join(p));
            }
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn schedule_for(&self, algorithm: Algorithm) -> StepsizeSchedule {
        self.schedule.map(Into::into).unwrap_or_else(|| algorithm.default_schedule())
    }

    /// Sorted checkpoints, always including `0` and the horizon.
    pub fn checkpoint_grid(&self) -> Vec<u64> {
        let mut cps = match &self.checkpoints {
            Some(c) => c.clone(),
            None => geometric_grid(self.horizon),
        };
        cps.push(0);
        cps.push(self.horizon);
        cps.sort_unstable();
        cps.dedup();
        cps
    }

    pub fn load_spec(&self) -> Result<ProblemSpec, ConfigError> {
        match (&self.spec_path, &self.scenario) {
            (Some(_), Some(_)) => Err(ConfigError::Invalid("give either spec_path or scenario, not both".into())),
            (Some(p), None) => Ok(spec_file::load_spec_checked(p, true)?),
            (None, Some(s)) => Ok(s.build()),
            (None, None) => Err(ConfigError::Invalid("one of spec_path or scenario is required".into())),
        }
    }

    /// Structural checks that do not need the spec.
    pub fn check(&self, algorithms: &[Algorithm]) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must be nonempty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::Invalid("seeds must be distinct".into()));
        }
        if let Some(c) = &self.checkpoints {
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ConfigError::Invalid("checkpoints must be strictly increasing".into()));
            }
            if c.iter().any(|&t| t > self.horizon) {
                return Err(ConfigError::Invalid("checkpoints must not exceed the horizon".into()));
            }
        }
        if self.constraint_radius.is_some() && self.radius_factor.is_some() {
            return Err(ConfigError::Invalid("give either constraint_radius or radius_factor, not both".into()));
        }
        for &alg in algorithms {
            let schedule = self.schedule_for(alg);
            schedule.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if alg != Algorithm::Elstd && !schedule.is_order_one_over_t() && !self.experimental_schedule {
                return Err(ConfigError::Invalid(format!(
                    "{} is not O(1/t); set experimental_schedule to run {} with it",
                    schedule.describe(),
                    alg.name()
                )));
            }
            if alg == Algorithm::EtdConstrained {
                match (self.constraint_radius, self.radius_factor) {
                    (Some(r), None) if r > 0.0 && r.is_finite() => {}
                    (None, Some(f)) if f > 0.0 && f.is_finite() => {}
                    _ => {
                        return Err(ConfigError::Invalid(
                            "etd_constrained needs a positive constraint_radius or radius_factor".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

/// `10^2, 10^2.5, 10^3, ...` up to `horizon`, rounded to integers.
pub fn geometric_grid(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 4;
    loop {
        let t = 10f64.powf(k as f64 / 2.0).round() as u64;
        if t > horizon {
            break;
        }
        out.push(t);
        k += 1;
    }
    out
}
