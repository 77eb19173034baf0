//! Experiment configuration files.
//!
//! A config is a TOML document. Every key is optional and falls back to the
//! defaults of the chosen task:
//!
//! ```toml
//! version = 1
//! task = "cartpole"        # tag | tag-prey | tag-predator | cartpole | mnist
//! n = 49                   # population size, a perfect square
//! generations = 100
//! seed = 7
//! # controls = 2           # default: floor(n^(1/4)), or 1 for mnist
//! # stop_threshold = 0.9   # window success (rl) or training loss (mnist)
//! # out = "runs/cartpole"
//! # mnist_dir = "data/mnist"
//!
//! [schedule]               # overrides of the task schedule
//! episodes_per_generation = 250
//!
//! [tag]
//! rows = 12
//! cols = 12
//! [tag.rewards]
//! catch = 10.0
//!
//! [cartpole]
//! gravity = 9.8
//!
//! [training]
//! lr = 0.001
//! gamma = 0.9
//! ```
//!
//! [`ExperimentConfig::snapshot`] renders the resolved values that determine
//! results; output paths and worker counts are left out.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::cartpole::CartPoleParams;
use crate::env::tag::{Specialization, TagRewards};
use crate::evolution::{ExperimentSpec, Shape, StopRule, Task};
use crate::netexec::AdamConfig;
use crate::trainer::RlOptions;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported config version {0}")]
    Version(u32),
    #[error("unknown task `{0}`")]
    Task(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    Tag,
    TagPrey,
    TagPredator,
    Cartpole,
    Mnist,
}

impl TaskName {
    pub fn task(self) -> Task {
        match self {
            TaskName::Tag => Task::Tag(Specialization::Both),
            TaskName::TagPrey => Task::Tag(Specialization::Prey),
            TaskName::TagPredator => Task::Tag(Specialization::Predator),
            TaskName::Cartpole => Task::CartPole,
            TaskName::Mnist => Task::Mnist,
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "tag" => Ok(TaskName::Tag),
            "tag-prey" => Ok(TaskName::TagPrey),
            "tag-predator" => Ok(TaskName::TagPredator),
            "cartpole" => Ok(TaskName::Cartpole),
            "mnist" => Ok(TaskName::Mnist),
            other => Err(ConfigError::Task(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleOverrides {
    pub episodes_per_generation: Option<usize>,
    pub steps_per_episode: Option<usize>,
    pub life_cycles: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_batches_per_episode: Option<usize>,
    pub exploitation_fraction: Option<f64>,
    pub batches_per_generation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TagSection {
    pub rows: i32,
    pub cols: i32,
    pub rewards: TagRewards,
}

impl Default for TagSection {
    fn default() -> Self {
        TagSection { rows: 12, cols: 12, rewards: TagRewards::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartPoleSection {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub half_length: f64,
    pub force_mag: f64,
    pub dt: f64,
    pub theta_limit: f64,
    pub x_limit: f64,
}

impl Default for CartPoleSection {
    fn default() -> Self {
        let p = CartPoleParams::default();
        CartPoleSection {
            gravity: p.gravity,
            cart_mass: p.cart_mass,
            pole_mass: p.pole_mass,
            half_length: p.half_length,
            force_mag: p.force_mag,
            dt: p.dt,
            theta_limit: p.theta_limit,
            x_limit: p.x_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub gamma: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let a = AdamConfig::default();
        TrainingSection { lr: a.lr, beta1: a.beta1, beta2: a.beta2, eps: a.eps, gamma: RlOptions::default().gamma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub task: TaskName,
    pub n: usize,
    pub generations: usize,
    pub seed: u64,
    pub controls: Option<usize>,
    pub stop_threshold: Option<f64>,
    pub out: Option<PathBuf>,
    pub mnist_dir: Option<PathBuf>,
    pub schedule: ScheduleOverrides,
    pub tag: TagSection,
    pub cartpole: CartPoleSection,
    pub training: TrainingSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            task: TaskName::Tag,
            n: 49,
            generations: 100,
            seed: 0,
            controls: None,
            stop_threshold: None,
            out: None,
            mnist_dir: None,
            schedule: ScheduleOverrides::default(),
            tag: TagSection::default(),
            cartpole: CartPoleSection::default(),
            training: TrainingSection::default(),
        }
    }
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        if cfg.version != CONFIG_VERSION {
            return Err(ConfigError::Version(cfg.version));
        }
        Ok(cfg)
    }

    /// Resolve defaults and check every value.
    pub fn to_spec(&self) -> Result<ExperimentSpec, ConfigError> {
        let task = self.task.task();
        Shape::new(self.n, self.controls.or((task == Task::Mnist).then_some(1))).map_err(|e| invalid("n", e.to_string()))?;
        if self.generations == 0 {
            return Err(invalid("generations", "must be positive"));
        }
        let mut spec = ExperimentSpec::new(task, self.n, self.generations, self.seed);
        spec.controls = self.controls.or((task == Task::Mnist).then_some(1));

        let o = &self.schedule;
        let s = &mut spec.schedule;
        s.episodes_per_generation = o.episodes_per_generation.unwrap_or(s.episodes_per_generation);
        s.steps_per_episode = o.steps_per_episode.unwrap_or(s.steps_per_episode);
        s.life_cycles = o.life_cycles.unwrap_or(s.life_cycles);
        s.batch_size = o.batch_size.unwrap_or(s.batch_size);
        s.max_batches_per_episode = o.max_batches_per_episode.or(s.max_batches_per_episode);
        s.exploitation_fraction = o.exploitation_fraction.unwrap_or(s.exploitation_fraction);
        s.batches_per_generation = o.batches_per_generation.unwrap_or(s.batches_per_generation);
        if s.batch_size == 0 {
            return Err(invalid("schedule.batch_size", "must be positive"));
        }
        if !(0.0..=1.0).contains(&s.exploitation_fraction) {
            return Err(invalid("schedule.exploitation_fraction", "must lie in [0, 1]"));
        }
        match task {
            Task::Mnist if s.batches_per_generation == 0 => {
                return Err(invalid("schedule.batches_per_generation", "must be positive"))
            }
            Task::Tag(_) if s.life_cycles == 0 || s.steps_per_episode < s.life_cycles => {
                return Err(invalid("schedule.life_cycles", "need 1 <= life_cycles <= steps_per_episode"))
            }
            Task::Tag(_) | Task::CartPole if s.episodes_per_generation == 0 || s.steps_per_episode == 0 => {
                return Err(invalid("schedule", "episodes and steps must be positive"))
            }
            _ => {}
        }

        if self.tag.rows < 3 || self.tag.cols < 3 {
            return Err(invalid("tag", "the grid needs at least 3 rows and 3 columns"));
        }
        spec.tag.rows = self.tag.rows;
        spec.tag.cols = self.tag.cols;
        spec.tag.rewards = self.tag.rewards;

        let c = &self.cartpole;
        spec.cartpole = CartPoleParams {
            gravity: c.gravity,
            cart_mass: c.cart_mass,
            pole_mass: c.pole_mass,
            half_length: c.half_length,
            force_mag: c.force_mag,
            dt: c.dt,
            theta_limit: c.theta_limit,
            x_limit: c.x_limit,
            max_steps: spec.schedule.steps_per_episode,
        };
        if !(c.dt > 0.0 && c.cart_mass > 0.0 && c.pole_mass >= 0.0 && c.half_length > 0.0) {
            return Err(invalid("cartpole", "masses, length and dt must be positive"));
        }

        let t = &self.training;
        if !(t.lr > 0.0 && t.eps > 0.0 && (0.0..1.0).contains(&t.beta1) && (0.0..1.0).contains(&t.beta2)) {
            return Err(invalid("training", "need lr, eps > 0 and betas in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&t.gamma) {
            return Err(invalid("training.gamma", "must lie in [0, 1]"));
        }
        spec.rl = RlOptions { gamma: t.gamma, adam: AdamConfig { lr: t.lr, beta1: t.beta1, beta2: t.beta2, eps: t.eps } };

        if let Some(x) = self.stop_threshold {
            spec.stop = if task == Task::Mnist { StopRule::LossBelow(x) } else { StopRule::WindowSuccess(x) };
        }
        Ok(spec)
    }

    /// Canonical text of everything that determines the results.
    pub fn snapshot(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.mnist_dir = None;
        toml::to_string(&c).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let s = c.to_spec().unwrap();
        assert_eq!((s.n, s.generations), (49, 100));
        assert_eq!(s.schedule.episodes_per_generation, 128);
        assert_eq!(s.tag.rewards, TagRewards::default());
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::from_toml(
            "task = \"cartpole\"\nn = 9\nseed = 3\n[schedule]\nepisodes_per_generation = 20\n[training]\ngamma = 0.5\n",
        )
        .unwrap();
        let s = c.to_spec().unwrap();
        assert_eq!(s.task, Task::CartPole);
        assert_eq!(s.schedule.episodes_per_generation, 20);
        assert_eq!(s.schedule.max_batches_per_episode, Some(12));
        assert_eq!(s.rl.gamma, 0.5);
        assert_eq!(s.cartpole.max_steps, 300);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(ExperimentConfig::from_toml("bogus = 1"), Err(ConfigError::Parse(_))));
        assert!(matches!(ExperimentConfig::from_toml("version = 2"), Err(ConfigError::Version(2))));
        assert!(matches!(ExperimentConfig::from_toml("task = \"chess\""), Err(ConfigError::Parse(_))));
        let c = ExperimentConfig::from_toml("n = 10").unwrap();
        assert!(matches!(c.to_spec(), Err(ConfigError::Invalid { key: "n", .. })));
        let c = ExperimentConfig::from_toml("generations = 0").unwrap();
        assert!(c.to_spec().is_err());
    }

    #[test]
    fn mnist_defaults_to_one_control() {
        let c = ExperimentConfig { task: TaskName::Mnist, n: 25, ..Default::default() };
        let s = c.to_spec().unwrap();
        assert_eq!(s.controls, Some(1));
        assert_eq!(s.stop, StopRule::LossBelow(0.25));
    }

    #[test]
    fn snapshot_round_trips_without_paths() {
        let c = ExperimentConfig { out: Some("x".into()), seed: 9, ..Default::default() };
        let text = c.snapshot();
        assert!(!text.contains("out ="));
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, ExperimentConfig { out: None, ..c });
    }
}
