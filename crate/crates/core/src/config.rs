// Copyright 2026 The USP Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration. Hyperparameter names follow the usual DQN table
//! (batch size, memory size, replace period, ...); fields left out of a
//! configuration file fall back to the published defaults for the chosen
//! target.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grape::GrapeConfig;
use crate::quantum::{QuantumState, C64};
use crate::tasks::{
    single_qubit_test_grid, single_qubit_train_grid, split_train_test, subsample, two_qubit_point_set, TaskSet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Single,
    Two,
}

impl System {
    pub fn dim(self) -> usize {
        match self {
            System::Single => 2,
            System::Two => 4,
        }
    }

    pub fn qubits(self) -> usize {
        match self {
            System::Single => 1,
            System::Two => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            System::Single => "single",
            System::Two => "two",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetName {
    Zero,
    One,
    Bell,
    Custom,
}

impl TargetName {
    pub fn label(self) -> &'static str {
        match self {
            TargetName::Zero => "zero",
            TargetName::One => "one",
            TargetName::Bell => "bell",
            TargetName::Custom => "custom",
        }
    }
}

/// DQN hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// Per-channel pulse alphabet. Two-qubit actions are the ordered cross
    /// product `(J1, J2)`.
    pub allowed_actions: Vec<f64>,
    pub batch_size: usize,
    pub memory_size: usize,
    pub learning_rate: f64,
    pub replace_period: u64,
    pub max_reward: f64,
    pub discount_factor: f64,
    pub hidden_layers: Vec<usize>,
    pub epsilon_increment: f64,
    pub epsilon_max: f64,
    pub epsilon_test: f64,
    pub max_steps: usize,
    pub episodes_per_point: usize,
    pub total_time: f64,
    pub action_duration: f64,
    pub success_threshold: f64,
}

impl AgentConfig {
    pub fn default_zero() -> Self {
        Self {
            allowed_actions: vec![0.0, 1.0, 2.0, 3.0],
            batch_size: 32,
            memory_size: 2000,
            learning_rate: 1e-4,
            replace_period: 250,
            max_reward: 5000.0,
            discount_factor: 0.9,
            hidden_layers: vec![20, 20],
            epsilon_increment: 1e-3,
            epsilon_max: 0.99,
            epsilon_test: 1.0,
            max_steps: 40,
            episodes_per_point: 100,
            total_time: PI,
            action_duration: PI / 40.0,
            success_threshold: 0.99,
        }
    }

    pub fn default_one() -> Self {
        Self {
            memory_size: 3000,
            epsilon_increment: 1e-4,
            ..Self::default_zero()
        }
    }

    pub fn default_bell() -> Self {
        Self {
            allowed_actions: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            batch_size: 320,
            memory_size: 100_000,
            learning_rate: 1e-6,
            replace_period: 200,
            max_reward: 5000.0,
            discount_factor: 0.9,
            hidden_layers: vec![300, 400, 200],
            epsilon_increment: 1.0 / 36000.0,
            epsilon_max: 0.99,
            epsilon_test: 1.0,
            max_steps: 400,
            episodes_per_point: 100,
            total_time: 10.0 * PI,
            action_duration: PI / 40.0,
            success_threshold: 0.99,
        }
    }

    pub fn defaults_for(system: System, target: TargetName) -> Self {
        match (system, target) {
            (System::Two, _) => Self::default_bell(),
            (System::Single, TargetName::One) => Self::default_one(),
            (System::Single, _) => Self::default_zero(),
        }
    }

    pub fn action_count(&self, system: System) -> usize {
        self.allowed_actions.len().pow(system.qubits() as u32)
    }

    /// `(input, hidden.., output)` for the given system.
    pub fn layer_sizes(&self, system: System) -> Vec<usize> {
        let mut sizes = vec![2 * system.dim()];
        sizes.extend(&self.hidden_layers);
        sizes.push(self.action_count(system));
        sizes
    }

    pub fn validate(&self, system: System) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("agent.{field}: {why}")));
        if self.allowed_actions.is_empty() {
            return bad("allowed_actions", "must not be empty");
        }
        for &j in &self.allowed_actions {
            let ok = match system {
                System::Single => j.is_finite() && j >= 0.0,
                System::Two => j.is_finite() && j > 0.0,
            };
            if !ok {
                return bad("allowed_actions", "exchange values must be finite, >= 0 (one qubit) or > 0 (two qubits)");
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be >= 1");
        }
        if self.memory_size < self.batch_size {
            return bad("memory_size", "must be at least batch_size");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate", "must be finite and >= 0");
        }
        if self.replace_period == 0 {
            return bad("replace_period", "must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.discount_factor) {
            return bad("discount_factor", "must lie in [0, 1]");
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return bad("hidden_layers", "need at least one hidden layer, all widths >= 1");
        }
        if !(0.0..1.0).contains(&self.epsilon_max) {
            return bad("epsilon_max", "must lie in [0, 1)");
        }
        if !(self.epsilon_increment.is_finite() && self.epsilon_increment >= 0.0) {
            return bad("epsilon_increment", "must be finite and >= 0");
        }
        if !(self.action_duration.is_finite() && self.action_duration > 0.0) {
            return bad("action_duration", "must be > 0");
        }
        let implied = self.total_time / self.action_duration;
        if (implied - self.max_steps as f64).abs() > 1e-6 {
            return bad("max_steps", "must equal total_time / action_duration");
        }
        if !(self.success_threshold > 0.0 && self.success_threshold <= 1.0) {
            return bad("success_threshold", "must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Which points to train and test on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    /// Two-qubit training points drawn from the full point set.
    pub n_train: usize,
    /// Evaluate on a random subsample of the test set instead of all of it.
    pub test_subsample: Option<usize>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            n_train: 126,
            test_subsample: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub histogram_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { histogram_bins: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub static_amplitudes: Vec<f64>,
    pub dynamic_amplitudes: Vec<f64>,
    /// Noise realizations per task for dynamic noise.
    pub realizations: usize,
    /// Recompute `J12 = J1 J2 / 2` from the perturbed couplings.
    pub recompute_j12: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.02).collect();
        Self {
            static_amplitudes: grid.clone(),
            dynamic_amplitudes: grid,
            realizations: 1,
            recompute_j12: true,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for &a in self.static_amplitudes.iter() {
            if !a.is_finite() {
                return Err(Error::Config("noise.static_amplitudes: values must be finite".into()));
            }
        }
        for &a in self.dynamic_amplitudes.iter() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Config(
                    "noise.dynamic_amplitudes: standard deviations must be finite and >= 0".into(),
                ));
            }
        }
        if self.realizations == 0 {
            return Err(Error::Config("noise.realizations: must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything a command needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: System,
    pub target: TargetName,
    pub target_amplitudes: Option<Vec<(f64, f64)>>,
    pub seed: u64,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
    pub agent: AgentConfig,
    pub tasks: TaskConfig,
    pub evaluation: EvalConfig,
    pub noise: NoiseConfig,
    pub grape: GrapeConfig,
}

/// File form: every agent field optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunConfig {
    system: Option<System>,
    target: Option<TargetName>,
    target_amplitudes: Option<Vec<(f64, f64)>>,
    seed: Option<u64>,
    jobs: Option<usize>,
    #[serde(default)]
    agent: AgentOverrides,
    tasks: Option<TaskConfig>,
    evaluation: Option<EvalConfig>,
    noise: Option<NoiseConfig>,
    #[serde(default)]
    grape: GrapeOverrides,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrapeOverrides {
    slices: Option<usize>,
    step_size: Option<f64>,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
    restarts: Option<usize>,
    lower_bound: Option<f64>,
    upper_bound: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentOverrides {
    allowed_actions: Option<Vec<f64>>,
    batch_size: Option<usize>,
    memory_size: Option<usize>,
    learning_rate: Option<f64>,
    replace_period: Option<u64>,
    max_reward: Option<f64>,
    discount_factor: Option<f64>,
    hidden_layers: Option<Vec<usize>>,
    epsilon_increment: Option<f64>,
    epsilon_max: Option<f64>,
    epsilon_test: Option<f64>,
    max_steps: Option<usize>,
    episodes_per_point: Option<usize>,
    total_time: Option<f64>,
    action_duration: Option<f64>,
    success_threshold: Option<f64>,
}

macro_rules! apply_overrides {
    ($base:expr, $over:expr, $($field:ident),* $(,)?) => {
        $( if let Some(v) = $over.$field { $base.$field = v; } )*
    };
}

impl RunConfig {
    pub fn defaults(system: System, target: TargetName) -> Self {
        Self {
            system,
            target,
            target_amplitudes: None,
            seed: 0,
            jobs: 1,
            agent: AgentConfig::defaults_for(system, target),
            tasks: TaskConfig::default(),
            evaluation: EvalConfig::default(),
            noise: NoiseConfig::default(),
            grape: GrapeConfig::for_system(system),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawRunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let system = raw.system.unwrap_or(System::Single);
        let target = raw.target.unwrap_or(match system {
            System::Single => TargetName::Zero,
            System::Two => TargetName::Bell,
        });
        let mut cfg = Self::defaults(system, target);
        cfg.target_amplitudes = raw.target_amplitudes;
        if let Some(seed) = raw.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = raw.jobs {
            cfg.jobs = jobs;
        }
        let over = raw.agent;
        apply_overrides!(
            cfg.agent,
            over,
            allowed_actions,
            batch_size,
            memory_size,
            learning_rate,
            replace_period,
            max_reward,
            discount_factor,
            hidden_layers,
            epsilon_increment,
            epsilon_max,
            epsilon_test,
            max_steps,
            episodes_per_point,
            total_time,
            action_duration,
            success_threshold,
        );
        if let Some(t) = raw.tasks {
            cfg.tasks = t;
        }
        if let Some(e) = raw.evaluation {
            cfg.evaluation = e;
        }
        if let Some(n) = raw.noise {
            cfg.noise = n;
        }
        let over = raw.grape;
        apply_overrides!(
            cfg.grape,
            over,
            slices,
            step_size,
            max_iterations,
            tolerance,
            restarts,
            lower_bound,
            upper_bound,
        );
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate(self.system)?;
        self.noise.validate()?;
        self.grape.validate(self.system)?;
        if self.evaluation.histogram_bins == 0 {
            return Err(Error::Config("evaluation.histogram_bins: must be >= 1".into()));
        }
        match (self.system, self.target) {
            (System::Single, TargetName::Bell) => {
                return Err(Error::Config("target: bell requires system = \"two\"".into()))
            }
            (System::Two, TargetName::Zero | TargetName::One) => {
                return Err(Error::Config("target: zero/one require system = \"single\"".into()))
            }
            _ => {}
        }
        if self.system == System::Two && self.tasks.n_train > 6912 {
            return Err(Error::Config("tasks.n_train: at most 6912 points exist".into()));
        }
        self.target_state().map(|_| ())
    }

    /// Training and test sets for this run. One qubit uses the fixed grids;
    /// two qubits split the full point set with the `split` stream. A
    /// configured subsample thins the test set with the `subsample` stream.
    pub fn task_sets(&self) -> Result<(TaskSet, TaskSet)> {
        let (train, test) = match self.system {
            System::Single => (single_qubit_train_grid(), single_qubit_test_grid()),
            System::Two => split_train_test(&two_qubit_point_set(), self.tasks.n_train, derive_seed(self.seed, "split"))?,
        };
        let test = match self.tasks.test_subsample {
            Some(n) => subsample(&test, n, derive_seed(self.seed, "subsample"))?,
            None => test,
        };
        Ok((train, test))
    }

    pub fn target_state(&self) -> Result<QuantumState> {
        let dim = self.system.dim();
        match self.target {
            TargetName::Zero => QuantumState::basis(2, 0),
            TargetName::One => QuantumState::basis(2, 1),
            TargetName::Bell => Ok(QuantumState::bell()),
            TargetName::Custom => {
                let amps = self.target_amplitudes.as_ref().ok_or_else(|| {
                    Error::Config("target_amplitudes: required when target = \"custom\"".into())
                })?;
                if amps.len() != dim {
                    return Err(Error::Config(format!(
                        "target_amplitudes: expected {dim} (re, im) pairs, got {}",
                        amps.len()
                    )));
                }
                QuantumState::new(amps.iter().map(|&(re, im)| C64::new(re, im)).collect())
                    .map_err(|e| Error::Config(format!("target_amplitudes: {e}")))
            }
        }
    }
}

/// Child seed for a named stream of a master seed.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finaliser.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_defaults() {
        let zero = AgentConfig::default_zero();
        assert_eq!(zero.max_steps, 40);
        assert_eq!(zero.layer_sizes(System::Single), vec![4, 20, 20, 4]);
        zero.validate(System::Single).unwrap();
        let one = AgentConfig::default_one();
        assert_eq!((one.memory_size, one.epsilon_increment), (3000, 1e-4));
        let bell = AgentConfig::default_bell();
        assert_eq!(bell.layer_sizes(System::Two), vec![8, 300, 400, 200, 25]);
        bell.validate(System::Two).unwrap();
    }

    #[test]
    fn file_overrides_only_named_fields() {
        let cfg = RunConfig::from_toml_str(
            r#"
            system = "single"
            target = "one"
            seed = 9
            [agent]
            episodes_per_point = 3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.agent.episodes_per_point, 3);
        assert_eq!(cfg.agent.memory_size, 3000);
        assert_eq!(cfg.seed, 9);
        let round = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::from_toml_str("[agent]\ndiscount_factor = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("discount_factor"));
        let err = RunConfig::from_toml_str("[agent]\nmax_steps = 41\n").unwrap_err();
        assert!(err.to_string().contains("max_steps"));
        let err = RunConfig::from_toml_str("[agent]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = RunConfig::from_toml_str("system = \"single\"\ntarget = \"bell\"\n").unwrap_err();
        assert!(err.to_string().contains("target"));
        let err = RunConfig::from_toml_str("system = \"two\"\n[agent]\nallowed_actions = [0.0, 1.0]\n")
            .unwrap_err();
        assert!(err.to_string().contains("allowed_actions"));
    }

    #[test]
    fn grape_overrides_keep_system_defaults() {
        let cfg = RunConfig::from_toml_str("system = \"two\"\n[grape]\nmax_iterations = 7\n").unwrap();
        assert_eq!(cfg.grape.max_iterations, 7);
        assert_eq!(cfg.grape.slices, 400);
        assert_eq!((cfg.grape.lower_bound, cfg.grape.upper_bound), (1.0, 5.0));
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn custom_target() {
        let cfg = RunConfig::from_toml_str(
            "target = \"custom\"\ntarget_amplitudes = [[0.6, 0.0], [0.0, 0.8]]\n",
        )
        .unwrap();
        assert_eq!(cfg.target_state().unwrap().dim(), 2);
        assert!(RunConfig::from_toml_str("target = \"custom\"\n").is_err());
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        assert_eq!(derive_seed(1, "train"), derive_seed(1, "train"));
        assert_ne!(derive_seed(1, "train"), derive_seed(1, "eval"));
        assert_ne!(derive_seed(1, "train"), derive_seed(2, "train"));
    }
}
