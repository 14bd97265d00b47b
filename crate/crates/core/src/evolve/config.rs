use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvolveError;
use crate::image::ExecLimits;
use crate::lang::ParseOptions;
use crate::policy::{NoisyOracle, Policy, RemoteConfig, RemotePolicy, SamplingParams, ScriptedChallenger, ScriptedConfig};
use crate::queue::{DEFAULT_CAPACITY, DEFAULT_SIGMA_HIGH};
use crate::reward::{RewardWeights, DEFAULT_CLUSTER_THRESHOLD};

/// Which implementation answers for a role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyBinding {
    Scripted(ScriptedConfig),
    NoisyOracle { p: f64, increment: f64, ceiling: f64 },
    Remote(RemoteConfig),
}

impl PolicyBinding {
    pub fn build(&self) -> Result<Box<dyn Policy>, EvolveError> {
        Ok(match self {
            PolicyBinding::Scripted(c) => Box::new(ScriptedChallenger::new(*c)),
            PolicyBinding::NoisyOracle { p, increment, ceiling } => Box::new(NoisyOracle::new(*p, *increment, *ceiling)),
            PolicyBinding::Remote(c) => Box::new(RemotePolicy::new(c.clone()).map_err(|e| EvolveError::Config(e.to_string()))?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    /// Self-evolution iterations `T`.
    pub iterations: usize,
    /// Challenger steps per iteration `N_step`.
    pub steps: usize,
    /// Challenger rollouts per step `B`.
    pub batch: usize,
    /// Solver samples per question `K`.
    pub solver_samples: usize,
    /// Parameter sets per program `N`.
    pub arg_sets: usize,
    /// In-context examples per prompt `N_e`.
    pub examples: usize,
    pub queue_capacity: usize,
    pub sigma_high: f64,
    pub cluster_threshold: f64,
    /// Challenger rollouts sharing one image.
    pub challenger_group: usize,
    /// Solver responses per bank question in the solver phase.
    pub solver_group: usize,
    pub solver_retries: usize,
    pub weights: RewardWeights,
    pub limits: ExecLimits,
    pub sampling: SamplingParams,
    pub master_seed: u64,
    /// Directory of PNGs; the built-in synthetic library when absent.
    pub image_library: Option<PathBuf>,
    pub challenger: PolicyBinding,
    pub solver: PolicyBinding,
    pub run_dir: PathBuf,
    /// Worker threads for rollouts; 0 means one per core.
    pub parallelism: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            iterations: 3,
            steps: 10,
            batch: 128,
            solver_samples: 6,
            arg_sets: 4,
            examples: 2,
            queue_capacity: DEFAULT_CAPACITY,
            sigma_high: DEFAULT_SIGMA_HIGH,
            cluster_threshold: DEFAULT_CLUSTER_THRESHOLD,
            challenger_group: 4,
            solver_group: 8,
            solver_retries: 2,
            weights: RewardWeights::default(),
            limits: ExecLimits::default(),
            sampling: SamplingParams::default(),
            master_seed: 0,
            image_library: None,
            challenger: PolicyBinding::Scripted(ScriptedConfig::default()),
            solver: PolicyBinding::NoisyOracle {
                p: 0.5,
                increment: 0.0,
                ceiling: 1.0,
            },
            run_dir: PathBuf::from("runs/default"),
            parallelism: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let counts = [
            ("iterations", self.iterations),
            ("steps", self.steps),
            ("batch", self.batch),
            ("solver_samples", self.solver_samples),
            ("arg_sets", self.arg_sets),
            ("examples", self.examples),
            ("queue_capacity", self.queue_capacity),
            ("challenger_group", self.challenger_group),
            ("solver_group", self.solver_group),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(EvolveError::Config(format!("{name} must be at least 1")));
        }
        if self.arg_sets > 26 {
            return Err(EvolveError::Config("at most 26 parameter sets".into()));
        }
        self.weights.validate().map_err(|e| EvolveError::Config(e.to_string()))?;
        self.limits.validate().map_err(EvolveError::Config)?;
        if let PolicyBinding::NoisyOracle { p, .. } = self.solver {
            if !(0.0..=1.0).contains(&p) {
                return Err(EvolveError::Config(format!("oracle accuracy {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            n_arg_sets: self.arg_sets,
            max_steps: self.limits.max_steps,
            ..ParseOptions::default()
        }
    }

    /// Size cap of the retained question bank, `B * N_step`.
    pub fn bank_cap(&self) -> usize {
        self.batch * self.steps
    }

    pub fn threads(&self) -> usize {
        if self.parallelism > 0 {
            self.parallelism
        } else {
            std::thread::available_parallelism().map(usize::from).unwrap_or(1)
        }
    }

    pub fn load(path: &Path) -> Result<Self, EvolveError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvolveError::io(path, e))?;
        let cfg: LoopConfig = serde_json::from_str(&text).map_err(|e| EvolveError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
