//! Centralized-critic multi-agent actor-critic training over the swarm
//! environment, with either diffusion or plain MLP actors.
//!
//! Each agent's critic sees every agent's observation and one-hot action.
//! Actors are trained through the critic by replacing their own one-hot
//! action with a softmax of their masked logits. Exploration is ε-greedy
//! over feasible actions; evaluation decodes the masked argmax.

mod bandit;
mod baselines;
mod buffer;
mod learner;
mod optim;
mod policy;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::AssignmentError;
use crate::diffusion::DiffusionError;
use crate::env::EnvError;

pub use bandit::{run_bandit, BanditOutcome};
pub use baselines::{greedy_assignment_baseline, oracle_baseline, oracle_reference, scripted_episode};
pub use buffer::{ReplayBuffer, Transition};
pub use learner::{
    act_with, critic_forward, soft_update, td_target, update_actor, update_critic, ActorBatch, ActorStepSettings, Maddpg, Minibatch,
};
pub use optim::{Optimizer, OptimizerKind};
pub use policy::{epsilon_greedy, masked_argmax, masked_softmax, masked_softmax_backward, one_hot, Actor, ActorTrace};
pub use train::{evaluate, evaluate_actors, train, EpisodeStats, EvalSummary, LogRow, TrainLog, TrainOutcome, TRAIN_LOG_CSV_HEADER};

#[derive(Debug, Error)]
pub enum MarlError {
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("{what} became non-finite")]
    NonFinite { what: &'static str },
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorKind {
    Diffusion,
    Direct,
}

/// Methods that can drive the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Diffusion actors on the planned route.
    GdmMaddpg,
    /// MLP actors visiting targets in id order.
    Maddpg,
    /// MLP actors on the planned route.
    MaddpgPlan,
    /// Greedy pipeline builder on the planned route, no learning.
    Greedy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::GdmMaddpg, Algorithm::Maddpg, Algorithm::MaddpgPlan, Algorithm::Greedy];

    /// Actor family, or `None` for methods that do not learn.
    pub fn actor_kind(self) -> Option<ActorKind> {
        match self {
            Algorithm::GdmMaddpg => Some(ActorKind::Diffusion),
            Algorithm::Maddpg | Algorithm::MaddpgPlan => Some(ActorKind::Direct),
            Algorithm::Greedy => None,
        }
    }

    pub fn uses_planner(self) -> bool {
        !matches!(self, Algorithm::Maddpg)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::GdmMaddpg => "gdm-maddpg",
            Algorithm::Maddpg => "maddpg",
            Algorithm::MaddpgPlan => "maddpg+plan",
            Algorithm::Greedy => "greedy",
        })
    }
}

impl FromStr for Algorithm {
    type Err = MarlError;

    fn from_str(s: &str) -> Result<Algorithm, MarlError> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| MarlError::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Hidden widths of every actor and critic.
    pub hidden: Vec<usize>,
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub optimizer: OptimizerKind,
    pub discount: f64,
    /// Target network interpolation rate.
    pub tau: f64,
    pub epsilon_start: f64,
    /// ε decays as `epsilon_start·exp(-epsilon_decay·steps)`.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub softmax_temperature: f64,
    /// Weight of the squared-logit penalty in the actor loss.
    pub logit_reg: f64,
    /// Scale of the per-step noise in target-actor chains; 0 makes them
    /// depend only on their starting draw.
    pub target_noise: f64,
    /// Weight of the denoising term toward above-average buffer actions.
    pub aux_bc_weight: f64,
    pub shared_critic: bool,
    pub updates_per_step: usize,
    /// Gradient norm cap; 0 disables it.
    pub grad_clip: f64,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 1000,
            seed: 0,
            hidden: vec![256, 256],
            diffusion_steps: 10,
            beta_start: 1e-4,
            beta_end: 0.05,
            batch_size: 512,
            buffer_capacity: 100_000,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            optimizer: OptimizerKind::Sgd,
            discount: 0.9,
            tau: 0.01,
            epsilon_start: 0.9,
            epsilon_decay: 1e-4,
            epsilon_min: 0.0,
            softmax_temperature: 1.0,
            logit_reg: 1e-3,
            target_noise: 0.0,
            aux_bc_weight: 0.0,
            shared_critic: false,
            updates_per_step: 1,
            grad_clip: 0.0,
            eval_every: 10,
            eval_episodes: 5,
        }
    }
}

impl TrainConfig {
    /// Small networks and Adam, sized for short runs on small scenarios.
    pub fn desk() -> TrainConfig {
        TrainConfig {
            episodes: 600,
            hidden: vec![64, 64],
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            tau: 0.05,
            epsilon_decay: 1e-3,
            epsilon_min: 0.02,
            grad_clip: 10.0,
            eval_every: 20,
            eval_episodes: 3,
            ..TrainConfig::default()
        }
    }

    pub fn epsilon_at(&self, steps: u64) -> f64 {
        (self.epsilon_start * (-self.epsilon_decay * steps as f64).exp()).max(self.epsilon_min)
    }

    pub fn validate(&self) -> Result<(), MarlError> {
        let fail = |m: &str| Err(MarlError::Config(m.to_string()));
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return fail("batch_size must be positive and fit in buffer_capacity");
        }
        if self.diffusion_steps == 0 {
            return fail("diffusion_steps must be positive");
        }
        if !(0.0..=1.0).contains(&self.tau) || !(0.0..=1.0).contains(&self.discount) {
            return fail("tau and discount must lie in [0, 1]");
        }
        if !(self.softmax_temperature > 0.0) {
            return fail("softmax_temperature must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return fail("epsilon bounds must lie in [0, 1]");
        }
        Ok(())
    }

    /// Copy with one field replaced; `value` is read as a TOML value and
    /// falls back to a bare string.
    pub fn with_override(&self, key: &str, value: &str) -> Result<TrainConfig, MarlError> {
        let bad = |e: &dyn fmt::Display| MarlError::Config(format!("{key}={value}: {e}"));
        let mut table = toml::Table::try_from(self).map_err(|e| bad(&e))?;
        if !table.contains_key(key) {
            return Err(MarlError::Config(format!("unknown key {key:?}")));
        }
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
        let config: TrainConfig = table.try_into().map_err(|e| bad(&e))?;
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests;
