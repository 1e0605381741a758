use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::buffer::{ReplayBuffer, Transition};
use super::learner::{act_with, Maddpg, Minibatch};
use super::policy::Actor;
use super::{ActorKind, MarlError, TrainConfig};
use crate::diffusion::NoiseSchedule;
use crate::env::{EpisodeTrace, SwarmEnv};
use crate::scenario::Scenario;

pub const TRAIN_LOG_CSV_HEADER: &str = "episode,total_reward,actor_loss,critic_loss,eval_utility,oracle_ratio";

const EVAL_STREAM: u64 = 0x5eed_e7a1;

/// One training episode. Losses are means over the episode's updates and
/// absent before the buffer first fills a batch; evaluation fields are set
/// on evaluation episodes only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub episode: usize,
    pub total_reward: f64,
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub eval_utility: Option<f64>,
    pub oracle_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    /// The last evaluated utility.
    pub fn final_eval(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.eval_utility)
    }

    pub fn best_eval(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.eval_utility).reduce(f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(TRAIN_LOG_CSV_HEADER.split(','))?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Averages over evaluation episodes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EvalSummary {
    pub utility: f64,
    pub completion_rate: f64,
    pub aoi: f64,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub learner: Maddpg,
    pub final_eval: EvalSummary,
}

/// Greedy rollouts of the current actors with a fixed evaluation seed, so
/// successive evaluations differ only through the networks.
pub fn evaluate(learner: &Maddpg, env: &mut SwarmEnv, episodes: usize, seed: u64) -> Result<EvalSummary, MarlError> {
    evaluate_actors(&learner.actors, &learner.schedule, env, episodes, seed)
}

/// [`evaluate`] for bare actors, such as ones read from a checkpoint.
pub fn evaluate_actors(
    actors: &[Actor],
    schedule: &NoiseSchedule,
    env: &mut SwarmEnv,
    episodes: usize,
    seed: u64,
) -> Result<EvalSummary, MarlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EVAL_STREAM);
    let mut sum = EvalSummary::default();
    let episodes = episodes.max(1);
    for i in 0..episodes {
        let mut obs = env.reset(seed.wrapping_add(i as u64));
        while !env.is_done() {
            let masks: Vec<Vec<bool>> = (0..env.num_agents()).map(|k| env.action_mask(k)).collect();
            let actions = act_with(actors, schedule, &obs, &masks, 0.0, &mut rng)?;
            obs = env.step(&actions)?.observations;
        }
        let trace = env.trace();
        sum.utility += trace.mean_utility();
        sum.completion_rate += trace.completion_rate();
        sum.aoi += trace.mean_aoi();
        sum.reward += trace.total_reward();
    }
    let n = episodes as f64;
    Ok(EvalSummary {
        utility: sum.utility / n,
        completion_rate: sum.completion_rate / n,
        aoi: sum.aoi / n,
        reward: sum.reward / n,
    })
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Trains one learner per agent on `scenario` flown along `route`.
///
/// `reference`, when given, is the utility the log's `oracle_ratio` divides
/// by. Everything random derives from `config.seed`.
pub fn train(
    scenario: &Scenario,
    route: &[u32],
    kind: ActorKind,
    config: &TrainConfig,
    reference: Option<f64>,
) -> Result<TrainOutcome, MarlError> {
    config.validate()?;
    let mut env = SwarmEnv::new(scenario.clone(), route.to_vec())?;
    let mut eval_env = env.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut learner = Maddpg::new(kind, env.num_agents(), env.obs_dim(), env.action_space().size(), config, &mut rng)?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut log = TrainLog::default();
    let mut steps: u64 = 0;
    let mut last_eval = EvalSummary::default();
    for episode in 0..config.episodes {
        let mut obs = env.reset(rng.random());
        let mut masks: Vec<Vec<bool>> = (0..env.num_agents()).map(|k| env.action_mask(k)).collect();
        let mut total_reward = 0.0;
        let (mut actor_losses, mut critic_losses) = (Vec::new(), Vec::new());
        while !env.is_done() {
            let epsilon = config.epsilon_at(steps);
            let actions = learner.act(&obs, &masks, epsilon, &mut rng)?;
            let result = env.step(&actions)?;
            steps += 1;
            total_reward += result.rewards.iter().sum::<f64>();
            let next_masks: Vec<Vec<bool>> = (0..env.num_agents()).map(|k| env.action_mask(k)).collect();
            buffer.push(Transition {
                obs: std::mem::replace(&mut obs, result.observations.clone()),
                masks: std::mem::replace(&mut masks, next_masks.clone()),
                actions,
                rewards: result.rewards,
                next_obs: result.observations,
                next_masks,
                done: result.done,
            });
            for _ in 0..config.updates_per_step {
                let Some(sample) = buffer.sample(config.batch_size, &mut rng) else { break };
                let batch = Minibatch::from_transitions(&sample);
                let (a, c) = learner.update(&batch, &mut rng)?;
                actor_losses.push(a);
                critic_losses.push(c);
            }
        }
        let is_eval = (episode + 1) % config.eval_every.max(1) == 0 || episode + 1 == config.episodes;
        let eval = if is_eval {
            last_eval = evaluate(&learner, &mut eval_env, config.eval_episodes, config.seed)?;
            Some(last_eval.utility)
        } else {
            None
        };
        log.rows.push(LogRow {
            episode: episode + 1,
            total_reward,
            actor_loss: mean(&actor_losses),
            critic_loss: mean(&critic_losses),
            eval_utility: eval,
            oracle_ratio: eval.zip(reference).map(|(u, r)| u / r),
        });
    }
    Ok(TrainOutcome {
        log,
        learner,
        final_eval: last_eval,
    })
}

/// Running episode-weighted means of evaluation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeStats {
    utility: f64,
    completion: f64,
    aoi: f64,
    episodes: usize,
}

impl EpisodeStats {
    pub fn add_trace(&mut self, trace: &EpisodeTrace) {
        self.utility += trace.mean_utility();
        self.completion += trace.completion_rate();
        self.aoi += trace.mean_aoi();
        self.episodes += 1;
    }

    /// Folds in a summary that averaged `episodes` episodes.
    pub fn add_summary(&mut self, summary: &EvalSummary, episodes: usize) {
        let n = episodes as f64;
        self.utility += summary.utility * n;
        self.completion += summary.completion_rate * n;
        self.aoi += summary.aoi * n;
        self.episodes += episodes;
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    fn mean(&self, sum: f64) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            sum / self.episodes as f64
        }
    }

    pub fn mean_utility(&self) -> f64 {
        self.mean(self.utility)
    }

    pub fn mean_completion(&self) -> f64 {
        self.mean(self.completion)
    }

    pub fn mean_aoi(&self) -> f64 {
        self.mean(self.aoi)
    }
}
