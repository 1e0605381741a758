use std::ops::Range;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::buffer::Transition;
use super::optim::Optimizer;
use super::policy::{epsilon_greedy, masked_argmax, masked_softmax, masked_softmax_backward, Actor};
use super::{ActorKind, MarlError, TrainConfig};
use crate::diffusion::{denoising_loss, Mlp, NoiseSchedule};

/// `y = r + γ·Q'·(1 - done)`.
pub fn td_target(reward: f64, done: bool, q_next: f64, discount: f64) -> f64 {
    if done {
        reward
    } else {
        reward + discount * q_next
    }
}

/// Q values for rows of `[joint observations, joint actions, ...]`.
pub fn critic_forward(critic: &Mlp, input: ArrayView2<f64>) -> Result<Array1<f64>, MarlError> {
    Ok(critic.forward(input)?.column(0).to_owned())
}

fn check_finite(what: &'static str, x: f64) -> Result<f64, MarlError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(MarlError::NonFinite { what })
    }
}

/// One descent step on `mean (Q - y)²`; returns the loss before the step.
pub fn update_critic(
    critic: &mut Mlp,
    optimizer: &mut Optimizer,
    input: ArrayView2<f64>,
    targets: &[f64],
    clip: Option<f64>,
) -> Result<f64, MarlError> {
    let batch = input.nrows() as f64;
    let (q, cache) = critic.forward_cached(input)?;
    let resid = Array2::from_shape_fn(q.raw_dim(), |(i, _)| q[[i, 0]] - targets[i]);
    let loss = check_finite("critic loss", resid.iter().map(|r| r * r).sum::<f64>() / batch)?;
    let (grads, _) = critic.backward(&cache, (resid * (2.0 / batch)).view());
    optimizer.step(critic, &grads, clip);
    Ok(loss)
}

/// Inputs to one actor step.
pub struct ActorBatch<'a> {
    /// This agent's observations.
    pub obs: ArrayView2<'a, f64>,
    pub masks: &'a [Vec<bool>],
    /// Critic input with the buffer's actions; the columns in `block` are
    /// overwritten by the actor's relaxed action.
    pub critic_input: ArrayView2<'a, f64>,
    pub block: Range<usize>,
}

/// Knobs shared by every actor step.
#[derive(Debug, Clone, Copy)]
pub struct ActorStepSettings {
    pub temperature: f64,
    pub noise_scale: f64,
    pub clip: Option<f64>,
    /// Weight of the mean squared logit added to the loss; keeps the
    /// softmax away from saturation.
    pub logit_reg: f64,
}

/// One ascent step on the critic's value of the actor's softmax-relaxed
/// action, plus an optional denoising term pulling diffusion actors toward
/// `imitate = (weight, target logits, observations)`. Returns the loss
/// before the step.
#[allow(clippy::too_many_arguments)]
pub fn update_actor<R: Rng + ?Sized>(
    actor: &mut Actor,
    optimizer: &mut Optimizer,
    critic: &Mlp,
    schedule: &NoiseSchedule,
    batch: ActorBatch<'_>,
    settings: ActorStepSettings,
    imitate: Option<(f64, ArrayView2<f64>, ArrayView2<f64>)>,
    rng: &mut R,
) -> Result<f64, MarlError> {
    let rows = batch.obs.nrows();
    let (logits, trace) = actor.logits(batch.obs, schedule, settings.noise_scale, rng)?;
    let probs: Vec<Vec<f64>> = (0..rows)
        .map(|i| masked_softmax(logits.row(i).as_slice().expect("row-major"), &batch.masks[i], settings.temperature))
        .collect();
    let mut input = batch.critic_input.to_owned();
    for (i, p) in probs.iter().enumerate() {
        for (j, &v) in p.iter().enumerate() {
            input[[i, batch.block.start + j]] = v;
        }
    }
    let (q, cache) = critic.forward_cached(input.view())?;
    let reg = settings.logit_reg / logits.len() as f64;
    let loss = check_finite("actor loss", -q.sum() / rows as f64 + reg * logits.iter().map(|x| x * x).sum::<f64>())?;
    let grad_q = Array2::from_elem((rows, 1), -1.0 / rows as f64);
    let (_, grad_in) = critic.backward(&cache, grad_q.view());
    let mut grad_logits = Array2::zeros(logits.raw_dim());
    for (i, p) in probs.iter().enumerate() {
        let gp: Vec<f64> = grad_in.slice(s![i, batch.block.clone()]).to_vec();
        let gl = masked_softmax_backward(p, &gp, settings.temperature);
        let penalty = logits.row(i).mapv(|x| 2.0 * reg * x);
        grad_logits.row_mut(i).assign(&(Array1::from(gl) + penalty));
    }
    let mut grads = actor.backward(&trace, grad_logits.view(), schedule);
    if let (Some((weight, target, obs)), Actor::Diffusion(net)) = (imitate, &*actor) {
        if weight > 0.0 && target.nrows() > 0 {
            let (_, bc) = denoising_loss(net, target, obs, schedule, rng)?;
            grads.add_scaled(&bc, weight);
        }
    }
    optimizer.step(actor.mlp_mut(), &grads, settings.clip);
    Ok(loss)
}

/// One action per agent: ε-greedy over each agent's feasible actions when
/// `epsilon > 0`, masked argmax otherwise.
pub fn act_with<R: Rng + ?Sized>(
    actors: &[Actor],
    schedule: &NoiseSchedule,
    obs: &[Vec<f64>],
    masks: &[Vec<bool>],
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<usize>, MarlError> {
    let mut actions = Vec::with_capacity(obs.len());
    for (k, actor) in actors.iter().enumerate() {
        let row = ArrayView2::from_shape((1, obs[k].len()), &obs[k]).expect("row vector");
        let (logits, _) = actor.logits(row, schedule, 1.0, rng)?;
        let logits = logits.row(0).to_vec();
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(MarlError::NonFinite { what: "action logits" });
        }
        actions.push(if epsilon > 0.0 {
            epsilon_greedy(&logits, &masks[k], epsilon, rng)
        } else {
            masked_argmax(&logits, &masks[k])
        });
    }
    Ok(actions)
}

/// Stacked per-agent arrays of a sampled minibatch.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub obs: Vec<Array2<f64>>,
    pub masks: Vec<Vec<Vec<bool>>>,
    pub actions: Vec<Vec<usize>>,
    /// `rows × agents`.
    pub rewards: Array2<f64>,
    pub next_obs: Vec<Array2<f64>>,
    pub next_masks: Vec<Vec<Vec<bool>>>,
    pub done: Vec<bool>,
}

impl Minibatch {
    pub fn from_transitions(batch: &[&Transition]) -> Minibatch {
        let agents = batch[0].actions.len();
        let rows = batch.len();
        let stack = |f: &dyn Fn(&Transition) -> &Vec<Vec<f64>>, k: usize| {
            let dim = f(batch[0])[k].len();
            Array2::from_shape_fn((rows, dim), |(i, j)| f(batch[i])[k][j])
        };
        Minibatch {
            obs: (0..agents).map(|k| stack(&|t| &t.obs, k)).collect(),
            masks: (0..agents).map(|k| batch.iter().map(|t| t.masks[k].clone()).collect()).collect(),
            actions: (0..agents).map(|k| batch.iter().map(|t| t.actions[k]).collect()).collect(),
            rewards: Array2::from_shape_fn((rows, agents), |(i, k)| batch[i].rewards[k]),
            next_obs: (0..agents).map(|k| stack(&|t| &t.next_obs, k)).collect(),
            next_masks: (0..agents).map(|k| batch.iter().map(|t| t.next_masks[k].clone()).collect()).collect(),
            done: batch.iter().map(|t| t.done).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.done.len()
    }
}

fn one_hot_rows(actions: &[usize], size: usize) -> Array2<f64> {
    let mut m = Array2::zeros((actions.len(), size));
    for (i, &a) in actions.iter().enumerate() {
        m[[i, a]] = 1.0;
    }
    m
}

/// Actors, centralized critics, their target copies and optimizers for every
/// agent.
#[derive(Debug, Clone)]
pub struct Maddpg {
    pub actors: Vec<Actor>,
    pub target_actors: Vec<Actor>,
    /// One per agent, or a single one shared by all when the config says so.
    pub critics: Vec<Mlp>,
    pub target_critics: Vec<Mlp>,
    actor_opts: Vec<Optimizer>,
    critic_opts: Vec<Optimizer>,
    pub schedule: NoiseSchedule,
    obs_dim: usize,
    action_dim: usize,
    config: TrainConfig,
}

impl Maddpg {
    pub fn new<R: Rng + ?Sized>(
        kind: ActorKind,
        agents: usize,
        obs_dim: usize,
        action_dim: usize,
        config: &TrainConfig,
        rng: &mut R,
    ) -> Result<Maddpg, MarlError> {
        let schedule = NoiseSchedule::linear(config.diffusion_steps, config.beta_start, config.beta_end)?;
        let actors: Vec<Actor> = (0..agents)
            .map(|_| match kind {
                ActorKind::Diffusion => Actor::diffusion(obs_dim, action_dim, &config.hidden, config.diffusion_steps, rng),
                ActorKind::Direct => Actor::direct(obs_dim, action_dim, &config.hidden, rng),
            })
            .collect();
        let shared = if config.shared_critic { agents } else { 0 };
        let critic_sizes: Vec<usize> = std::iter::once(agents * (obs_dim + action_dim) + shared)
            .chain(config.hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let num_critics = if config.shared_critic { 1 } else { agents };
        let critics: Vec<Mlp> = (0..num_critics).map(|_| Mlp::new(&critic_sizes, rng)).collect();
        Ok(Maddpg {
            actor_opts: actors
                .iter()
                .map(|a| Optimizer::new(config.optimizer, config.actor_lr, a.mlp()))
                .collect(),
            critic_opts: critics
                .iter()
                .map(|c| Optimizer::new(config.optimizer, config.critic_lr, c))
                .collect(),
            target_actors: actors.clone(),
            target_critics: critics.clone(),
            actors,
            critics,
            schedule,
            obs_dim,
            action_dim,
            config: config.clone(),
        })
    }

    pub fn num_agents(&self) -> usize {
        self.actors.len()
    }

    fn critic_slot(&self, agent: usize) -> usize {
        if self.config.shared_critic {
            0
        } else {
            agent
        }
    }

    fn clip(&self) -> Option<f64> {
        (self.config.grad_clip > 0.0).then_some(self.config.grad_clip)
    }

    /// `[obs_0 .. obs_M, a_0 .. a_M]`, followed by the agent one-hot for a
    /// shared critic.
    fn critic_input(&self, obs: &[Array2<f64>], actions: &[Array2<f64>], agent: usize) -> Array2<f64> {
        let rows = obs[0].nrows();
        let mut parts: Vec<ArrayView2<f64>> = obs.iter().map(|o| o.view()).collect();
        parts.extend(actions.iter().map(|a| a.view()));
        let tag = if self.config.shared_critic {
            let mut t = Array2::zeros((rows, self.num_agents()));
            t.column_mut(agent).fill(1.0);
            t
        } else {
            Array2::zeros((rows, 0))
        };
        parts.push(tag.view());
        concatenate(Axis(1), &parts).expect("rows agree")
    }

    /// One action per agent; see [`act_with`].
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[Vec<f64>],
        masks: &[Vec<bool>],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Vec<usize>, MarlError> {
        act_with(&self.actors, &self.schedule, obs, masks, epsilon, rng)
    }

    /// One critic and one actor step per agent on `batch`, then a soft
    /// update of every target network. Returns mean actor and critic loss.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Minibatch, rng: &mut R) -> Result<(f64, f64), MarlError> {
        let agents = self.num_agents();
        let rows = batch.rows();
        let mut next_actions = Vec::with_capacity(agents);
        for k in 0..agents {
            let (logits, _) = self.target_actors[k].logits(batch.next_obs[k].view(), &self.schedule, self.config.target_noise, rng)?;
            let chosen: Vec<usize> = (0..rows)
                .map(|i| masked_argmax(logits.row(i).as_slice().expect("row-major"), &batch.next_masks[k][i]))
                .collect();
            next_actions.push(one_hot_rows(&chosen, self.action_dim));
        }
        let taken: Vec<Array2<f64>> = batch.actions.iter().map(|a| one_hot_rows(a, self.action_dim)).collect();
        let settings = ActorStepSettings {
            temperature: self.config.softmax_temperature,
            noise_scale: 1.0,
            clip: self.clip(),
            logit_reg: self.config.logit_reg,
        };
        let (mut actor_sum, mut critic_sum) = (0.0, 0.0);
        for k in 0..agents {
            let c = self.critic_slot(k);
            let next_input = self.critic_input(&batch.next_obs, &next_actions, k);
            let q_next = critic_forward(&self.target_critics[c], next_input.view())?;
            let targets: Vec<f64> = (0..rows)
                .map(|i| td_target(batch.rewards[[i, k]], batch.done[i], q_next[i], self.config.discount))
                .collect();
            let input = self.critic_input(&batch.obs, &taken, k);
            critic_sum += update_critic(&mut self.critics[c], &mut self.critic_opts[c], input.view(), &targets, settings.clip)?;

            let start = agents * self.obs_dim + k * self.action_dim;
            let imitation = self.imitation_rows(batch, k);
            let imitate = imitation
                .as_ref()
                .map(|(target, obs)| (self.config.aux_bc_weight, target.view(), obs.view()));
            actor_sum += update_actor(
                &mut self.actors[k],
                &mut self.actor_opts[k],
                &self.critics[c],
                &self.schedule,
                ActorBatch {
                    obs: batch.obs[k].view(),
                    masks: &batch.masks[k],
                    critic_input: input.view(),
                    block: start..start + self.action_dim,
                },
                settings,
                imitate,
                rng,
            )?;
        }
        self.soft_update_targets();
        Ok((actor_sum / agents as f64, critic_sum / agents as f64))
    }

    /// Buffer actions of agent `k` whose reward beats the batch mean, as
    /// one-hot targets with their observations.
    fn imitation_rows(&self, batch: &Minibatch, k: usize) -> Option<(Array2<f64>, Array2<f64>)> {
        if self.config.aux_bc_weight <= 0.0 {
            return None;
        }
        let rewards = batch.rewards.column(k);
        let mean = rewards.mean().unwrap_or(0.0);
        let keep: Vec<usize> = (0..batch.rows()).filter(|&i| rewards[i] > mean).collect();
        let actions: Vec<usize> = keep.iter().map(|&i| batch.actions[k][i]).collect();
        Some((one_hot_rows(&actions, self.action_dim), batch.obs[k].select(Axis(0), &keep)))
    }

    pub fn soft_update_targets(&mut self) {
        let tau = self.config.tau;
        for (t, a) in self.target_actors.iter_mut().zip(&self.actors) {
            t.mlp_mut().soft_update_from(a.mlp(), tau);
        }
        for (t, c) in self.target_critics.iter_mut().zip(&self.critics) {
            t.soft_update_from(c, tau);
        }
    }
}

/// `target ← (1 - tau)·target + tau·online`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    target.soft_update_from(online, tau);
}
