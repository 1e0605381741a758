//! Multi-agent environment over a planned route.
//!
//! Every UAV in the executor pool is an agent. One step is one assignment
//! round: each agent either idles or claims the next `b` layers of a task,
//! claims start together at the round clock, and the clock then advances by
//! the longest claimed block (or `idle_slot_s` when nobody works). A task
//! accepts one claim per round; on contention the lower agent index wins and
//! the others are treated as invalid. Consecutive blocks on the same UAV
//! merge into one pipeline stage, so layer hand-offs happen only between
//! stages.
//!
//! The swarm starts over the first target with full batteries. Each arrival
//! creates that target's task. A leg ends when every task is resolved or
//! after `rounds_per_leg` rounds; unfinished tasks then expire, the flight
//! to the next stop is charged to every UAV and the clock advances by the
//! flight time. The episode ends back at base or as soon as some UAV holds
//! less energy than the flight home needs.
//!
//! Rewards per agent: the individual term is `δ·(-(compute + transmit) /
//! cap)` for this agent's energy this round while above the return reserve,
//! else `-σ·(cap - remaining) / cap`. The group term `ε·u2 + θ·u3` is paid on
//! the round a task resolves. The two are blended by `vartheta_reward` and
//! invalid actions lose `invalid_action_penalty` on top.

mod action;
mod observe;
mod script;
mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assignment::{score_outcome, stage_cost, Constraint, StageCost, TaskOutcome};
use crate::physics::{flight_energy, rendezvous_energy, EnergyBreakdown, LinkTable, PhysicsError};
use crate::scenario::{Position3, Scenario, TaskSpec};

pub use action::{ActionSpace, Intent};
pub use observe::ObservationLayout;
pub use script::ScriptedPolicy;
pub use trace::{EpisodeTrace, TaskRecord, TraceRow, TRACE_CSV_HEADER};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
    #[error("agent {agent} chose action {action} outside 0..{size}")]
    ActionOutOfRange { agent: usize, action: usize, size: usize },
    #[error("route must visit every target exactly once")]
    InvalidRoute,
    #[error("no agent can execute layers")]
    NoAgents,
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

#[derive(Debug, Clone)]
struct ActiveTask {
    spec: TaskSpec,
    frontier: usize,
    holder: Option<usize>,
    ready_at: f64,
    outcome: TaskOutcome,
    stages: Vec<(usize, usize, usize)>,
}

/// Read-only view of a task in a slot.
#[derive(Debug, Clone, Copy)]
pub struct TaskView<'a> {
    pub spec: &'a TaskSpec,
    pub frontier: usize,
    pub holder: Option<usize>,
    pub ready_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Clock at the start of the round.
    pub t: f64,
    pub round_time: f64,
    /// Energy spent this step per fleet index, flight included.
    pub energy: Vec<EnergyBreakdown>,
    pub invalid: Vec<bool>,
    /// Tasks resolved this step, in resolution order.
    pub resolved: Vec<u32>,
    pub hard_stop: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct SwarmEnv {
    scenario: Scenario,
    route: Vec<u32>,
    space: ActionSpace,
    agents: Vec<usize>,
    layout: ObservationLayout,
    rng: ChaCha8Rng,
    links: LinkTable,
    clock: f64,
    leg: usize,
    round_in_leg: usize,
    slots: Vec<Option<ActiveTask>>,
    next_task_id: u32,
    energy: Vec<EnergyBreakdown>,
    memory_used: Vec<f64>,
    done: bool,
    trace: EpisodeTrace,
}

impl SwarmEnv {
    pub fn new(scenario: Scenario, route: Vec<u32>) -> Result<SwarmEnv, EnvError> {
        let mut sorted = route.clone();
        sorted.sort_unstable();
        let mut ids: Vec<u32> = scenario.targets.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if sorted != ids {
            return Err(EnvError::InvalidRoute);
        }
        let agents = scenario.executor_pool();
        if agents.is_empty() {
            return Err(EnvError::NoAgents);
        }
        let space = ActionSpace::new(scenario.sim.task_slots, scenario.sim.block_max);
        let layout = ObservationLayout::new(&scenario, agents.len());
        let links = LinkTable::deterministic(&scenario);
        let n = scenario.fleet.len();
        let slots = vec![None; scenario.sim.task_slots];
        let mut env = SwarmEnv {
            scenario,
            route,
            space,
            agents,
            layout,
            rng: ChaCha8Rng::seed_from_u64(0),
            links,
            clock: 0.0,
            leg: 0,
            round_in_leg: 0,
            slots,
            next_task_id: 1,
            energy: vec![EnergyBreakdown::default(); n],
            memory_used: vec![0.0; n],
            done: false,
            trace: EpisodeTrace::default(),
        };
        env.reset(0);
        Ok(env)
    }

    /// Starts a new episode; shadowing draws come from `seed`.
    pub fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        let n = self.scenario.fleet.len();
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.clock = 0.0;
        self.leg = 0;
        self.round_in_leg = 0;
        self.slots = vec![None; self.scenario.sim.task_slots];
        self.next_task_id = 1;
        self.energy = vec![EnergyBreakdown::default(); n];
        self.memory_used = vec![0.0; n];
        self.done = false;
        self.trace = EpisodeTrace {
            energy: self.energy.clone(),
            route: self.route.clone(),
            ..EpisodeTrace::default()
        };
        self.arrive();
        self.observations()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn route(&self) -> &[u32] {
        &self.route
    }

    pub fn action_space(&self) -> ActionSpace {
        self.space
    }

    /// Fleet index of each agent.
    pub fn agents(&self) -> &[usize] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn layout(&self) -> &ObservationLayout {
        &self.layout
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn into_trace(self) -> EpisodeTrace {
        self.trace
    }

    pub fn links(&self) -> &LinkTable {
        &self.links
    }

    /// Joules left per fleet index: cap minus everything spent.
    pub fn remaining_energy(&self) -> Vec<f64> {
        self.scenario
            .fleet
            .iter()
            .zip(&self.energy)
            .map(|(u, e)| u.energy_cap - e.total())
            .collect()
    }

    pub fn memory_used(&self) -> &[f64] {
        &self.memory_used
    }

    /// Where the swarm is now.
    pub fn location(&self) -> Position3 {
        match self.route.get(self.leg) {
            Some(&id) => self.scenario.target(id).expect("route targets exist").center,
            None => self.scenario.base,
        }
    }

    pub fn current_target(&self) -> Option<u32> {
        self.route.get(self.leg).copied()
    }

    pub fn task(&self, slot: usize) -> Option<TaskView<'_>> {
        self.slots.get(slot)?.as_ref().map(|t| TaskView {
            spec: &t.spec,
            frontier: t.frontier,
            holder: t.holder,
            ready_at: t.ready_at,
        })
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.agents.len()).map(|k| self.layout.observe(self, k)).collect()
    }

    /// Actions agent `k` may take without breaking memory or energy limits.
    pub fn action_mask(&self, k: usize) -> Vec<bool> {
        (0..self.space.size())
            .map(|a| match self.space.decode(a) {
                Some(Intent::Idle) => true,
                Some(Intent::Claim { slot, layers }) => self.claim_cost(self.agents[k], slot, layers).is_some(),
                None => false,
            })
            .collect()
    }

    /// Cost of a claim if it is admissible.
    fn claim_cost(&self, executor: usize, slot: usize, layers: usize) -> Option<StageCost> {
        let task = self.slots.get(slot)?.as_ref()?;
        let end = task.frontier + layers;
        if end > task.spec.num_layers() {
            return None;
        }
        let cost = stage_cost(
            &self.scenario,
            &self.links,
            &task.spec.layers,
            task.frontier,
            end,
            task.holder,
            executor,
        )
        .ok()?;
        let remaining = self.remaining_energy();
        let uav = &self.scenario.fleet[executor];
        if self.memory_used[executor] + cost.memory > uav.memory_cap {
            return None;
        }
        if cost.compute_energy > remaining[executor] {
            return None;
        }
        if let Some(s) = cost.sender {
            if cost.transmit_energy > remaining[s] {
                return None;
            }
        }
        Some(cost)
    }

    fn arrive(&mut self) {
        if self.scenario.radio.shadow_sigma > 0.0 {
            self.links = LinkTable::sampled(&self.scenario, &mut self.rng);
        }
        let Some(target) = self.current_target() else {
            return;
        };
        let id = self.next_task_id;
        self.next_task_id += 1;
        let spec = self
            .scenario
            .task_for_target(id, target, self.clock)
            .expect("validated scenario has a model for every target");
        let Some(slot) = self.slots.iter_mut().find(|s| s.is_none()) else {
            return;
        };
        *slot = Some(ActiveTask {
            outcome: TaskOutcome::empty(self.scenario.fleet.len(), spec.created_at),
            ready_at: spec.created_at,
            spec,
            frontier: 0,
            holder: None,
            stages: Vec::new(),
        });
    }

    /// Scores and removes the task in `slot`; returns its group reward.
    fn resolve(&mut self, slot: usize) -> f64 {
        let task = self.slots[slot].take().expect("slot holds a task");
        for (used, held) in self.memory_used.iter_mut().zip(&task.outcome.memory) {
            *used -= held;
        }
        let aoi = task.outcome.aoi();
        let finished = task.frontier == task.spec.num_layers();
        let violated = if finished && aoi <= task.spec.max_latency {
            vec![]
        } else {
            vec![Constraint::C7]
        };
        let report = score_outcome(&self.scenario, &task.spec, &task.outcome, &self.remaining_energy(), violated);
        let w = &self.scenario.weights;
        let group = w.epsilon * report.u2 + w.theta * report.u3;
        self.trace.tasks.push(TaskRecord {
            task_id: task.spec.id,
            origin_target: task.spec.origin_target,
            num_layers: task.spec.num_layers(),
            outcome: task.outcome,
            stages: task.stages,
            report,
        });
        group
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        if actions.len() != self.agents.len() {
            return Err(EnvError::WrongActionCount {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        let intents = actions
            .iter()
            .enumerate()
            .map(|(agent, &action)| {
                self.space.decode(action).ok_or(EnvError::ActionOutOfRange {
                    agent,
                    action,
                    size: self.space.size(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let n = self.scenario.fleet.len();
        let t0 = self.clock;
        let mut delta = vec![EnergyBreakdown::default(); n];
        let mut invalid = vec![false; self.agents.len()];
        let mut claimed = vec![false; self.slots.len()];
        let mut claimed_task: Vec<Option<usize>> = vec![None; self.agents.len()];
        let mut round_time: f64 = 0.0;
        let mut worked = false;

        for (k, intent) in intents.iter().enumerate() {
            let Intent::Claim { slot, layers } = *intent else {
                continue;
            };
            let executor = self.agents[k];
            let cost = match self.claim_cost(executor, slot, layers) {
                Some(c) if !claimed[slot] => c,
                _ => {
                    invalid[k] = true;
                    continue;
                }
            };
            claimed[slot] = true;
            claimed_task[k] = Some(slot);
            worked = true;
            let task = self.slots[slot].as_mut().expect("admissible claim has a task");
            let waiting = (t0 - task.ready_at).max(0.0);
            task.outcome.push_stage(&cost, layers, waiting);
            if let Some(s) = cost.sender {
                delta[s].transmit += cost.transmit_energy;
            }
            delta[executor].compute += cost.compute_energy;
            self.memory_used[executor] += cost.memory;
            let end = task.frontier + layers;
            match task.stages.last_mut() {
                Some(last) if last.0 == executor => last.2 = end,
                _ => task.stages.push((executor, task.frontier, end)),
            }
            task.frontier = end;
            task.holder = Some(executor);
            task.ready_at = t0 + cost.duration();
            round_time = round_time.max(cost.duration());
        }
        if !worked {
            round_time = self.scenario.sim.idle_slot_s;
        }
        self.clock = t0 + round_time;
        for (total, d) in self.energy.iter_mut().zip(&delta) {
            total.add(d);
        }

        // Per-agent slot snapshot for the trace, taken before resolution.
        let claimed_view: Vec<Option<(u32, usize, f64)>> = claimed_task
            .iter()
            .map(|slot| {
                slot.and_then(|s| self.slots[s].as_ref())
                    .map(|t| (t.spec.id, t.frontier, t.outcome.aoi()))
            })
            .collect();

        let mut group = 0.0;
        let mut resolved = Vec::new();
        for slot in 0..self.slots.len() {
            let Some(task) = &self.slots[slot] else { continue };
            let finished = task.frontier == task.spec.num_layers();
            let expired = self.clock - task.spec.created_at > task.spec.max_latency;
            if finished || expired {
                resolved.push(task.spec.id);
                group += self.resolve(slot);
            }
        }

        self.round_in_leg += 1;
        let leg_over = self.slots.iter().all(|s| s.is_none()) || self.round_in_leg >= self.scenario.sim.rounds_per_leg;
        if leg_over {
            for slot in 0..self.slots.len() {
                if let Some(task) = &self.slots[slot] {
                    resolved.push(task.spec.id);
                    group += self.resolve(slot);
                }
            }
            let from = self.location();
            self.leg += 1;
            self.round_in_leg = 0;
            let to = self.location();
            let fly = flight_energy(from.distance(&to), &self.scenario.flight);
            for (total, d) in self.energy.iter_mut().zip(delta.iter_mut()) {
                total.flight += fly;
                d.flight += fly;
            }
            self.clock += from.distance(&to) / self.scenario.flight.speed;
            if self.leg >= self.route.len() {
                self.done = true;
            } else {
                self.arrive();
            }
        }

        let remaining = self.remaining_energy();
        let reserve = rendezvous_energy(&self.location(), &self.scenario.base, &self.scenario.flight);
        let hard_stop = !self.done && remaining.iter().any(|&r| r < reserve);
        if hard_stop {
            for slot in 0..self.slots.len() {
                if let Some(task) = &self.slots[slot] {
                    resolved.push(task.spec.id);
                    group += self.resolve(slot);
                }
            }
            self.done = true;
            self.trace.hard_stop = true;
        }

        let w = &self.scenario.weights;
        let sim = &self.scenario.sim;
        let mut rewards = Vec::with_capacity(self.agents.len());
        for (k, &e) in self.agents.iter().enumerate() {
            let cap = self.scenario.fleet[e].energy_cap;
            let individual = if remaining[e] >= reserve {
                -w.delta * (delta[e].compute + delta[e].transmit) / cap
            } else {
                -w.sigma * (cap - remaining[e]) / cap
            };
            let mut r = w.vartheta_reward * individual + (1.0 - w.vartheta_reward) * group;
            if invalid[k] {
                r -= sim.invalid_action_penalty;
            }
            rewards.push(r);
        }

        for (k, &e) in self.agents.iter().enumerate() {
            let (task, layers_done, aoi_s) = match claimed_view[k] {
                Some((id, frontier, aoi)) => (Some(id), frontier, aoi),
                None => (None, 0, 0.0),
            };
            self.trace.rows.push(TraceRow {
                t: t0,
                agent: self.scenario.fleet[e].id,
                action: actions[k],
                task,
                layers_done,
                aoi_s,
                e_comp: delta[e].compute,
                e_trans: delta[e].transmit,
                e_fly: delta[e].flight,
                reward: rewards[k],
            });
        }
        self.trace.energy = self.energy.clone();

        Ok(StepResult {
            observations: self.observations(),
            rewards,
            done: self.done,
            info: StepInfo {
                t: t0,
                round_time,
                energy: delta,
                invalid,
                resolved,
                hard_stop,
            },
        })
    }

    /// Runs `policy` from a fresh reset to the end of the episode.
    pub fn rollout(&mut self, seed: u64, mut policy: impl FnMut(&SwarmEnv) -> Vec<usize>) -> Result<&EpisodeTrace, EnvError> {
        self.reset(seed);
        while !self.done {
            let actions = policy(self);
            self.step(&actions)?;
        }
        Ok(&self.trace)
    }
}
