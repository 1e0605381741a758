use crate::assignment::{greedy_decision, solve_oracle, AssignmentDecision, AssignmentError, FleetState};
use crate::env::{EpisodeTrace, ScriptedPolicy, SwarmEnv};
use crate::physics::LinkTable;
use crate::scenario::{Scenario, TaskSpec};

use super::MarlError;

/// What the fleet holds right now, for deciding the task at the current
/// stop.
fn fleet_state(env: &SwarmEnv) -> FleetState {
    FleetState {
        remaining_energy: env.remaining_energy(),
        memory_used: env.memory_used().to_vec(),
        location: env.location(),
        clock: env.clock(),
        current_target: env.current_target(),
    }
}

/// Rolls out a policy that fixes each task's decision when the task appears,
/// using `decide` on the fleet's state and links at that moment.
pub fn scripted_episode(
    env: &mut SwarmEnv,
    seed: u64,
    mut decide: impl FnMut(&SwarmEnv, &FleetState, &TaskSpec) -> Result<AssignmentDecision, AssignmentError>,
) -> Result<EpisodeTrace, MarlError> {
    env.reset(seed);
    let mut plans: Vec<(u32, AssignmentDecision)> = Vec::new();
    while !env.is_done() {
        for slot in 0..env.action_space().slots {
            let Some(task) = env.task(slot) else { continue };
            let target = task.spec.origin_target;
            if plans.iter().any(|(t, _)| *t == target) {
                continue;
            }
            let spec = task.spec.clone();
            let decision = decide(env, &fleet_state(env), &spec)?;
            plans.push((target, decision));
        }
        let actions = ScriptedPolicy::new(plans.clone()).actions(env);
        env.step(&actions)?;
    }
    Ok(env.trace().clone())
}

/// One episode where every task follows the greedy pipeline builder.
pub fn greedy_assignment_baseline(scenario: &Scenario, route: &[u32], seed: u64) -> Result<EpisodeTrace, MarlError> {
    let mut env = SwarmEnv::new(scenario.clone(), route.to_vec())?;
    scripted_episode(&mut env, seed, |env, state, task| {
        Ok(greedy_decision(task, env.scenario(), state, env.links())?.0)
    })
}

/// One episode where every task follows its exhaustive optimum.
pub fn oracle_baseline(scenario: &Scenario, route: &[u32], seed: u64, limit: u128) -> Result<EpisodeTrace, MarlError> {
    let mut env = SwarmEnv::new(scenario.clone(), route.to_vec())?;
    scripted_episode(&mut env, seed, |env, state, task| {
        Ok(solve_oracle(task, env.scenario(), state, env.links(), limit)?.decision)
    })
}

/// Mean optimal utility over every target's task, each decided from full
/// batteries over its target with shadow-free links. `None` when some
/// search exceeds `limit`.
pub fn oracle_reference(scenario: &Scenario, limit: u128) -> Result<Option<f64>, MarlError> {
    let links = LinkTable::deterministic(scenario);
    let mut total = 0.0;
    for target in &scenario.targets {
        let task = scenario
            .task_for_target(target.id, target.id, 0.0)
            .ok_or(MarlError::Config(format!("target {} has no model", target.id)))?;
        match solve_oracle(&task, scenario, &FleetState::for_task(scenario, &task), &links, limit) {
            Ok(o) => total += o.report.total,
            Err(AssignmentError::SearchTooLarge { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(total / scenario.targets.len().max(1) as f64))
}
