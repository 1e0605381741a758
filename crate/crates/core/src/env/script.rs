use crate::assignment::AssignmentDecision;

use super::{Intent, SwarmEnv};

/// Replays fixed decisions, one per target: the executor of the stage that
/// holds the task frontier claims as many layers as the block limit and the
/// stage boundary allow; everyone else idles.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedPolicy {
    plans: Vec<(u32, AssignmentDecision)>,
}

impl ScriptedPolicy {
    /// `plans` pairs a target id with the decision for its task.
    pub fn new(plans: Vec<(u32, AssignmentDecision)>) -> ScriptedPolicy {
        ScriptedPolicy { plans }
    }

    pub fn actions(&self, env: &SwarmEnv) -> Vec<usize> {
        let space = env.action_space();
        let mut actions = vec![0; env.num_agents()];
        for slot in 0..space.slots {
            let Some(task) = env.task(slot) else { continue };
            let Some((_, decision)) = self.plans.iter().find(|(t, _)| *t == task.spec.origin_target) else {
                continue;
            };
            let bounds = decision.stage_bounds(task.spec.num_layers());
            let Some(stage) = bounds.iter().position(|&end| end > task.frontier) else {
                continue;
            };
            let executor = decision.executors[stage];
            let Some(agent) = env.agents().iter().position(|&e| e == executor) else {
                continue;
            };
            if actions[agent] != 0 {
                continue;
            }
            let layers = (bounds[stage] - task.frontier).min(space.block_max);
            actions[agent] = space.encode(Intent::Claim { slot, layers });
        }
        actions
    }
}
