//! One-stage-lookahead greedy assignment used as a baseline.

use std::cmp::Ordering;

use super::{evaluate_utility, AssignmentDecision, AssignmentError, FleetState, UtilityReport};
use crate::physics::LinkTable;
use crate::scenario::{Scenario, TaskSpec};

fn rank(r: &UtilityReport) -> (bool, f64) {
    (r.feasible, r.total)
}

fn better(a: &UtilityReport, b: &UtilityReport) -> bool {
    let (fa, ua) = rank(a);
    let (fb, ub) = rank(b);
    fa.cmp(&fb).then(ua.partial_cmp(&ub).unwrap_or(Ordering::Equal)) == Ordering::Greater
}

/// Builds a pipeline stage by stage. Each step picks the unused executor and
/// end layer whose completion, with the remaining layers on the best single
/// unused executor, scores highest (feasible before infeasible).
pub fn greedy_decision(
    task: &TaskSpec,
    scenario: &Scenario,
    state: &FleetState,
    links: &LinkTable,
) -> Result<(AssignmentDecision, UtilityReport), AssignmentError> {
    let pool = scenario.executor_pool();
    if pool.is_empty() {
        return Err(AssignmentError::NoExecutor);
    }
    let num_layers = task.num_layers();
    let mut executors: Vec<usize> = Vec::new();
    let mut splits: Vec<usize> = Vec::new();
    let mut frontier = 0;
    loop {
        let mut best: Option<(usize, usize, UtilityReport)> = None;
        let unused: Vec<usize> = pool.iter().copied().filter(|e| !executors.contains(e)).collect();
        for &e in &unused {
            for end in frontier + 1..=num_layers {
                let rest: Vec<usize> = if end == num_layers {
                    vec![usize::MAX]
                } else {
                    unused.iter().copied().filter(|&r| r != e).collect()
                };
                for r in rest {
                    let mut d = AssignmentDecision {
                        task_id: task.id,
                        executors: executors.clone(),
                        split_points: splits.clone(),
                    };
                    if frontier > 0 {
                        d.split_points.push(frontier);
                    }
                    d.executors.push(e);
                    if r != usize::MAX {
                        d.split_points.push(end);
                        d.executors.push(r);
                    }
                    let report = evaluate_utility(&d, task, scenario, state, links)?;
                    if best.as_ref().is_none_or(|(_, _, b)| better(&report, b)) {
                        best = Some((e, end, report));
                    }
                }
            }
        }
        let (e, end, report) = best.ok_or(AssignmentError::NoExecutor)?;
        if frontier > 0 {
            splits.push(frontier);
        }
        executors.push(e);
        frontier = end;
        if frontier == num_layers {
            let decision = AssignmentDecision {
                task_id: task.id,
                executors,
                split_points: splits,
            };
            return Ok((decision, report));
        }
    }
}
