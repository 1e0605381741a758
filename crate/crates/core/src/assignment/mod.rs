//! Split-point decisions, constraint checks and the utility of a decision.
//!
//! A decision lists pipeline executors (fleet indices) in stage order and the
//! 1-based split points between them: stage `j` runs layers
//! `p[j-1]+1 ..= p[j]` with `p[0] = 0` and the last stage ending at `L`.
//!
//! Utility terms are dimensionless and larger is better:
//! - energy: `-Σ (compute + transmit) / energy_cap` over UAVs;
//! - completion: `α·η - β·AoI/τ` when every layer finished within `τ`, else
//!   `γ·(layers_done / L) - β`;
//! - balance: minus the population variance of remaining energy fractions
//!   across the whole fleet.
//!
//! The unnormalized counterparts are kept in the `raw_*` fields.

mod greedy;
mod oracle;
mod pipeline;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::physics::{rendezvous_energy, LinkTable, PhysicsError};
use crate::scenario::{Position3, Scenario, TaskSpec};

pub use greedy::greedy_decision;
pub use oracle::{
    decision_count, enumerate_decisions, solve_oracle, write_oracle_csv, OracleOutcome, OracleRow, DEFAULT_ORACLE_LIMIT,
    ORACLE_CSV_HEADER,
};
pub use pipeline::{simulate_stages, stage_cost, StageCost, TaskOutcome};

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error("decision is malformed: violates {0:?}")]
    Malformed(Vec<Constraint>),
    #[error("search space has {count} decisions, above the limit of {limit}")]
    SearchTooLarge { count: u128, limit: u128 },
    #[error("no executor is available")]
    NoExecutor,
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("writing oracle csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Constraint {
    /// Split points strictly increasing inside the model.
    C1,
    /// Distinct executors drawn from the pool.
    C2,
    /// Stage memory within the executor's cap.
    C3,
    /// Energy spent within what remains.
    C4,
    /// Enough energy left to fly back to base.
    C5,
    /// Task belongs to the target being inspected.
    C6,
    /// Age of information within the task deadline.
    C7,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentMode {
    Swarm,
    Partial,
    Binary,
}

impl fmt::Display for AssignmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssignmentMode::Swarm => "swarm",
            AssignmentMode::Partial => "partial",
            AssignmentMode::Binary => "binary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssignmentDecision {
    pub task_id: u32,
    /// Fleet indices in pipeline order.
    pub executors: Vec<usize>,
    /// 1-based last layer of every stage but the final one.
    pub split_points: Vec<usize>,
}

impl AssignmentDecision {
    /// The whole task on one executor.
    pub fn single(task_id: u32, executor: usize) -> AssignmentDecision {
        AssignmentDecision {
            task_id,
            executors: vec![executor],
            split_points: Vec::new(),
        }
    }

    pub fn num_stages(&self) -> usize {
        self.executors.len()
    }

    /// Exclusive 0-based end layer of every stage.
    pub fn stage_bounds(&self, num_layers: usize) -> Vec<usize> {
        self.split_points.iter().copied().chain(std::iter::once(num_layers)).collect()
    }

    /// Structural violations (C1, C2) against `pool`.
    pub fn structural_violations(&self, num_layers: usize, pool: &[usize]) -> Vec<Constraint> {
        let mut out = Vec::new();
        let splits_ok = !self.executors.is_empty()
            && self.split_points.len() + 1 == self.executors.len()
            && self.split_points.windows(2).all(|w| w[0] < w[1])
            && self.split_points.iter().all(|&p| p >= 1 && p < num_layers);
        if !splits_ok {
            out.push(Constraint::C1);
        }
        let distinct: BTreeSet<usize> = self.executors.iter().copied().collect();
        if distinct.len() != self.executors.len()
            || self.executors.len() > pool.len()
            || !self.executors.iter().all(|e| pool.contains(e))
        {
            out.push(Constraint::C2);
        }
        out
    }
}

pub fn classify_mode(decision: &AssignmentDecision, scenario: &Scenario) -> AssignmentMode {
    let followers = scenario.follower_indices();
    if decision.executors.len() == 1 {
        return AssignmentMode::Binary;
    }
    if followers.iter().all(|f| decision.executors.contains(f)) {
        AssignmentMode::Swarm
    } else {
        AssignmentMode::Partial
    }
}

/// What the fleet has left when a decision is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetState {
    /// Joules per fleet index.
    pub remaining_energy: Vec<f64>,
    /// Bytes held per fleet index.
    pub memory_used: Vec<f64>,
    /// Where the swarm is; drives the return-to-base reserve.
    pub location: Position3,
    pub clock: f64,
    pub current_target: Option<u32>,
}

impl FleetState {
    /// Full batteries and empty memory at `location`.
    pub fn fresh(scenario: &Scenario, location: Position3) -> FleetState {
        FleetState {
            remaining_energy: scenario.fleet.iter().map(|u| u.energy_cap).collect(),
            memory_used: vec![0.0; scenario.fleet.len()],
            location,
            clock: 0.0,
            current_target: None,
        }
    }

    /// Fresh state positioned over the task's target at its creation time.
    pub fn for_task(scenario: &Scenario, task: &TaskSpec) -> FleetState {
        let location = scenario
            .target(task.origin_target)
            .map(|t| t.center)
            .unwrap_or(scenario.base);
        FleetState {
            clock: task.created_at,
            current_target: Some(task.origin_target),
            ..FleetState::fresh(scenario, location)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReport {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub total: f64,
    pub eta: f64,
    pub aoi: f64,
    pub completed: bool,
    pub feasible: bool,
    pub violated: Vec<Constraint>,
    /// Joules spent on compute and transmission.
    pub raw_u1: f64,
    /// Completion term with AoI and deadline in seconds and layers as counts.
    pub raw_u2: f64,
    /// Sum of squared deviations of remaining energy, J².
    pub raw_u3: f64,
}

/// Utility of a realized task outcome given the fleet's energy afterwards.
pub fn score_outcome(
    scenario: &Scenario,
    task: &TaskSpec,
    outcome: &TaskOutcome,
    remaining_after: &[f64],
    violated: Vec<Constraint>,
) -> UtilityReport {
    let w = &scenario.weights;
    let num_layers = task.num_layers();
    let aoi = outcome.aoi();
    let completed = outcome.layers_completed == num_layers && aoi <= task.max_latency;
    let eta = outcome.layers_completed as f64 / num_layers as f64;

    let mut u1 = 0.0;
    let mut raw_u1 = 0.0;
    for (e, uav) in outcome.energy.iter().zip(&scenario.fleet) {
        let spent = e.compute + e.transmit;
        raw_u1 += spent;
        u1 -= spent / uav.energy_cap;
    }

    let (u2, raw_u2) = if completed {
        (
            w.alpha * eta - w.beta * aoi / task.max_latency,
            w.alpha * eta - w.beta * aoi,
        )
    } else {
        (
            w.gamma * eta - w.beta,
            w.gamma * outcome.layers_completed as f64 - w.beta * task.max_latency,
        )
    };

    let n = remaining_after.len() as f64;
    let fractions: Vec<f64> = remaining_after
        .iter()
        .zip(&scenario.fleet)
        .map(|(r, u)| r / u.energy_cap)
        .collect();
    let mean_frac = fractions.iter().sum::<f64>() / n;
    let u3 = -fractions.iter().map(|f| (f - mean_frac).powi(2)).sum::<f64>() / n;
    let mean_raw = remaining_after.iter().sum::<f64>() / n;
    let raw_u3 = remaining_after.iter().map(|r| (r - mean_raw).powi(2)).sum::<f64>();

    UtilityReport {
        u1,
        u2,
        u3,
        total: w.delta * u1 + w.epsilon * u2 + w.theta * u3,
        eta,
        aoi,
        completed,
        feasible: violated.is_empty(),
        violated,
        raw_u1,
        raw_u2,
        raw_u3,
    }
}

/// Simulated outcome and every violated constraint of a well-formed decision.
fn assess(
    decision: &AssignmentDecision,
    task: &TaskSpec,
    scenario: &Scenario,
    state: &FleetState,
    links: &LinkTable,
) -> Result<(TaskOutcome, Vec<f64>, Vec<Constraint>), AssignmentError> {
    let num_layers = task.num_layers();
    let structural = decision.structural_violations(num_layers, &scenario.executor_pool());
    if !structural.is_empty() {
        return Err(AssignmentError::Malformed(structural));
    }
    let bounds = decision.stage_bounds(num_layers);
    let start = state.clock.max(task.created_at);
    let outcome = simulate_stages(scenario, links, &task.layers, &decision.executors, &bounds, task.created_at, start)?;

    let mut violated = BTreeSet::new();
    let reserve = rendezvous_energy(&state.location, &scenario.base, &scenario.flight);
    let mut remaining_after = state.remaining_energy.clone();
    for (i, uav) in scenario.fleet.iter().enumerate() {
        if state.memory_used[i] + outcome.memory[i] > uav.memory_cap {
            violated.insert(Constraint::C3);
        }
        let spent = outcome.energy[i].total();
        remaining_after[i] -= spent;
        if spent > 0.0 {
            if spent > state.remaining_energy[i] {
                violated.insert(Constraint::C4);
            }
            if remaining_after[i] < reserve {
                violated.insert(Constraint::C5);
            }
        }
    }
    if state.current_target.is_some_and(|t| t != task.origin_target) {
        violated.insert(Constraint::C6);
    }
    if outcome.aoi() > task.max_latency {
        violated.insert(Constraint::C7);
    }
    Ok((outcome, remaining_after, violated.into_iter().collect()))
}

/// Every violated constraint, in id order.
pub fn check_constraints(
    decision: &AssignmentDecision,
    task: &TaskSpec,
    scenario: &Scenario,
    state: &FleetState,
    links: &LinkTable,
) -> Vec<Constraint> {
    match assess(decision, task, scenario, state, links) {
        Ok((_, _, violated)) => violated,
        Err(AssignmentError::Malformed(v)) => v,
        Err(_) => vec![Constraint::C7],
    }
}

pub fn evaluate_utility(
    decision: &AssignmentDecision,
    task: &TaskSpec,
    scenario: &Scenario,
    state: &FleetState,
    links: &LinkTable,
) -> Result<UtilityReport, AssignmentError> {
    let (outcome, remaining_after, violated) = assess(decision, task, scenario, state, links)?;
    Ok(score_outcome(scenario, task, &outcome, &remaining_after, violated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{tiny_scenario, Weights};
    use approx::assert_relative_eq;

    fn tiny() -> (Scenario, TaskSpec, FleetState, LinkTable) {
        let s = tiny_scenario();
        let task = s.task_for_target(1, 1, 0.0).unwrap();
        let state = FleetState::for_task(&s, &task);
        let links = LinkTable::deterministic(&s);
        (s, task, state, links)
    }

    fn decision(executors: &[usize], splits: &[usize]) -> AssignmentDecision {
        AssignmentDecision {
            task_id: 1,
            executors: executors.to_vec(),
            split_points: splits.to_vec(),
        }
    }

    #[test]
    fn modes() {
        let (s, ..) = tiny();
        assert_eq!(classify_mode(&decision(&[1, 2, 3], &[2, 4]), &s), AssignmentMode::Swarm);
        assert_eq!(classify_mode(&decision(&[2], &[]), &s), AssignmentMode::Binary);
        assert_eq!(classify_mode(&decision(&[3, 1], &[3]), &s), AssignmentMode::Partial);
    }

    #[test]
    fn structural_checks() {
        let pool = [1, 2, 3];
        assert!(decision(&[1, 2], &[3]).structural_violations(6, &pool).is_empty());
        assert_eq!(decision(&[1, 2], &[6]).structural_violations(6, &pool), vec![Constraint::C1]);
        assert_eq!(decision(&[1, 2, 3], &[4, 2]).structural_violations(6, &pool), vec![Constraint::C1]);
        assert_eq!(decision(&[1, 1], &[3]).structural_violations(6, &pool), vec![Constraint::C2]);
        assert_eq!(decision(&[0], &[]).structural_violations(6, &pool), vec![Constraint::C2]);
    }

    #[test]
    fn memory_violation_is_c3() {
        let (s, task, state, links) = tiny();
        // follower 1 holds 8e8 bytes; six layers need 1.2e9
        let v = check_constraints(&decision(&[1], &[]), &task, &s, &state, &links);
        assert!(v.contains(&Constraint::C3));
    }

    #[test]
    fn late_pipeline_is_c7() {
        let (s, task, state, links) = tiny();
        // 4e8 bits after layer 1 take seconds on a 5 MHz link
        let v = check_constraints(&decision(&[2, 3], &[1]), &task, &s, &state, &links);
        assert!(v.contains(&Constraint::C7));
    }

    #[test]
    fn feasible_two_stage_has_no_violations() {
        let (s, task, state, links) = tiny();
        let d = decision(&[2, 3], &[5]);
        assert!(check_constraints(&d, &task, &s, &state, &links).is_empty());
        let r = evaluate_utility(&d, &task, &s, &state, &links).unwrap();
        assert!(r.feasible && r.completed);
        assert_eq!(r.eta, 1.0);
    }

    #[test]
    fn wrong_target_is_c6() {
        let (s, task, mut state, links) = tiny();
        state.current_target = Some(99);
        let v = check_constraints(&decision(&[2], &[]), &task, &s, &state, &links);
        assert_eq!(v, vec![Constraint::C6]);
    }

    #[test]
    fn equal_energies_give_zero_balance_term() {
        let (s, task, state, _) = tiny();
        let outcome = TaskOutcome::empty(s.fleet.len(), 0.0);
        let r = score_outcome(&s, &task, &outcome, &state.remaining_energy, vec![]);
        assert_eq!(r.u3, 0.0);
        assert_eq!(r.raw_u3, 0.0);
    }

    #[test]
    fn nothing_done_scores_minus_beta_deadline() {
        let (s, task, state, _) = tiny();
        let outcome = TaskOutcome::empty(s.fleet.len(), 0.0);
        let r = score_outcome(&s, &task, &outcome, &state.remaining_energy, vec![]);
        assert!(!r.completed);
        assert_eq!(r.raw_u2, -s.weights.beta * task.max_latency);
        assert_eq!(r.u2, -s.weights.beta);
    }

    #[test]
    fn total_blends_terms() {
        let (mut s, task, state, links) = tiny();
        s.weights = Weights {
            delta: 0.2,
            epsilon: 0.5,
            theta: 0.3,
            ..s.weights
        };
        let r = evaluate_utility(&decision(&[2], &[]), &task, &s, &state, &links).unwrap();
        assert_relative_eq!(r.total, 0.2 * r.u1 + 0.5 * r.u2 + 0.3 * r.u3);
    }
}
