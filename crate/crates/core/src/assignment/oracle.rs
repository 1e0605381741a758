//! Exhaustive search over executor orders and split vectors.

use std::cmp::Ordering;
use std::io::Write;

use itertools::Itertools;
use serde::Serialize;

use super::{
    classify_mode, evaluate_utility, AssignmentDecision, AssignmentError, FleetState, UtilityReport,
};
use crate::physics::LinkTable;
use crate::scenario::{Scenario, TaskSpec};

pub const DEFAULT_ORACLE_LIMIT: u128 = 1_000_000;

pub const ORACLE_CSV_HEADER: &str = "task_id,executors,splits,mode,u1,u2,u3,U,aoi_s,feasible";

fn falling_factorial(n: u128, k: u128) -> u128 {
    (0..k).map(|i| n - i).product()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of decisions for `num_layers` layers and `pool_size` executors:
/// Σ_{s=1..min(N,L)} N!/(N-s)! · C(L-1, s-1).
pub fn decision_count(num_layers: usize, pool_size: usize) -> u128 {
    let (l, n) = (num_layers as u128, pool_size as u128);
    (1..=n.min(l)).map(|s| falling_factorial(n, s) * binomial(l - 1, s - 1)).sum()
}

/// Every structurally valid decision: stage count ascending, then executor
/// order, then split vector, each lexicographic.
pub fn enumerate_decisions(task_id: u32, num_layers: usize, pool: &[usize]) -> impl Iterator<Item = AssignmentDecision> + '_ {
    (1..=pool.len().min(num_layers)).flat_map(move |stages| {
        pool.iter().copied().permutations(stages).flat_map(move |executors| {
            (1..num_layers).combinations(stages - 1).map(move |split_points| AssignmentDecision {
                task_id,
                executors: executors.clone(),
                split_points,
            })
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub decision: AssignmentDecision,
    pub report: UtilityReport,
    /// False when every decision violates something; `decision` is then the
    /// least-violating one.
    pub feasible_found: bool,
    pub evaluated: u128,
}

/// Ordering of candidates: feasible first, then fewer violations, then higher
/// utility, then fewer stages, then split vector, then executors.
fn compare(a: (&AssignmentDecision, &UtilityReport), b: (&AssignmentDecision, &UtilityReport)) -> Ordering {
    let (da, ra) = a;
    let (db, rb) = b;
    rb.feasible
        .cmp(&ra.feasible)
        .then(ra.violated.len().cmp(&rb.violated.len()))
        .then(rb.total.partial_cmp(&ra.total).unwrap_or(Ordering::Equal))
        .then(da.num_stages().cmp(&db.num_stages()))
        .then(da.split_points.cmp(&db.split_points))
        .then(da.executors.cmp(&db.executors))
}

/// Best decision for `task` by exhaustive enumeration.
pub fn solve_oracle(
    task: &TaskSpec,
    scenario: &Scenario,
    state: &FleetState,
    links: &LinkTable,
    limit: u128,
) -> Result<OracleOutcome, AssignmentError> {
    let pool = scenario.executor_pool();
    if pool.is_empty() {
        return Err(AssignmentError::NoExecutor);
    }
    let count = decision_count(task.num_layers(), pool.len());
    if count > limit {
        return Err(AssignmentError::SearchTooLarge { count, limit });
    }
    let mut best: Option<(AssignmentDecision, UtilityReport)> = None;
    let mut evaluated = 0;
    for decision in enumerate_decisions(task.id, task.num_layers(), &pool) {
        let report = evaluate_utility(&decision, task, scenario, state, links)?;
        evaluated += 1;
        let better = match &best {
            None => true,
            Some((bd, br)) => compare((&decision, &report), (bd, br)) == Ordering::Less,
        };
        if better {
            best = Some((decision, report));
        }
    }
    let (decision, report) = best.expect("pool is non-empty");
    Ok(OracleOutcome {
        feasible_found: report.feasible,
        decision,
        report,
        evaluated,
    })
}

/// One line of the oracle CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub task_id: u32,
    /// UAV ids joined by `;`.
    pub executors: String,
    /// Split points joined by `;`.
    pub splits: String,
    pub mode: String,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    #[serde(rename = "U")]
    pub total: f64,
    pub aoi_s: f64,
    pub feasible: bool,
}

impl OracleRow {
    pub fn new(scenario: &Scenario, decision: &AssignmentDecision, report: &UtilityReport) -> OracleRow {
        OracleRow {
            task_id: decision.task_id,
            executors: decision.executors.iter().map(|&i| scenario.fleet[i].id).join(";"),
            splits: decision.split_points.iter().join(";"),
            mode: classify_mode(decision, scenario).to_string(),
            u1: report.u1,
            u2: report.u2,
            u3: report.u3,
            total: report.total,
            aoi_s: report.aoi,
            feasible: report.feasible,
        }
    }
}

pub fn write_oracle_csv<W: Write>(out: W, rows: &[OracleRow]) -> Result<(), AssignmentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(ORACLE_CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{tiny_scenario, LayerProfile, Role};

    #[test]
    fn counts_match_hand_enumeration() {
        assert_eq!(decision_count(3, 1), 1);
        assert_eq!(decision_count(3, 2), 6);
        assert_eq!(decision_count(1, 4), 4);
        for l in 1..=8 {
            for n in 1..=4 {
                let pool: Vec<usize> = (0..n).collect();
                assert_eq!(enumerate_decisions(0, l, &pool).count() as u128, decision_count(l, n));
            }
        }
    }

    #[test]
    fn yielded_decisions_are_structurally_valid() {
        let pool = [3, 1, 2];
        for d in enumerate_decisions(0, 6, &pool) {
            assert!(d.structural_violations(6, &pool).is_empty(), "{d:?}");
        }
    }

    #[test]
    fn single_executor_gets_binary() {
        let mut s = tiny_scenario();
        s.fleet.truncate(2);
        s.fleet[1].memory_cap = 1e12;
        let task = s.task_for_target(1, 1, 0.0).unwrap();
        let out = solve_oracle(&task, &s, &FleetState::for_task(&s, &task), &LinkTable::deterministic(&s), DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(out.decision, AssignmentDecision::single(1, 1));
        assert_eq!(out.evaluated, 1);
    }

    #[test]
    fn identical_followers_split_evenly() {
        let mut s = tiny_scenario();
        s.fleet.truncate(3);
        let leader_position = s.fleet[0].position;
        for u in s.fleet.iter_mut().filter(|u| u.role == Role::Follower) {
            u.compute_rate = 10e9;
            u.memory_cap = 1e12;
            u.bandwidth = 1e12;
            u.position = leader_position;
        }
        s.models[0].layers = (1..=4)
            .map(|i| LayerProfile {
                layer_index: i,
                compute_cycles: 1e9,
                memory_bytes: 1.0,
                output_bits: 1.0,
            })
            .collect();
        s.targets[0].max_latency_s = 10.0;
        let task = s.task_for_target(1, 1, 0.0).unwrap();
        let out = solve_oracle(&task, &s, &FleetState::for_task(&s, &task), &LinkTable::deterministic(&s), DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(out.decision.split_points, vec![2]);
        assert!(out.feasible_found);
    }

    #[test]
    fn guard_refuses_large_spaces() {
        let s = tiny_scenario();
        let task = s.task_for_target(1, 1, 0.0).unwrap();
        let err = solve_oracle(&task, &s, &FleetState::for_task(&s, &task), &LinkTable::deterministic(&s), 10).unwrap_err();
        assert!(matches!(err, AssignmentError::SearchTooLarge { count: 93, limit: 10 }));
    }

    #[test]
    fn oracle_dominates_every_feasible_decision() {
        let s = tiny_scenario();
        let task = s.task_for_target(1, 1, 0.0).unwrap();
        let state = FleetState::for_task(&s, &task);
        let links = LinkTable::deterministic(&s);
        let out = solve_oracle(&task, &s, &state, &links, DEFAULT_ORACLE_LIMIT).unwrap();
        assert!(out.feasible_found);
        for d in enumerate_decisions(1, 6, &s.executor_pool()) {
            let r = evaluate_utility(&d, &task, &s, &state, &links).unwrap();
            if r.feasible {
                assert!(r.total <= out.report.total);
            }
        }
    }

    #[test]
    fn scaling_weights_keeps_argmax() {
        let mut s = tiny_scenario();
        let task = s.task_for_target(1, 1, 0.0).unwrap();
        let state = FleetState::for_task(&s, &task);
        let links = LinkTable::deterministic(&s);
        let a = solve_oracle(&task, &s, &state, &links, DEFAULT_ORACLE_LIMIT).unwrap();
        s.weights.delta *= 7.0;
        s.weights.epsilon *= 7.0;
        s.weights.theta *= 7.0;
        let b = solve_oracle(&task, &s, &state, &links, DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(a.decision, b.decision);
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_oracle_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), ORACLE_CSV_HEADER);
    }
}
