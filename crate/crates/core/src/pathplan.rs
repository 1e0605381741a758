//! Inspection-order planning over target areas.
//!
//! A leg's fitness is `w_dist·d + w_slack·(t_fly − t_proc)` where `t_proc` is
//! the processing time of the task collected at the departure node (zero at
//! the base). A leg whose processing outlasts the flight breaks the
//! finish-before-arrival rule and carries [`INFEASIBLE_LEG_PENALTY`].

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::scenario::{Position3, Scenario, TargetArea};

/// Added to a leg's fitness when processing does not finish in flight.
pub const INFEASIBLE_LEG_PENALTY: f64 = 1.0e6;

/// Target id used for the base in route output.
pub const BASE_ID: u32 = 0;

pub const ROUTE_CSV_HEADER: &str = "step,target_id,leg_distance_m,leg_slack_s,cumulative_fitness";

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("order is not a permutation of the scenario's targets")]
    NotAPermutation,
    #[error("candidate count k must be at least 1")]
    ZeroCandidates,
    #[error("restarts must be at least 1")]
    ZeroRestarts,
    #[error("writing route csv: {0}")]
    Csv(#[from] csv::Error),
}

/// A closed tour base → targets → base.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub order: Vec<u32>,
    /// One entry per leg, including the return leg.
    pub leg_distances: Vec<f64>,
    /// Flight time minus departure-node processing time, per leg.
    pub leg_slacks: Vec<f64>,
    pub leg_fitness: Vec<f64>,
    pub total_distance: f64,
    pub total_fitness: f64,
    /// Number of legs with negative slack.
    pub violations: usize,
}

impl Route {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PlanError> {
        #[derive(Serialize)]
        struct Row {
            step: usize,
            target_id: u32,
            leg_distance_m: f64,
            leg_slack_s: f64,
            cumulative_fitness: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        let mut cumulative = 0.0;
        let stops = self.order.iter().copied().chain(std::iter::once(BASE_ID));
        for (i, target_id) in stops.enumerate() {
            cumulative += self.leg_fitness[i];
            w.serialize(Row {
                step: i + 1,
                target_id,
                leg_distance_m: self.leg_distances[i],
                leg_slack_s: self.leg_slacks[i],
                cumulative_fitness: cumulative,
            })?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn leg_time(a: &Position3, b: &Position3, speed: f64) -> f64 {
    a.distance(b) / speed
}

/// Seconds to process `task_size_gb` at `rate_gb_per_min`.
pub fn processing_time(task_size_gb: f64, rate_gb_per_min: f64) -> f64 {
    task_size_gb / rate_gb_per_min * 60.0
}

/// Fitness and slack of flying `distance` meters after a task taking
/// `departure_processing` seconds.
pub fn leg_fitness(distance: f64, departure_processing: f64, scenario: &Scenario) -> (f64, f64) {
    let w = &scenario.weights;
    let slack = distance / scenario.flight.speed - departure_processing;
    let mut fitness = w.vartheta_dist * distance + w.rho_task * slack;
    if slack < 0.0 {
        fitness += INFEASIBLE_LEG_PENALTY;
    }
    (fitness, slack)
}

/// Target with the largest task size per meter from base; lowest id on ties.
pub fn select_first_target(scenario: &Scenario) -> u32 {
    let mut best: Option<(f64, u32)> = None;
    for t in &scenario.targets {
        let d = t.center.distance(&scenario.base);
        let ratio = if d > 0.0 { t.task_size_gb / d } else { f64::INFINITY };
        best = match best {
            Some((r, id)) if r > ratio || (r == ratio && id < t.id) => Some((r, id)),
            _ => Some((ratio, t.id)),
        };
    }
    best.expect("scenario has targets").1
}

struct Node {
    position: Position3,
    processing: f64,
}

fn node(scenario: &Scenario, target: Option<&TargetArea>) -> Node {
    match target {
        Some(t) => Node {
            position: t.center,
            processing: processing_time(t.task_size_gb, scenario.workload.processing_rate_gb_per_min),
        },
        None => Node {
            position: scenario.base,
            processing: 0.0,
        },
    }
}

/// Evaluates a fixed visiting order.
pub fn route_for_order(scenario: &Scenario, order: &[u32]) -> Result<Route, PlanError> {
    let mut seen: Vec<u32> = order.to_vec();
    seen.sort_unstable();
    let mut ids: Vec<u32> = scenario.targets.iter().map(|t| t.id).collect();
    ids.sort_unstable();
    if seen != ids {
        return Err(PlanError::NotAPermutation);
    }
    let stops: Vec<Option<&TargetArea>> = order
        .iter()
        .map(|id| scenario.target(*id))
        .chain(std::iter::once(None))
        .collect();
    let mut route = Route {
        order: order.to_vec(),
        leg_distances: Vec::with_capacity(stops.len()),
        leg_slacks: Vec::with_capacity(stops.len()),
        leg_fitness: Vec::with_capacity(stops.len()),
        total_distance: 0.0,
        total_fitness: 0.0,
        violations: 0,
    };
    let mut here = node(scenario, None);
    for stop in stops {
        let next = node(scenario, stop);
        let d = here.position.distance(&next.position);
        let (f, slack) = leg_fitness(d, here.processing, scenario);
        route.leg_distances.push(d);
        route.leg_slacks.push(slack);
        route.leg_fitness.push(f);
        route.total_distance += d;
        route.total_fitness += f;
        if slack < 0.0 {
            route.violations += 1;
        }
        here = next;
    }
    Ok(route)
}

/// One greedy construction. `pick` maps the number of unvisited targets to
/// the indices (into the unvisited list) that form the candidate set.
fn construct(scenario: &Scenario, mut pick: impl FnMut(usize) -> Vec<usize>) -> Route {
    let first = select_first_target(scenario);
    let mut order = vec![first];
    let mut unvisited: Vec<&TargetArea> = scenario.targets.iter().filter(|t| t.id != first).collect();
    unvisited.sort_by_key(|t| t.id);
    let mut here = node(scenario, scenario.target(first));
    while !unvisited.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for i in pick(unvisited.len()) {
            let cand = unvisited[i];
            let (f, _) = leg_fitness(here.position.distance(&cand.center), here.processing, scenario);
            let better = match best {
                None => true,
                Some((bf, bi)) => f < bf || (f == bf && cand.id < unvisited[bi].id),
            };
            if better {
                best = Some((f, i));
            }
        }
        let (_, i) = best.expect("candidate set is non-empty");
        let chosen = unvisited.remove(i);
        order.push(chosen.id);
        here = node(scenario, Some(chosen));
    }
    route_for_order(scenario, &order).expect("construction visits every target once")
}

/// Deterministic greedy: every unvisited target is a candidate at each step.
pub fn plan_route_pure_greedy(scenario: &Scenario) -> Route {
    construct(scenario, |n| (0..n).collect())
}

/// Randomized greedy with `k` sampled candidates per step, best of
/// `restarts` constructions. Restart `r` draws from stream `r` of a generator
/// seeded with `seed`, so adding restarts never changes earlier ones.
pub fn plan_route(scenario: &Scenario, k: usize, restarts: usize, seed: u64) -> Result<Route, PlanError> {
    if k == 0 {
        return Err(PlanError::ZeroCandidates);
    }
    if restarts == 0 {
        return Err(PlanError::ZeroRestarts);
    }
    let mut best: Option<Route> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let route = construct(scenario, |n| {
            if n <= k {
                (0..n).collect()
            } else {
                sample(&mut rng, n, k).into_vec()
            }
        });
        if best.as_ref().is_none_or(|b| route.total_fitness < b.total_fitness) {
            best = Some(route);
        }
    }
    Ok(best.expect("at least one restart"))
}
