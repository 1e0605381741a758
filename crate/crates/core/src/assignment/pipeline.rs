//! Timing and energy of a layer pipeline across executors.
//!
//! Stage `j` starts once stage `j-1`'s output has been received. Only
//! transfers between consecutive stages on different UAVs cost time and
//! energy, charged to the sender. Raw input is available to every UAV.

use crate::physics::{compute_energy, compute_time, transmit_time_energy, EnergyBreakdown, LatencyBreakdown, LinkTable, PhysicsError};
use crate::scenario::{LayerProfile, Scenario};

/// Cost of running `layers[first..last]` on `executor`, receiving the input
/// from `sender` if the previous stage ran elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCost {
    pub executor: usize,
    pub sender: Option<usize>,
    pub transmit_time: f64,
    pub transmit_energy: f64,
    pub compute_time: f64,
    pub compute_energy: f64,
    pub memory: f64,
}

impl StageCost {
    pub fn duration(&self) -> f64 {
        self.transmit_time + self.compute_time
    }
}

/// Cost of a block of layers `first..last` (0-based, half-open).
///
/// `holder` is the UAV holding the output of layer `first - 1`; it is
/// ignored when `first == 0`.
pub fn stage_cost(
    scenario: &Scenario,
    links: &LinkTable,
    layers: &[LayerProfile],
    first: usize,
    last: usize,
    holder: Option<usize>,
    executor: usize,
) -> Result<StageCost, PhysicsError> {
    debug_assert!(first < last && last <= layers.len());
    let uav = &scenario.fleet[executor];
    let slice = &layers[first..last];
    let sender = match holder {
        Some(h) if first > 0 && h != executor => Some(h),
        _ => None,
    };
    let (transmit_time, transmit_energy) = match sender {
        Some(s) => transmit_time_energy(
            layers[first - 1].output_bits,
            links.rate(s, executor),
            scenario.fleet[s].tx_power,
        )?,
        None => (0.0, 0.0),
    };
    Ok(StageCost {
        executor,
        sender,
        transmit_time,
        transmit_energy,
        compute_time: compute_time(slice, uav.compute_rate),
        compute_energy: compute_energy(slice, uav.compute_rate, scenario.weights.k0),
        memory: slice.iter().map(|l| l.memory_bytes).sum(),
    })
}

/// Realized execution of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub layers_completed: usize,
    pub latency: LatencyBreakdown,
    /// Task-attributable energy per fleet index; flight is always zero here.
    pub energy: Vec<EnergyBreakdown>,
    /// Memory each fleet index holds for this task.
    pub memory: Vec<f64>,
    pub finished_at: f64,
}

impl TaskOutcome {
    pub fn empty(fleet_size: usize, at: f64) -> TaskOutcome {
        TaskOutcome {
            layers_completed: 0,
            latency: LatencyBreakdown::default(),
            energy: vec![EnergyBreakdown::default(); fleet_size],
            memory: vec![0.0; fleet_size],
            finished_at: at,
        }
    }

    pub fn aoi(&self) -> f64 {
        self.latency.total()
    }

    /// Adds a stage that started `waiting` seconds after the previous one
    /// became ready.
    pub fn push_stage(&mut self, cost: &StageCost, layers: usize, waiting: f64) {
        self.layers_completed += layers;
        self.latency.waiting += waiting;
        self.latency.transmit += cost.transmit_time;
        self.latency.compute += cost.compute_time;
        if let Some(s) = cost.sender {
            self.energy[s].transmit += cost.transmit_energy;
        }
        self.energy[cost.executor].compute += cost.compute_energy;
        self.memory[cost.executor] += cost.memory;
        self.finished_at += waiting + cost.duration();
    }
}

/// Back-to-back execution of contiguous stages starting at `start`.
/// `bounds[j]` is the exclusive end layer of stage `j`.
pub fn simulate_stages(
    scenario: &Scenario,
    links: &LinkTable,
    layers: &[LayerProfile],
    executors: &[usize],
    bounds: &[usize],
    created_at: f64,
    start: f64,
) -> Result<TaskOutcome, PhysicsError> {
    let mut outcome = TaskOutcome::empty(scenario.fleet.len(), created_at);
    let mut first = 0;
    let mut holder = None;
    let mut waiting = (start - created_at).max(0.0);
    for (&executor, &last) in executors.iter().zip(bounds) {
        let cost = stage_cost(scenario, links, layers, first, last, holder, executor)?;
        outcome.push_stage(&cost, last - first, waiting);
        waiting = 0.0;
        holder = Some(executor);
        first = last;
    }
    Ok(outcome)
}
