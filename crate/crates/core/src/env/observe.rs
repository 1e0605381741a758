use crate::scenario::{Position3, Scenario};

use super::SwarmEnv;

/// Fixed-length observation vector, every entry clamped to `[0, 1]`.
///
/// Layout, in order:
/// 1. per task slot: `active`, `size / max size`, model-kind one-hot (K),
///    `layers done / L`, `deadline / max deadline`, `elapsed / deadline`,
///    holder one-hot over the fleet (N);
/// 2. per UAV: remaining energy fraction, free memory fraction, x, y, z;
/// 3. current stop x, y, z;
/// 4. fraction of the route already left behind;
/// 5. one-hot of the observing agent (M).
///
/// Coordinates are scaled to the bounding box of base, targets and the
/// formation around them.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLayout {
    slots: usize,
    kinds: Vec<u32>,
    fleet: usize,
    agents: usize,
    max_task_gb: f64,
    max_latency: f64,
    lo: Position3,
    span: Position3,
}

impl ObservationLayout {
    pub fn new(scenario: &Scenario, agents: usize) -> ObservationLayout {
        let leader = scenario.fleet[scenario.leader_index()].position;
        let mut lo = scenario.base;
        let mut hi = scenario.base;
        let mut grow = |p: Position3| {
            lo = Position3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Position3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        };
        let stops: Vec<Position3> = std::iter::once(scenario.base)
            .chain(scenario.targets.iter().map(|t| t.center))
            .collect();
        for stop in &stops {
            grow(*stop);
            for u in &scenario.fleet {
                grow(formation_position(u.position, leader, *stop));
            }
        }
        let span = Position3::new(
            (hi.x - lo.x).max(1.0),
            (hi.y - lo.y).max(1.0),
            (hi.z - lo.z).max(1.0),
        );
        ObservationLayout {
            slots: scenario.sim.task_slots,
            kinds: scenario.models.iter().map(|m| m.kind).collect(),
            fleet: scenario.fleet.len(),
            agents,
            max_task_gb: scenario.targets.iter().map(|t| t.task_size_gb).fold(0.0, f64::max).max(1e-9),
            max_latency: scenario.targets.iter().map(|t| t.max_latency_s).fold(0.0, f64::max),
            lo,
            span,
        }
    }

    pub fn slot_width(&self) -> usize {
        5 + self.kinds.len() + self.fleet
    }

    pub fn dim(&self) -> usize {
        self.slots * self.slot_width() + 5 * self.fleet + 3 + 1 + self.agents
    }

    fn scaled(&self, p: Position3) -> [f64; 3] {
        [
            (p.x - self.lo.x) / self.span.x,
            (p.y - self.lo.y) / self.span.y,
            (p.z - self.lo.z) / self.span.z,
        ]
    }

    pub fn observe(&self, env: &SwarmEnv, agent: usize) -> Vec<f64> {
        let scenario = env.scenario();
        let mut v = Vec::with_capacity(self.dim());
        for slot in 0..self.slots {
            let start = v.len();
            v.resize(start + self.slot_width(), 0.0);
            let Some(task) = env.task(slot) else { continue };
            let spec = task.spec;
            let size = spec.data_scale * scenario.workload.reference_task_gb;
            let cell = &mut v[start..];
            cell[0] = 1.0;
            cell[1] = size / self.max_task_gb;
            if let Some(k) = self.kinds.iter().position(|&k| k == spec.kind) {
                cell[2 + k] = 1.0;
            }
            let base = 2 + self.kinds.len();
            cell[base] = task.frontier as f64 / spec.num_layers() as f64;
            cell[base + 1] = spec.max_latency / self.max_latency;
            cell[base + 2] = (env.clock() - spec.created_at) / spec.max_latency;
            if let Some(h) = task.holder {
                cell[base + 3 + h] = 1.0;
            }
        }
        let remaining = env.remaining_energy();
        let leader = scenario.fleet[scenario.leader_index()].position;
        let here = env.location();
        for (i, u) in scenario.fleet.iter().enumerate() {
            v.push(remaining[i] / u.energy_cap);
            v.push(1.0 - env.memory_used()[i] / u.memory_cap);
            v.extend(self.scaled(formation_position(u.position, leader, here)));
        }
        v.extend(self.scaled(here));
        let legs = env.route().len().max(1) as f64;
        let visited = env.route().iter().position(|&id| Some(id) == env.current_target()).unwrap_or(env.route().len());
        v.push(visited as f64 / legs);
        let start = v.len();
        v.resize(start + self.agents, 0.0);
        v[start + agent] = 1.0;
        for x in &mut v {
            *x = x.clamp(0.0, 1.0);
        }
        debug_assert_eq!(v.len(), self.dim());
        v
    }
}

/// Position of a UAV when the leader hovers over `stop`, keeping its
/// formation offset and cruise altitude.
fn formation_position(uav: Position3, leader: Position3, stop: Position3) -> Position3 {
    Position3::new(stop.x + uav.x - leader.x, stop.y + uav.y - leader.y, uav.z)
}
