use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::profiles::bundled_models;
use super::{
    DnnModelProfile, FlightConstants, LayerProfile, Position3, RadioConstants, Role, Scenario, ScenarioError,
    SimSettings, TargetArea, UavSpec, Weights, Workload, BYTES_PER_GB,
};

/// Side of the square inspection area, meters.
pub const ARENA_SIDE_M: f64 = 12_000.0;
/// Cruise altitude of the swarm, meters.
pub const UAV_ALTITUDE_M: f64 = 3_000.0;

const MAX_TASK_GB: f64 = 80.0;
const LATENCY_RANGE_S: (f64, f64) = (0.010, 0.200);
const MEMORY_RANGE_GB: (f64, f64) = (100.0, 500.0);
const TX_POWER_RANGE_W: (f64, f64) = (0.050, 0.100);
const BANDWIDTH_RANGE_HZ: (f64, f64) = (1.0e6, 5.0e6);
const COMPUTE_RATE: f64 = 15.0e9;
const ENERGY_CAP_J: f64 = 2.5e6;

/// Random instance inside the 12x12 km arena: targets on the ground, the
/// swarm at 3 km, base at the arena center.
pub fn generate_random_scenario(num_targets: usize, num_uavs: usize, seed: u64) -> Result<Scenario, ScenarioError> {
    if num_targets < 1 {
        return Err(ScenarioError::Validation {
            field: "num_targets".into(),
            message: "at least one target required".into(),
        });
    }
    if num_uavs < 2 {
        return Err(ScenarioError::Validation {
            field: "num_uavs".into(),
            message: "a leader and at least one follower required".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models = bundled_models();

    let targets = (0..num_targets)
        .map(|i| TargetArea {
            id: i as u32 + 1,
            center: Position3::new(
                rng.random_range(0.0..ARENA_SIDE_M),
                rng.random_range(0.0..ARENA_SIDE_M),
                0.0,
            ),
            task_size_gb: rng.random_range(0.0..=MAX_TASK_GB),
            dnn_type: models[rng.random_range(0..models.len())].kind,
            max_latency_s: rng.random_range(LATENCY_RANGE_S.0..=LATENCY_RANGE_S.1),
        })
        .collect();

    let fleet = (0..num_uavs)
        .map(|i| UavSpec {
            id: i as u32,
            role: if i == 0 { Role::Leader } else { Role::Follower },
            position: Position3::new(
                rng.random_range(0.0..ARENA_SIDE_M),
                rng.random_range(0.0..ARENA_SIDE_M),
                UAV_ALTITUDE_M,
            ),
            compute_rate: COMPUTE_RATE,
            memory_cap: rng.random_range(MEMORY_RANGE_GB.0..=MEMORY_RANGE_GB.1) * BYTES_PER_GB,
            energy_cap: ENERGY_CAP_J,
            tx_power: rng.random_range(TX_POWER_RANGE_W.0..=TX_POWER_RANGE_W.1),
            bandwidth: rng.random_range(BANDWIDTH_RANGE_HZ.0..=BANDWIDTH_RANGE_HZ.1),
        })
        .collect();

    let scenario = Scenario {
        seed,
        base: Position3::new(ARENA_SIDE_M / 2.0, ARENA_SIDE_M / 2.0, 0.0),
        radio: RadioConstants::default(),
        flight: FlightConstants::default(),
        weights: Weights::default(),
        workload: Workload::default(),
        sim: SimSettings::default(),
        targets,
        fleet,
        models,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Six-layer demo model used by the tiny environment and its hand checks.
pub fn demo6_model() -> DnnModelProfile {
    // (compute cycles, memory bytes, output bits)
    let rows = [
        (6.0e8, 2.0e8, 4.0e8),
        (4.5e8, 2.0e8, 2.0e8),
        (3.0e8, 2.0e8, 1.0e8),
        (1.5e8, 2.0e8, 5.0e7),
        (7.5e7, 2.0e8, 2.0e7),
        (7.5e7, 2.0e8, 1.0e4),
    ];
    DnnModelProfile {
        kind: 1,
        name: "demo6".into(),
        csv: None,
        layers: rows
            .iter()
            .enumerate()
            .map(|(i, &(c, m, w))| LayerProfile {
                layer_index: i + 1,
                compute_cycles: c,
                memory_bytes: m,
                output_bits: w,
            })
            .collect(),
    }
}

/// The fixed tiny environment: one target, one six-layer task, a leader that
/// only produces data and three heterogeneous followers, deterministic radio.
pub fn tiny_scenario() -> Scenario {
    let follower = |id: u32, x: f64, rate: f64, memory: f64| UavSpec {
        id,
        role: Role::Follower,
        position: Position3::new(x, 0.0, UAV_ALTITUDE_M),
        compute_rate: rate,
        memory_cap: memory,
        energy_cap: 2.0e5,
        tx_power: 0.1,
        bandwidth: 5.0e6,
    };
    let scenario = Scenario {
        seed: 0,
        base: Position3::new(0.0, 0.0, 0.0),
        radio: RadioConstants::default(),
        flight: FlightConstants::default(),
        weights: Weights {
            k0: 1.0e-26,
            ..Weights::default()
        },
        workload: Workload::default(),
        sim: SimSettings {
            block_max: 4,
            rounds_per_leg: 8,
            task_slots: 1,
            idle_slot_s: 0.02,
            invalid_action_penalty: 0.01,
            leader_executes: false,
        },
        targets: vec![TargetArea {
            id: 1,
            center: Position3::new(2_000.0, 0.0, 0.0),
            task_size_gb: 80.0,
            dnn_type: 1,
            max_latency_s: 0.5,
        }],
        fleet: vec![
            UavSpec {
                id: 0,
                role: Role::Leader,
                position: Position3::new(0.0, 0.0, UAV_ALTITUDE_M),
                compute_rate: 15.0e9,
                memory_cap: 1.0e9,
                energy_cap: 2.0e5,
                tx_power: 0.1,
                bandwidth: 5.0e6,
            },
            follower(1, 300.0, 15.0e9, 8.0e8),
            follower(2, 600.0, 12.0e9, 1.2e9),
            follower(3, 900.0, 9.0e9, 1.2e9),
        ],
        models: vec![demo6_model()],
    };
    scenario.validate().expect("tiny scenario is valid");
    scenario
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scenario() {
        let a = generate_random_scenario(10, 9, 7).unwrap();
        let b = generate_random_scenario(10, 9, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_canonical_string(), b.to_canonical_string());
    }

    #[test]
    fn seed_changes_targets() {
        let a = generate_random_scenario(10, 9, 7).unwrap();
        let b = generate_random_scenario(10, 9, 8).unwrap();
        assert_ne!(a.targets[0].center, b.targets[0].center);
    }

    #[test]
    fn task_sizes_within_bounds() {
        let s = generate_random_scenario(50, 9, 1).unwrap();
        assert_eq!(s.targets.len(), 50);
        assert!(s.targets.iter().all(|t| (0.0..=80.0).contains(&t.task_size_gb)));
        assert!(s.targets.iter().all(|t| t.center.z == 0.0));
        assert!(s.fleet.iter().all(|u| u.position.z == UAV_ALTITUDE_M));
    }

    #[test]
    fn preconditions() {
        assert!(generate_random_scenario(0, 9, 1).is_err());
        assert!(generate_random_scenario(3, 1, 1).is_err());
    }

    #[test]
    fn tiny_is_valid() {
        let s = tiny_scenario();
        assert_eq!(s.follower_indices().len(), 3);
        assert_eq!(s.executor_pool(), vec![1, 2, 3]);
        assert_eq!(s.models[0].num_layers(), 6);
    }
}
