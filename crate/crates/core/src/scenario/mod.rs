//! Domain types shared by every other module, plus scenario file ingestion
//! and seeded instance generation.
//!
//! All quantities are SI internally (bits, cycles, bytes, joules, seconds,
//! meters). The two exceptions are task sizes, which stay in gigabytes because
//! the route planner's processing-rate model is expressed in GB/min, and the
//! processing rate itself.

mod generate;
pub mod profiles;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{demo6_model, generate_random_scenario, tiny_scenario, ARENA_SIDE_M, UAV_ALTITUDE_M};

/// Speed of light used by the free-space reference loss.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Bytes per gigabyte (decimal).
pub const BYTES_PER_GB: f64 = 1.0e9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid scenario: {field}: {message}")]
    Validation { field: String, message: String },
    #[error("layer profile {path}: {message}")]
    Profile { path: PathBuf, message: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position3 { x, y, z }
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn offset(&self, by: &Position3) -> Position3 {
        Position3::new(self.x + by.x, self.y + by.y, self.z + by.z)
    }

    fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.z >= 0.0
    }
}

/// A target area whose data must be collected and run through a DNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetArea {
    pub id: u32,
    pub center: Position3,
    /// Data volume in gigabytes.
    pub task_size_gb: f64,
    /// DNN model kind used for this area's task.
    pub dnn_type: u32,
    /// Deadline of the task created on arrival, seconds.
    pub max_latency_s: f64,
}

/// One layer of a DNN as seen by the partitioner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerProfile {
    pub layer_index: usize,
    pub compute_cycles: f64,
    pub memory_bytes: f64,
    pub output_bits: f64,
}

impl LayerProfile {
    /// The same layer with compute, memory and output volume multiplied by
    /// `scale` (the task's data scale).
    pub fn scaled(&self, scale: f64) -> LayerProfile {
        LayerProfile {
            layer_index: self.layer_index,
            compute_cycles: self.compute_cycles * scale,
            memory_bytes: self.memory_bytes * scale,
            output_bits: self.output_bits * scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnModelProfile {
    pub kind: u32,
    #[serde(default)]
    pub name: String,
    /// Path to a layer-profile CSV, resolved relative to the scenario file.
    /// Cleared once the layers are loaded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default)]
    pub layers: Vec<LayerProfile>,
}

impl DnnModelProfile {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn total_compute(&self) -> f64 {
        self.layers.iter().map(|l| l.compute_cycles).sum()
    }

    pub fn total_memory(&self) -> f64 {
        self.layers.iter().map(|l| l.memory_bytes).sum()
    }
}

/// A concrete DNN task created when the swarm inspects a target.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: u32,
    pub kind: u32,
    pub origin_target: u32,
    pub created_at: f64,
    pub max_latency: f64,
    /// Multiplier applied to the model's per-layer profile.
    pub data_scale: f64,
    /// Per-layer profile after scaling.
    pub layers: Vec<LayerProfile>,
}

impl TaskSpec {
    pub fn from_target(
        id: u32,
        target: &TargetArea,
        model: &DnnModelProfile,
        workload: &Workload,
        created_at: f64,
    ) -> TaskSpec {
        let data_scale = target.task_size_gb / workload.reference_task_gb;
        TaskSpec {
            id,
            kind: model.kind,
            origin_target: target.id,
            created_at,
            max_latency: target.max_latency_s,
            data_scale,
            layers: model.layers.iter().map(|l| l.scaled(data_scale)).collect(),
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Leader,
    Follower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    pub id: u32,
    pub role: Role,
    /// Formation position at the start of the mission. The swarm keeps this
    /// formation while flying, so inter-UAV distances are constant.
    pub position: Position3,
    /// cycles/s
    pub compute_rate: f64,
    /// bytes
    pub memory_cap: f64,
    /// joules
    pub energy_cap: f64,
    /// watts
    pub tx_power: f64,
    /// Hz
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConstants {
    pub frequency: f64,
    pub pathloss_exponent: f64,
    /// Standard deviation of log-normal shadowing, dB. Zero makes links
    /// deterministic.
    pub shadow_sigma: f64,
    pub interference_power: f64,
    pub noise_power: f64,
}

impl Default for RadioConstants {
    fn default() -> Self {
        RadioConstants {
            frequency: 2.4e9,
            pathloss_exponent: 2.0,
            shadow_sigma: 0.0,
            interference_power: 0.0,
            // -115 dBm
            noise_power: 10f64.powf(-115.0 / 10.0) * 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightConstants {
    pub speed: f64,
    pub p_blade: f64,
    pub p_induced: f64,
    pub tip_speed: f64,
    pub hover_induced_speed: f64,
    pub drag_ratio: f64,
    pub air_density: f64,
    pub rotor_solidity: f64,
    pub disk_area: f64,
}

impl Default for FlightConstants {
    fn default() -> Self {
        FlightConstants {
            speed: 20.0,
            p_blade: 80.0,
            p_induced: 88.0,
            tip_speed: 120.0,
            hover_induced_speed: 4.03,
            drag_ratio: 0.6,
            air_density: 1.225,
            rotor_solidity: 0.05,
            disk_area: 0.503,
        }
    }
}

/// Objective, reward and route-fitness weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub theta: f64,
    pub sigma: f64,
    /// Blend between individual and group reward.
    pub vartheta_reward: f64,
    /// Route fitness weight on distance.
    pub vartheta_dist: f64,
    /// Route fitness weight on flight/processing slack.
    pub rho_task: f64,
    /// Switched-capacitance energy coefficient, J·s²/cycle³.
    pub k0: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            delta: 1.0 / 3.0,
            epsilon: 1.0 / 3.0,
            theta: 1.0 / 3.0,
            sigma: 1.0,
            vartheta_reward: 0.5,
            vartheta_dist: 0.5,
            rho_task: 0.5,
            k0: 1e-28,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    /// Average rate at which the swarm digests collected data, GB/min.
    pub processing_rate_gb_per_min: f64,
    /// Task size that runs the model profile exactly once, GB.
    pub reference_task_gb: f64,
}

impl Default for Workload {
    fn default() -> Self {
        Workload {
            processing_rate_gb_per_min: 10.0,
            reference_task_gb: 80.0,
        }
    }
}

/// Knobs of the decision environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    /// Largest block of layers an agent can claim per round.
    pub block_max: usize,
    /// Decision rounds per route leg.
    pub rounds_per_leg: usize,
    /// Concurrent task slots in the observation/action space.
    pub task_slots: usize,
    /// Clock advance of a round in which nobody executes, seconds.
    pub idle_slot_s: f64,
    /// Subtracted from an agent's reward when its intent was dropped.
    pub invalid_action_penalty: f64,
    /// Whether the leader is also a pipeline stage (and an agent).
    pub leader_executes: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            block_max: 4,
            rounds_per_leg: 8,
            task_slots: 2,
            idle_slot_s: 0.01,
            invalid_action_penalty: 0.01,
            leader_executes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    /// Start and return coordinate of the route.
    pub base: Position3,
    pub radio: RadioConstants,
    pub flight: FlightConstants,
    pub weights: Weights,
    #[serde(default)]
    pub workload: Workload,
    #[serde(default)]
    pub sim: SimSettings,
    pub targets: Vec<TargetArea>,
    pub fleet: Vec<UavSpec>,
    pub models: Vec<DnnModelProfile>,
}

impl Scenario {
    pub fn model(&self, kind: u32) -> Option<&DnnModelProfile> {
        self.models.iter().find(|m| m.kind == kind)
    }

    pub fn target(&self, id: u32) -> Option<&TargetArea> {
        self.targets.iter().find(|t| t.id == id)
    }

    /// Index (into `fleet`) of the leader.
    pub fn leader_index(&self) -> usize {
        self.fleet
            .iter()
            .position(|u| u.role == Role::Leader)
            .expect("validated scenario has a leader")
    }

    pub fn follower_indices(&self) -> Vec<usize> {
        self.fleet
            .iter()
            .enumerate()
            .filter(|(_, u)| u.role == Role::Follower)
            .map(|(i, _)| i)
            .collect()
    }

    /// Fleet indices that may run pipeline stages, in fleet order.
    pub fn executor_pool(&self) -> Vec<usize> {
        self.fleet
            .iter()
            .enumerate()
            .filter(|(_, u)| u.role == Role::Follower || self.sim.leader_executes)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn num_kinds(&self) -> usize {
        self.models.len()
    }

    /// Builds the task created when the swarm reaches `target_id`.
    pub fn task_for_target(&self, task_id: u32, target_id: u32, created_at: f64) -> Option<TaskSpec> {
        let target = self.target(target_id)?;
        let model = self.model(target.dnn_type)?;
        Some(TaskSpec::from_target(task_id, target, model, &self.workload, created_at))
    }

    /// Checks every type invariant; the error names the offending field.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.targets.is_empty() {
            return Err(ScenarioError::invalid("targets", "targets non-empty"));
        }
        if !self.base.is_valid() {
            return Err(ScenarioError::invalid("base", "coordinates must be finite with z >= 0"));
        }
        let mut ids = BTreeSet::new();
        for t in &self.targets {
            if !ids.insert(t.id) {
                return Err(ScenarioError::invalid(
                    format!("targets[{}].id", t.id),
                    "target ids must be unique",
                ));
            }
            if !t.center.is_valid() {
                return Err(ScenarioError::invalid(
                    format!("targets[{}].center", t.id),
                    "coordinates must be finite with z >= 0",
                ));
            }
            if !(t.task_size_gb.is_finite() && t.task_size_gb >= 0.0) {
                return Err(ScenarioError::invalid(
                    format!("targets[{}].task_size_gb", t.id),
                    "task size must be finite and non-negative",
                ));
            }
            if !(t.max_latency_s > 0.0) {
                return Err(ScenarioError::invalid(
                    format!("targets[{}].max_latency_s", t.id),
                    "max latency must be > 0",
                ));
            }
            if self.model(t.dnn_type).is_none() {
                return Err(ScenarioError::invalid(
                    format!("targets[{}].dnn_type", t.id),
                    format!("dnn_type {} is not among the models", t.dnn_type),
                ));
            }
        }

        let leaders = self.fleet.iter().filter(|u| u.role == Role::Leader).count();
        if leaders != 1 {
            return Err(ScenarioError::invalid(
                "fleet",
                format!("exactly one leader required, found {leaders}"),
            ));
        }
        if self.fleet.len() < 2 {
            return Err(ScenarioError::invalid("fleet", "at least one follower required"));
        }
        let mut uav_ids = BTreeSet::new();
        for u in &self.fleet {
            let field = |name: &str| format!("fleet[{}].{}", u.id, name);
            if !uav_ids.insert(u.id) {
                return Err(ScenarioError::invalid(field("id"), "uav ids must be unique"));
            }
            if !u.position.is_valid() {
                return Err(ScenarioError::invalid(
                    field("position"),
                    "coordinates must be finite with z >= 0",
                ));
            }
            for (name, value) in [
                ("compute_rate", u.compute_rate),
                ("memory_cap", u.memory_cap),
                ("energy_cap", u.energy_cap),
                ("tx_power", u.tx_power),
                ("bandwidth", u.bandwidth),
            ] {
                if !(value.is_finite() && value > 0.0) {
                    return Err(ScenarioError::invalid(field(name), "must be finite and > 0"));
                }
            }
        }

        let mut kinds = BTreeSet::new();
        for m in &self.models {
            if !kinds.insert(m.kind) {
                return Err(ScenarioError::invalid(
                    format!("models[{}].kind", m.kind),
                    "model kinds must be unique",
                ));
            }
            validate_layers(&m.layers).map_err(|msg| {
                ScenarioError::invalid(format!("models[{}].layers", m.kind), msg)
            })?;
        }

        if !(self.radio.frequency > 0.0) {
            return Err(ScenarioError::invalid("radio.frequency", "must be > 0"));
        }
        if !(self.radio.noise_power > 0.0) {
            return Err(ScenarioError::invalid("radio.noise_power", "must be > 0"));
        }
        if self.radio.interference_power < 0.0 || self.radio.shadow_sigma < 0.0 {
            return Err(ScenarioError::invalid(
                "radio",
                "interference_power and shadow_sigma must be >= 0",
            ));
        }

        let f = &self.flight;
        for (name, value) in [
            ("speed", f.speed),
            ("p_blade", f.p_blade),
            ("p_induced", f.p_induced),
            ("tip_speed", f.tip_speed),
            ("hover_induced_speed", f.hover_induced_speed),
            ("drag_ratio", f.drag_ratio),
            ("air_density", f.air_density),
            ("rotor_solidity", f.rotor_solidity),
            ("disk_area", f.disk_area),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ScenarioError::invalid(format!("flight.{name}"), "must be finite and > 0"));
            }
        }

        let w = &self.weights;
        if ((w.vartheta_dist + w.rho_task) - 1.0).abs() > 1e-9 {
            return Err(ScenarioError::invalid(
                "weights.vartheta_dist",
                "vartheta_dist + rho_task must equal 1",
            ));
        }
        if w.vartheta_dist < 0.0 || w.rho_task < 0.0 {
            return Err(ScenarioError::invalid("weights.rho_task", "route weights must be >= 0"));
        }
        if !(0.0..=1.0).contains(&w.vartheta_reward) {
            return Err(ScenarioError::invalid("weights.vartheta_reward", "must lie in [0, 1]"));
        }
        if !(w.k0 >= 0.0) {
            return Err(ScenarioError::invalid("weights.k0", "must be >= 0"));
        }

        if !(self.workload.processing_rate_gb_per_min > 0.0) {
            return Err(ScenarioError::invalid("workload.processing_rate_gb_per_min", "must be > 0"));
        }
        if !(self.workload.reference_task_gb > 0.0) {
            return Err(ScenarioError::invalid("workload.reference_task_gb", "must be > 0"));
        }
        let s = &self.sim;
        if s.block_max == 0 || s.rounds_per_leg == 0 || s.task_slots == 0 {
            return Err(ScenarioError::invalid(
                "sim",
                "block_max, rounds_per_leg and task_slots must be >= 1",
            ));
        }
        if !(s.idle_slot_s > 0.0) {
            return Err(ScenarioError::invalid("sim.idle_slot_s", "must be > 0"));
        }
        Ok(())
    }

    /// Canonical text form. `load(save(s))` returns `s`.
    pub fn to_canonical_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        fs::write(path, self.to_canonical_string()).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Parses scenario text; `csv` references are resolved against `base_dir`.
    pub fn from_str_in(text: &str, origin: &Path, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        let mut scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        for model in &mut scenario.models {
            if let Some(rel) = model.csv.take() {
                if !model.layers.is_empty() {
                    return Err(ScenarioError::invalid(
                        format!("models[{}]", model.kind),
                        "give either csv or inline layers, not both",
                    ));
                }
                let loaded = load_layer_profiles(&base_dir.join(rel))?;
                model.layers = loaded.layers;
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    Scenario::from_str_in(&text, path, base_dir)
}

fn validate_layers(layers: &[LayerProfile]) -> Result<(), String> {
    if layers.is_empty() {
        return Err("model must have at least one layer".into());
    }
    for (i, l) in layers.iter().enumerate() {
        if l.layer_index != i + 1 {
            return Err(format!(
                "layer indices must be contiguous from 1; row {} has index {}",
                i + 1,
                l.layer_index
            ));
        }
        if !(l.compute_cycles.is_finite() && l.compute_cycles > 0.0) {
            return Err(format!("layer {}: compute must be > 0", l.layer_index));
        }
        if !(l.memory_bytes.is_finite() && l.memory_bytes > 0.0) {
            return Err(format!("layer {}: memory must be > 0", l.layer_index));
        }
        if !(l.output_bits.is_finite() && l.output_bits >= 0.0) {
            return Err(format!("layer {}: output size must be >= 0", l.layer_index));
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct LayerRow {
    layer_index: usize,
    compute_cycles: f64,
    memory_bytes: f64,
    output_bits: f64,
}

/// Reads a `layer_index,compute_cycles,memory_bytes,output_bits` CSV.
///
/// Rows may come in any order; the result is sorted by `layer_index`.
pub fn load_layer_profiles(path: &Path) -> Result<DnnModelProfile, ScenarioError> {
    let err = |message: String| ScenarioError::Profile {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    for column in ["layer_index", "compute_cycles", "memory_bytes", "output_bits"] {
        if !headers.iter().any(|h| h.trim() == column) {
            return Err(err(format!("missing column `{column}`")));
        }
    }
    let mut layers = Vec::new();
    for (row, record) in reader.deserialize::<LayerRow>().enumerate() {
        let r = record.map_err(|e| err(format!("row {}: {e}", row + 1)))?;
        if !(r.compute_cycles > 0.0) {
            return Err(err(format!("row {}: compute_cycles must be > 0", row + 1)));
        }
        if !(r.memory_bytes > 0.0) {
            return Err(err(format!("row {}: memory_bytes must be > 0", row + 1)));
        }
        layers.push(LayerProfile {
            layer_index: r.layer_index,
            compute_cycles: r.compute_cycles,
            memory_bytes: r.memory_bytes,
            output_bits: r.output_bits,
        });
    }
    layers.sort_by_key(|l| l.layer_index);
    validate_layers(&layers).map_err(err)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(DnnModelProfile {
        kind: 0,
        name,
        csv: None,
        layers,
    })
}

/// Writes a profile in the layer CSV schema.
pub fn save_layer_profiles(path: &Path, profile: &DnnModelProfile) -> Result<(), ScenarioError> {
    let err = |message: String| ScenarioError::Profile {
        path: path.to_path_buf(),
        message,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    w.write_record(["layer_index", "compute_cycles", "memory_bytes", "output_bits"])
        .map_err(|e| err(e.to_string()))?;
    for l in &profile.layers {
        w.write_record([
            l.layer_index.to_string(),
            l.compute_cycles.to_string(),
            l.memory_bytes.to_string(),
            l.output_bits.to_string(),
        ])
        .map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const MINIMAL: &str = r#"
seed = 3

[base]
x = 0.0
y = 0.0
z = 0.0

[radio]
frequency = 2.4e9
pathloss_exponent = 2.0
shadow_sigma = 0.0
interference_power = 0.0
noise_power = 3.1622776601683794e-15

[flight]
speed = 20.0
p_blade = 80.0
p_induced = 88.0
tip_speed = 120.0
hover_induced_speed = 4.03
drag_ratio = 0.6
air_density = 1.225
rotor_solidity = 0.05
disk_area = 0.503

[weights]
alpha = 1.0
beta = 1.0
gamma = 1.0
delta = 0.3333
epsilon = 0.3333
theta = 0.3333
sigma = 1.0
vartheta_reward = 0.5
vartheta_dist = 0.5
rho_task = 0.5
k0 = 1e-28

[[targets]]
id = 1
center = { x = 1000.0, y = 0.0, z = 0.0 }
task_size_gb = 30.0
dnn_type = 1
max_latency_s = 0.2

[[fleet]]
id = 0
role = "leader"
position = { x = 0.0, y = 0.0, z = 3000.0 }
compute_rate = 15e9
memory_cap = 1e11
energy_cap = 1e6
tx_power = 0.1
bandwidth = 1e6

[[fleet]]
id = 1
role = "follower"
position = { x = 100.0, y = 0.0, z = 3000.0 }
compute_rate = 15e9
memory_cap = 1e11
energy_cap = 1e6
tx_power = 0.1
bandwidth = 1e6

[[models]]
kind = 1
name = "toy"
layers = [
  { layer_index = 1, compute_cycles = 1e9, memory_bytes = 1e6, output_bits = 8e6 },
  { layer_index = 2, compute_cycles = 2e9, memory_bytes = 1e6, output_bits = 1e6 },
]
"#;

    fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        Scenario::from_str_in(text, Path::new("inline.toml"), Path::new("."))
    }

    #[test]
    fn minimal_file_loads() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.targets.len(), 1);
        assert_eq!(s.fleet.len(), 2);
        assert_eq!(s.sim, SimSettings::default());
    }

    #[test]
    fn zero_targets_rejected() {
        let text = MINIMAL.replace(
            "[[targets]]\nid = 1\ncenter = { x = 1000.0, y = 0.0, z = 0.0 }\ntask_size_gb = 30.0\ndnn_type = 1\nmax_latency_s = 0.2\n",
            "",
        );
        assert!(!text.contains("[[targets]]"));
        // An empty array must still be present for the field to parse.
        let text = text.replace("seed = 3", "seed = 3\ntargets = []");
        match parse(&text) {
            Err(ScenarioError::Validation { message, .. }) => assert_eq!(message, "targets non-empty"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn two_leaders_rejected() {
        let text = MINIMAL.replace("role = \"follower\"", "role = \"leader\"");
        match parse(&text) {
            Err(ScenarioError::Validation { field, message }) => {
                assert_eq!(field, "fleet");
                assert!(message.contains("exactly one leader"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace("seed = 3", "seed = 3\ncolour = \"red\"");
        assert!(matches!(parse(&text), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn malformed_file_is_parse_error() {
        assert!(matches!(parse("seed = = 3"), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn canonical_round_trip() {
        let s = parse(MINIMAL).unwrap();
        let text = s.to_canonical_string();
        let again = parse(&text).unwrap();
        assert_eq!(s, again);
        assert_eq!(text, again.to_canonical_string());
    }

    #[test]
    fn csv_profile_loads_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("five.csv");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "layer_index,compute_cycles,memory_bytes,output_bits").unwrap();
        for i in [3, 1, 2, 5, 4] {
            writeln!(f, "{i},{}e8,1e6,1e5", i).unwrap();
        }
        drop(f);
        let p = load_layer_profiles(&path).unwrap();
        assert_eq!(p.num_layers(), 5);
        assert_eq!(p.layers[0].compute_cycles, 1e8);
        assert_eq!(p.layers[4].layer_index, 5);
    }

    #[test]
    fn csv_profile_zero_compute_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(
            &path,
            "layer_index,compute_cycles,memory_bytes,output_bits\n1,1e9,1,1\n2,0,1,1\n",
        )
        .unwrap();
        let err = load_layer_profiles(&path).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn csv_profile_missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "layer_index,compute_cycles,memory_bytes\n1,1e9,1\n").unwrap();
        let err = load_layer_profiles(&path).unwrap_err().to_string();
        assert!(err.contains("output_bits"), "{err}");
    }

    #[test]
    fn scenario_csv_reference_is_resolved() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("toy.csv"),
            "layer_index,compute_cycles,memory_bytes,output_bits\n1,1e9,1e6,8e6\n",
        )
        .unwrap();
        let text = MINIMAL.replace(
            "layers = [\n  { layer_index = 1, compute_cycles = 1e9, memory_bytes = 1e6, output_bits = 8e6 },\n  { layer_index = 2, compute_cycles = 2e9, memory_bytes = 1e6, output_bits = 1e6 },\n]",
            "csv = \"toy.csv\"",
        );
        let path = dir.path().join("s.toml");
        fs::write(&path, text).unwrap();
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.models[0].layers.len(), 1);
        assert!(s.models[0].csv.is_none());
    }
}
