use std::io::Write;

use serde::Serialize;

use crate::assignment::{TaskOutcome, UtilityReport};
use crate::physics::EnergyBreakdown;

pub const TRACE_CSV_HEADER: &str = "t,agent,action,task,layers_done,aoi_s,e_comp_J,e_trans_J,e_fly_J,reward";

/// One agent's view of one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub agent: u32,
    pub action: usize,
    pub task: Option<u32>,
    pub layers_done: usize,
    pub aoi_s: f64,
    #[serde(rename = "e_comp_J")]
    pub e_comp: f64,
    #[serde(rename = "e_trans_J")]
    pub e_trans: f64,
    #[serde(rename = "e_fly_J")]
    pub e_fly: f64,
    pub reward: f64,
}

/// A resolved task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub task_id: u32,
    pub origin_target: u32,
    pub num_layers: usize,
    pub outcome: TaskOutcome,
    /// Merged stages as `(fleet index, first layer, end layer)`, 0-based
    /// half-open.
    pub stages: Vec<(usize, usize, usize)>,
    pub report: UtilityReport,
}

impl TaskRecord {
    /// 1-based split points recovered from the executed stages.
    pub fn split_points(&self) -> Vec<usize> {
        self.stages.iter().skip(1).map(|&(_, first, _)| first).collect()
    }

    pub fn executors(&self) -> Vec<usize> {
        self.stages.iter().map(|&(e, _, _)| e).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
    pub tasks: Vec<TaskRecord>,
    /// Cumulative per fleet index.
    pub energy: Vec<EnergyBreakdown>,
    pub route: Vec<u32>,
    pub hard_stop: bool,
}

impl EpisodeTrace {
    /// Mean utility over resolved tasks; zero if none resolved.
    pub fn mean_utility(&self) -> f64 {
        if self.tasks.is_empty() {
            return 0.0;
        }
        self.tasks.iter().map(|t| t.report.total).sum::<f64>() / self.tasks.len() as f64
    }

    pub fn completion_rate(&self) -> f64 {
        if self.tasks.is_empty() {
            return 0.0;
        }
        self.tasks.iter().filter(|t| t.report.completed).count() as f64 / self.tasks.len() as f64
    }

    pub fn mean_aoi(&self) -> f64 {
        if self.tasks.is_empty() {
            return 0.0;
        }
        self.tasks.iter().map(|t| t.outcome.aoi()).sum::<f64>() / self.tasks.len() as f64
    }

    pub fn total_reward(&self) -> f64 {
        self.rows.iter().map(|r| r.reward).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(TRACE_CSV_HEADER.split(','))?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
