//! Experiment runner: route planning sweeps, oracle solving, training and
//! evaluation, each writing CSVs plus a manifest that can replay the run.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use manifest::{RunManifest, RunResults, MANIFEST_FILE, RESULTS_FILE};

#[derive(Debug, Parser)]
#[command(name = "swarmsplit", version, about = "Layer-partitioned DNN assignment for UAV swarms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Randomized versus pure greedy route cost over generated instances.
    Plan(PlanArgs),
    /// Exhaustive best assignment for each target's task.
    Oracle(OracleArgs),
    /// Train learners and write logs and actor checkpoints.
    Train(TrainArgs),
    /// AoI, completion rate and utility per method across task sizes.
    Evaluate(EvaluateArgs),
    /// Repeat a recorded run and compare its outputs byte for byte.
    Rerun(RerunArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Scenario file, `tiny`, or `random:TARGETS:UAVS` generated from
    /// `--seed`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Single seed; ignored when `--seeds` is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed list such as `0..10` or `1,5,9`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Output directory.
    #[arg(long, env = "SWARMSPLIT_OUT", default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: Common,
    /// Target counts of the instances generated per seed when no scenario
    /// is given.
    #[arg(long, default_value = "10,20,30,40,50")]
    pub targets: String,
    /// Fleet size of generated instances, leader included.
    #[arg(long, default_value_t = 4)]
    pub uavs: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Only this target's task.
    #[arg(long)]
    pub target: Option<u32>,
    /// Largest enumeration allowed.
    #[arg(long, default_value_t = swarmsplit::assignment::DEFAULT_ORACLE_LIMIT)]
    pub limit: u128,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// `gdm-maddpg`, `maddpg` or `maddpg+plan`.
    #[arg(long, default_value = "gdm-maddpg")]
    pub algo: String,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Starting hyperparameters: `full` or `desk`.
    #[arg(long, default_value = "full")]
    pub preset: String,
    /// `KEY=VALUE` hyperparameter overrides, applied in order.
    #[arg(long = "config")]
    pub config: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory holding actor checkpoints written by `train`.
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    /// Task sizes in gigabytes.
    #[arg(long, default_value = "10,20,40,60,80")]
    pub sizes: String,
    /// Evaluation episodes per seed and size.
    #[arg(long, default_value_t = 20)]
    pub episodes: usize,
    /// Skip the exhaustive reference method.
    #[arg(long)]
    pub no_oracle: bool,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// Manifest of the run to repeat.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the repeat; defaults to `rerun/` beside the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Errors raised by the runner itself.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Missing(String),
}

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_GUARD: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    use swarmsplit::assignment::AssignmentError;
    use swarmsplit::diffusion::DiffusionError;
    use swarmsplit::marl::MarlError;
    use swarmsplit::pathplan::PlanError;
    use swarmsplit::scenario::ScenarioError;

    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Invalid(_) => EXIT_VALIDATION,
                CliError::Missing(_) => EXIT_IO,
            };
        }
        if let Some(e) = cause.downcast_ref::<ScenarioError>() {
            return match e {
                ScenarioError::Io { .. } => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if let Some(e) = cause.downcast_ref::<AssignmentError>() {
            if matches!(e, AssignmentError::SearchTooLarge { .. }) {
                return EXIT_GUARD;
            }
        }
        if let Some(e) = cause.downcast_ref::<MarlError>() {
            match e {
                MarlError::Config(_) => return EXIT_VALIDATION,
                MarlError::Assignment(AssignmentError::SearchTooLarge { .. }) => return EXIT_GUARD,
                _ => {}
            }
        }
        if let Some(e) = cause.downcast_ref::<PlanError>() {
            if !matches!(e, PlanError::Csv(_)) {
                return EXIT_VALIDATION;
            }
        }
        if let Some(e) = cause.downcast_ref::<DiffusionError>() {
            match e {
                DiffusionError::Io(_) => return EXIT_IO,
                DiffusionError::Checkpoint(_) => return EXIT_VALIDATION,
                _ => {}
            }
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_OTHER
}

/// The invocation's arguments minus the output directory.
fn recorded_argv(args: &[String]) -> Vec<String> {
    let mut kept = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            kept.push(a.clone());
        }
    }
    kept
}

fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    match cli.command {
        Command::Plan(a) => commands::plan(&a, argv).map(|_| ()),
        Command::Oracle(a) => commands::oracle(&a, argv).map(|_| ()),
        Command::Train(a) => commands::train(&a, argv).map(|_| ()),
        Command::Evaluate(a) => commands::evaluate(&a, argv).map(|_| ()),
        Command::Rerun(a) => rerun(&a),
    }
}

/// Runs a recorded command into a new directory and compares every output.
fn rerun(args: &RerunArgs) -> Result<()> {
    let manifest = RunManifest::read(&args.manifest)?;
    let run_dir = args.manifest.parent().map(PathBuf::from).unwrap_or_default();
    let results_path = run_dir.join(RESULTS_FILE);
    let text = std::fs::read_to_string(&results_path).with_context(|| format!("reading {}", results_path.display()))?;
    let original: RunResults = serde_json::from_str(&text)?;
    let out = args.out.clone().unwrap_or_else(|| run_dir.join("rerun"));
    if out.join(MANIFEST_FILE) == args.manifest {
        bail!(CliError::Invalid("rerun output must differ from the original run".into()));
    }
    let mut full = vec!["swarmsplit".to_string()];
    full.extend(manifest.argv.iter().cloned());
    full.push("--out".into());
    full.push(out.display().to_string());
    let cli = Cli::try_parse_from(&full).map_err(|e| CliError::Invalid(e.to_string()))?;
    let repeat = match cli.command {
        Command::Plan(a) => commands::plan(&a, manifest.argv.clone())?,
        Command::Oracle(a) => commands::oracle(&a, manifest.argv.clone())?,
        Command::Train(a) => commands::train(&a, manifest.argv.clone())?,
        Command::Evaluate(a) => commands::evaluate(&a, manifest.argv.clone())?,
        Command::Rerun(_) => bail!(CliError::Invalid("a rerun manifest cannot record a rerun".into())),
    };
    let mut mismatched = Vec::new();
    for (name, hash) in &original.files {
        if repeat.files.get(name) != Some(hash) {
            mismatched.push(name.clone());
        }
    }
    for name in repeat.files.keys() {
        if !original.files.contains_key(name) {
            mismatched.push(name.clone());
        }
    }
    if mismatched.is_empty() {
        println!("identical: {} files", original.files.len());
        Ok(())
    } else {
        bail!("outputs differ: {}", mismatched.join(", "))
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let argv = recorded_argv(&args[1..]);
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
