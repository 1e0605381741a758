use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use swarmsplit::assignment::{solve_oracle, write_oracle_csv, FleetState, OracleRow, DEFAULT_ORACLE_LIMIT};
use swarmsplit::diffusion::{read_checkpoint, write_checkpoint, NoiseSchedule};
use swarmsplit::env::SwarmEnv;
use swarmsplit::marl::{
    evaluate_actors, greedy_assignment_baseline, oracle_baseline, oracle_reference, train as train_learner, Actor, ActorKind,
    Algorithm, EpisodeStats, MarlError, TrainConfig,
};
use swarmsplit::pathplan::{plan_route, plan_route_pure_greedy};
use swarmsplit::physics::LinkTable;
use swarmsplit::scenario::{generate_random_scenario, load_scenario, tiny_scenario, Scenario};

use crate::manifest::{OutputDir, RunManifest, RunResults};
use crate::{CliError, Common, EvaluateArgs, OracleArgs, PlanArgs, TrainArgs};

pub const PLAN_COSTS_CSV_HEADER: &str =
    "num_targets,seed,greedy_fitness,randomized_fitness,improvement,greedy_violations,randomized_violations";
pub const PLAN_SUMMARY_CSV_HEADER: &str = "num_targets,instances,median_improvement,improvement_of_medians";
pub const ORACLE_SUMMARY_CSV_HEADER: &str = "task_id,target_id,enumeration_size,feasible_found";
pub const METRICS_CSV_HEADER: &str = "method,task_size_gb,aoi_s,completion_rate,utility,episodes";

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| CliError::Invalid(format!("bad {what} {s:?}")).into()))
        .collect()
}

pub fn parse_seeds(common: &Common) -> Result<Vec<u64>> {
    let Some(text) = &common.seeds else {
        return Ok(vec![common.seed]);
    };
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| CliError::Invalid(format!("bad seed range {text:?}")))?,
            b.trim().parse().map_err(|_| CliError::Invalid(format!("bad seed range {text:?}")))?,
        );
        if a >= b {
            bail!(CliError::Invalid(format!("empty seed range {text:?}")));
        }
        return Ok((a..b).collect());
    }
    parse_list(text, "seed")
}

/// `tiny`, `random:TARGETS:UAVS` or a scenario file.
pub fn resolve_scenario(source: &str, seed: u64) -> Result<Scenario> {
    if source == "tiny" {
        return Ok(tiny_scenario());
    }
    if let Some(dims) = source.strip_prefix("random:") {
        let parts: Vec<usize> = parse_list(&dims.replace(':', ","), "scenario dimension")?;
        let [targets, uavs] = parts[..] else {
            bail!(CliError::Invalid(format!("expected random:TARGETS:UAVS, got {source:?}")));
        };
        return Ok(generate_random_scenario(targets, uavs, seed)?);
    }
    Ok(load_scenario(Path::new(source))?)
}

fn csv_bytes<T: Serialize>(header: &str, rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn start(command: &str, common: &Common, scenario: &str, seeds: &[u64], overrides: Vec<String>, argv: Vec<String>) -> Result<(OutputDir, RunManifest)> {
    let mut out = OutputDir::create(&common.out)?;
    let manifest = RunManifest::new(command, argv, scenario.to_string(), seeds.to_vec(), overrides, &common.out);
    out.write_manifest(&manifest)?;
    Ok((out, manifest))
}

#[derive(Debug, Serialize)]
struct CostRow {
    num_targets: usize,
    seed: u64,
    greedy_fitness: f64,
    randomized_fitness: f64,
    improvement: f64,
    greedy_violations: usize,
    randomized_violations: usize,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    num_targets: usize,
    instances: usize,
    median_improvement: f64,
    improvement_of_medians: f64,
}

/// Randomized against pure greedy per instance, plus per-size medians.
pub fn plan(args: &PlanArgs, argv: Vec<String>) -> Result<RunResults> {
    let seeds = parse_seeds(&args.common)?;
    let label = args.common.scenario.clone().unwrap_or_else(|| format!("random:{}:{}", args.targets, args.uavs));
    let (mut out, manifest) = start("plan", &args.common, &label, &seeds, vec![], argv)?;
    let instances: Vec<(u64, Scenario)> = match &args.common.scenario {
        Some(source) => seeds.iter().map(|&s| Ok((s, resolve_scenario(source, s)?))).collect::<Result<_>>()?,
        None => {
            let sizes: Vec<usize> = parse_list(&args.targets, "target count")?;
            let mut v = Vec::new();
            for w in sizes {
                for &s in &seeds {
                    v.push((s, generate_random_scenario(w, args.uavs, s)?));
                }
            }
            v
        }
    };
    let mut rows = Vec::new();
    for (seed, scenario) in &instances {
        let greedy = plan_route_pure_greedy(scenario);
        let randomized = plan_route(scenario, args.k, args.restarts, *seed)?;
        let w = scenario.targets.len();
        let mut bytes = Vec::new();
        randomized.write_csv(&mut bytes)?;
        out.write(&format!("routes/route_w{w}_seed{seed}.csv"), &bytes)?;
        rows.push(CostRow {
            num_targets: w,
            seed: *seed,
            greedy_fitness: greedy.total_fitness,
            randomized_fitness: randomized.total_fitness,
            improvement: (greedy.total_fitness - randomized.total_fitness) / greedy.total_fitness,
            greedy_violations: greedy.violations,
            randomized_violations: randomized.violations,
        });
    }
    let mut by_size: BTreeMap<usize, Vec<&CostRow>> = BTreeMap::new();
    for r in &rows {
        by_size.entry(r.num_targets).or_default().push(r);
    }
    let summary: Vec<SummaryRow> = by_size
        .into_iter()
        .map(|(w, rs)| {
            let mut imp: Vec<f64> = rs.iter().map(|r| r.improvement).collect();
            let mut g: Vec<f64> = rs.iter().map(|r| r.greedy_fitness).collect();
            let mut r: Vec<f64> = rs.iter().map(|r| r.randomized_fitness).collect();
            let (mg, mr) = (median(&mut g), median(&mut r));
            SummaryRow {
                num_targets: w,
                instances: rs.len(),
                median_improvement: median(&mut imp),
                improvement_of_medians: (mg - mr) / mg,
            }
        })
        .collect();
    out.write("plan_costs.csv", &csv_bytes(PLAN_COSTS_CSV_HEADER, &rows)?)?;
    out.write("plan_summary.csv", &csv_bytes(PLAN_SUMMARY_CSV_HEADER, &summary)?)?;
    out.finish(&manifest)
}

#[derive(Debug, Serialize)]
struct OracleSummaryRow {
    task_id: u32,
    target_id: u32,
    enumeration_size: u128,
    feasible_found: bool,
}

/// Best decision per task from full batteries over its target.
pub fn oracle(args: &OracleArgs, argv: Vec<String>) -> Result<RunResults> {
    let source = args.common.scenario.clone().unwrap_or_else(|| "tiny".into());
    let scenario = resolve_scenario(&source, args.common.seed)?;
    let (mut out, manifest) = start("oracle", &args.common, &source, &[args.common.seed], vec![], argv)?;
    let links = LinkTable::deterministic(&scenario);
    let targets: Vec<u32> = match args.target {
        Some(t) if scenario.target(t).is_none() => bail!(CliError::Invalid(format!("no target {t}"))),
        Some(t) => vec![t],
        None => scenario.targets.iter().map(|t| t.id).collect(),
    };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for target in targets {
        let task = scenario
            .task_for_target(target, target, 0.0)
            .ok_or_else(|| CliError::Invalid(format!("target {target} has no model")))?;
        let best = solve_oracle(&task, &scenario, &FleetState::for_task(&scenario, &task), &links, args.limit)?;
        rows.push(OracleRow::new(&scenario, &best.decision, &best.report));
        summary.push(OracleSummaryRow {
            task_id: task.id,
            target_id: target,
            enumeration_size: best.evaluated,
            feasible_found: best.feasible_found,
        });
    }
    let mut bytes = Vec::new();
    write_oracle_csv(&mut bytes, &rows)?;
    out.write("oracle.csv", &bytes)?;
    out.write("oracle_summary.csv", &csv_bytes(ORACLE_SUMMARY_CSV_HEADER, &summary)?)?;
    out.finish(&manifest)
}

/// What `evaluate` needs to rebuild a trained policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub algorithm: String,
    pub actor_kind: ActorKind,
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub route: Vec<u32>,
    pub seed: u64,
}

/// File-name form of an algorithm name.
pub fn file_tag(algo: Algorithm) -> String {
    algo.to_string().replace('+', "-")
}

fn route_for(algo: Algorithm, scenario: &Scenario, k: usize, restarts: usize, seed: u64) -> Result<Vec<u32>> {
    if algo.uses_planner() {
        Ok(plan_route(scenario, k, restarts, seed)?.order)
    } else {
        let mut ids: Vec<u32> = scenario.targets.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        Ok(ids)
    }
}

/// One log, checkpoint and checkpoint description per seed.
pub fn train(args: &TrainArgs, argv: Vec<String>) -> Result<RunResults> {
    let algo: Algorithm = args.algo.parse()?;
    let Some(kind) = algo.actor_kind() else {
        bail!(CliError::Invalid(format!("{algo} has nothing to train")));
    };
    let mut config = match args.preset.as_str() {
        "full" => TrainConfig::default(),
        "desk" => TrainConfig::desk(),
        other => bail!(CliError::Invalid(format!("unknown preset {other:?}"))),
    };
    if let Some(e) = args.episodes {
        config.episodes = e;
    }
    for kv in &args.config {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("expected KEY=VALUE, got {kv:?}")))?;
        config = config.with_override(k.trim(), v.trim())?;
    }
    config.validate()?;
    let seeds = parse_seeds(&args.common)?;
    let source = args.common.scenario.clone().unwrap_or_else(|| "tiny".into());
    let scenario = resolve_scenario(&source, args.common.seed)?;
    let (mut out, manifest) = start("train", &args.common, &source, &seeds, args.config.clone(), argv)?;
    let reference = oracle_reference(&scenario, DEFAULT_ORACLE_LIMIT)?;
    let tag = file_tag(algo);
    for &seed in &seeds {
        let route = route_for(algo, &scenario, args.k, args.restarts, seed)?;
        let run_config = TrainConfig { seed, ..config.clone() };
        let result = train_learner(&scenario, &route, kind, &run_config, reference)?;
        let mut log = Vec::new();
        result.log.write_csv(&mut log)?;
        out.write(&format!("train_{tag}_seed{seed}.csv"), &log)?;
        let nets: Vec<_> = result.learner.actors.iter().map(|a| a.mlp()).collect();
        let mut ckpt = Vec::new();
        write_checkpoint(&mut ckpt, &nets)?;
        out.write(&format!("actors_{tag}_seed{seed}.ckpt"), &ckpt)?;
        let meta = CheckpointMeta {
            algorithm: algo.to_string(),
            actor_kind: kind,
            diffusion_steps: run_config.diffusion_steps,
            beta_start: run_config.beta_start,
            beta_end: run_config.beta_end,
            route,
            seed,
        };
        out.write(&format!("actors_{tag}_seed{seed}.json"), &serde_json::to_vec_pretty(&meta)?)?;
    }
    out.finish(&manifest)
}

struct LoadedPolicy {
    algorithm: Algorithm,
    actors: Vec<Actor>,
    schedule: NoiseSchedule,
    route: Vec<u32>,
}

fn load_policies(dir: &Path) -> Result<Vec<LoadedPolicy>> {
    let mut metas: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("actors_")))
        .collect();
    metas.sort();
    if metas.is_empty() {
        bail!(CliError::Missing(format!("no checkpoints in {}", dir.display())));
    }
    let mut out = Vec::new();
    for path in metas {
        let meta: CheckpointMeta = serde_json::from_slice(&fs::read(&path).with_context(|| format!("reading {}", path.display()))?)
            .with_context(|| format!("parsing {}", path.display()))?;
        let ckpt = path.with_extension("ckpt");
        let file = fs::File::open(&ckpt).map_err(|_| CliError::Missing(format!("missing checkpoint {}", ckpt.display())))?;
        let nets = read_checkpoint(std::io::BufReader::new(file))?;
        out.push(LoadedPolicy {
            algorithm: meta.algorithm.parse()?,
            actors: nets.into_iter().map(|m| Actor::from_mlp(meta.actor_kind, m, meta.diffusion_steps)).collect(),
            schedule: NoiseSchedule::linear(meta.diffusion_steps, meta.beta_start, meta.beta_end)?,
            route: meta.route,
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct MetricRow {
    method: String,
    task_size_gb: f64,
    aoi_s: f64,
    completion_rate: f64,
    utility: f64,
    episodes: usize,
}

fn metric_row(method: &str, size: f64, stats: &EpisodeStats) -> MetricRow {
    MetricRow {
        method: method.to_string(),
        task_size_gb: size,
        aoi_s: stats.mean_aoi(),
        completion_rate: stats.mean_completion(),
        utility: stats.mean_utility(),
        episodes: stats.episodes(),
    }
}

/// Sweeps every target's task size and scores each method.
pub fn evaluate(args: &EvaluateArgs, argv: Vec<String>) -> Result<RunResults> {
    let seeds = parse_seeds(&args.common)?;
    let sizes: Vec<f64> = parse_list(&args.sizes, "task size")?;
    if sizes.iter().any(|s| !(*s > 0.0)) {
        bail!(CliError::Invalid("task sizes must be positive".into()));
    }
    let source = args.common.scenario.clone().unwrap_or_else(|| "tiny".into());
    let base = resolve_scenario(&source, args.common.seed)?;
    let policies = match &args.checkpoints {
        Some(dir) => load_policies(dir)?,
        None => Vec::new(),
    };
    let (mut out, manifest) = start("evaluate", &args.common, &source, &seeds, vec![], argv)?;
    let mut rows = Vec::new();
    for &size in &sizes {
        let mut scenario = base.clone();
        for t in &mut scenario.targets {
            t.task_size_gb = size;
        }
        scenario.validate()?;
        for algo in Algorithm::ALL {
            let mine: Vec<&LoadedPolicy> = policies.iter().filter(|p| p.algorithm == algo).collect();
            if mine.is_empty() {
                continue;
            }
            let mut stats = EpisodeStats::default();
            for p in mine {
                let mut env = SwarmEnv::new(scenario.clone(), p.route.clone())?;
                for &seed in &seeds {
                    let e = evaluate_actors(&p.actors, &p.schedule, &mut env, args.episodes, seed)?;
                    stats.add_summary(&e, args.episodes.max(1));
                }
            }
            rows.push(metric_row(&algo.to_string(), size, &stats));
        }
        let route = plan_route(&scenario, args.k, args.restarts, args.common.seed)?.order;
        let mut greedy = EpisodeStats::default();
        for &seed in &seeds {
            for e in 0..args.episodes.max(1) {
                greedy.add_trace(&greedy_assignment_baseline(&scenario, &route, seed.wrapping_add(e as u64))?);
            }
        }
        rows.push(metric_row("greedy", size, &greedy));
        if !args.no_oracle {
            let mut best = EpisodeStats::default();
            let mut too_large = false;
            'seeds: for &seed in &seeds {
                for e in 0..args.episodes.max(1) {
                    match oracle_baseline(&scenario, &route, seed.wrapping_add(e as u64), DEFAULT_ORACLE_LIMIT) {
                        Ok(trace) => best.add_trace(&trace),
                        Err(MarlError::Assignment(swarmsplit::assignment::AssignmentError::SearchTooLarge { .. })) => {
                            too_large = true;
                            break 'seeds;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            if !too_large {
                rows.push(metric_row("oracle", size, &best));
            }
        }
    }
    out.write("metrics.csv", &csv_bytes(METRICS_CSV_HEADER, &rows)?)?;
    out.finish(&manifest)
}
