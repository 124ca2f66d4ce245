//! The harness commands. Each one reads a resolved [`RunSpec`] and writes
//! its files under the run spec's output directory.

use std::fs;
use std::path::{Path, PathBuf};

use aam_core::baselines::{odla_step, OdlaController, RandomController};
use aam_core::policy::Policy;
use aam_core::sim::{format_log, mix_seed, Completion, World};
use aam_core::train::{curve_csv, train_with, ControlOptions, CurvePoint, PolicyController, TrainConfig};
use aam_core::{run_episode, run_world, Decision, FleetController};
use serde::Serialize;

use crate::render::snapshot;
use crate::report::{write_json, write_metrics, EpisodeRow, Stat, Summary};
use crate::spec::{PolicySelector, RunSpec};
use crate::{CliError, Result};

fn prepare(spec: &RunSpec) -> Result<()> {
    fs::create_dir_all(&spec.out_dir)?;
    fs::write(spec.out_dir.join("runspec.json"), spec.to_json()?)?;
    Ok(())
}

/// File name of the checkpoint written after `steps` active timesteps.
pub fn checkpoint_name(steps: u64) -> String {
    format!("checkpoint_{steps}.json")
}

/// Loads the run spec's checkpoint and checks it matches the selected network.
pub fn load_policy(spec: &RunSpec) -> Result<Option<Policy>> {
    let Some((arch, _)) = spec.policy.learned() else {
        return Ok(None);
    };
    let rel = spec
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::MissingCheckpoint(format!("policy {} needs a checkpoint", spec.policy)))?;
    let path = spec.resolve_path(rel);
    if !path.exists() {
        return Err(CliError::MissingCheckpoint(path.display().to_string()));
    }
    let policy = Policy::load(&path)?;
    if policy.arch != arch {
        return Err(CliError::Spec(format!(
            "{} contains a {} network but policy {} was selected",
            path.display(),
            policy.arch.name(),
            spec.policy
        )));
    }
    Ok(Some(policy))
}

fn control(spec: &RunSpec) -> ControlOptions {
    ControlOptions {
        k_v: spec.env.k_v,
        k_d: spec.env.k_d,
        use_mask: spec.policy.learned().is_some_and(|(_, masked)| masked),
        greedy: spec.greedy,
    }
}

/// A fresh controller for one episode.
fn controller<'a>(spec: &RunSpec, policy: Option<&'a Policy>, seed: u64) -> Box<dyn FleetController + 'a> {
    match (spec.policy, policy) {
        (PolicySelector::Odla, _) => Box::new(OdlaController),
        (PolicySelector::Random, _) => Box::new(RandomController::new(seed)),
        (_, Some(policy)) => Box::new(PolicyController::new(policy, control(spec), seed)),
        (_, None) => unreachable!("learned policies are loaded before evaluation"),
    }
}

pub struct TrainReport {
    pub policy: Policy,
    pub curve: Vec<CurvePoint>,
    pub checkpoint: PathBuf,
}

/// Trains the selected network, writing milestone checkpoints, the final
/// checkpoint, `curve.csv` and `plotdata.json`.
pub fn train(spec: &RunSpec) -> Result<TrainReport> {
    let Some((arch, masked)) = spec.policy.learned() else {
        return Err(CliError::Spec(format!("policy {} cannot be trained", spec.policy)));
    };
    prepare(spec)?;
    let mut config = TrainConfig::new(spec.env.clone(), arch, masked, spec.budget, spec.seed);
    if let Some(ppo) = &spec.ppo {
        config.ppo = ppo.clone();
    }
    let every = spec.checkpoint_every;
    let mut last_milestone = 0;
    let outcome = train_with(&config, |policy, point| {
        if every > 0 && point.active_timesteps / every > last_milestone && point.active_timesteps < spec.budget {
            last_milestone = point.active_timesteps / every;
            policy.save(&spec.out_dir.join(checkpoint_name(last_milestone * every)))?;
        }
        Ok(())
    })?;
    let checkpoint = spec.out_dir.join(checkpoint_name(spec.budget));
    outcome.policy.save(&checkpoint)?;
    fs::write(spec.out_dir.join("curve.csv"), curve_csv(&outcome.curve))?;
    write_json(
        &spec.out_dir.join("plotdata.json"),
        &serde_json::json!({ "policy": spec.policy.name(), "curve": outcome.curve }),
    )?;
    Ok(TrainReport {
        policy: outcome.policy,
        curve: outcome.curve,
        checkpoint,
    })
}

pub struct EvalReport {
    pub rows: Vec<EpisodeRow>,
    pub summary: Summary,
}

/// Runs the evaluation episodes without writing anything.
pub fn evaluate(spec: &RunSpec) -> Result<EvalReport> {
    let policy = load_policy(spec)?;
    let mut rows = Vec::with_capacity(spec.episodes);
    for episode in 0..spec.episodes {
        let episode_seed = spec.seed + episode as u64;
        let mut c = controller(spec, policy.as_ref(), mix_seed(spec.seed, episode as u64));
        let run = run_episode(&spec.env, episode_seed, c.as_mut())?;
        rows.push(EpisodeRow {
            episode,
            episode_seed,
            metrics: run.metrics,
        });
    }
    let summary = Summary::new(spec.policy.name(), &rows);
    Ok(EvalReport { rows, summary })
}

/// Evaluates and writes `metrics.csv` and `summary.json`.
pub fn eval(spec: &RunSpec) -> Result<EvalReport> {
    let report = evaluate(spec)?;
    prepare(spec)?;
    write_metrics(&spec.out_dir.join("metrics.csv"), &report.rows)?;
    write_json(&spec.out_dir.join("summary.json"), &report.summary)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub policy: PolicySelector,
    pub fleet_reward: Stat,
    pub fulfillment_ratio: Stat,
    /// Per-episode values, in episode order.
    pub fleet_rewards: Vec<f64>,
    pub fulfillment_ratios: Vec<f64>,
}

pub const COMPARISON_HEADER: &str = "label,policy,fleet_reward_mean,fleet_reward_std,fulfillment_ratio_mean,fulfillment_ratio_std";

/// Evaluates every spec on the same episodes. Results go to
/// `out/<label>/` for each policy plus `comparison.csv` and
/// `plotdata.json` in `out`.
pub fn compare(specs: &[RunSpec], out: &Path) -> Result<Vec<ComparisonRow>> {
    if specs.len() < 2 {
        return Err(CliError::Spec("compare needs at least two run specs".into()));
    }
    let first = &specs[0];
    if let Some(other) = specs.iter().find(|s| s.env != first.env || s.episodes != first.episodes || s.seed != first.seed) {
        return Err(CliError::Spec(format!(
            "policy {} runs on a different environment, episode count or seed than policy {}",
            other.policy, first.policy
        )));
    }
    let mut rows: Vec<ComparisonRow> = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut label = spec.policy.name().to_string();
        let mut k = 2;
        while rows.iter().any(|r| r.label == label) {
            label = format!("{}-{k}", spec.policy.name());
            k += 1;
        }
        let report = evaluate(spec)?;
        let dir = out.join(&label);
        fs::create_dir_all(&dir)?;
        write_metrics(&dir.join("metrics.csv"), &report.rows)?;
        write_json(&dir.join("summary.json"), &report.summary)?;
        rows.push(ComparisonRow {
            label,
            policy: spec.policy,
            fleet_reward: report.summary.stat("fleet_reward"),
            fulfillment_ratio: report.summary.stat("fulfillment_ratio"),
            fleet_rewards: report.rows.iter().map(|r| r.metrics.fleet_reward).collect(),
            fulfillment_ratios: report.rows.iter().map(|r| r.metrics.fulfillment_ratio).collect(),
        });
    }

    let mut table = String::from(COMPARISON_HEADER);
    table.push('\n');
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.label, r.policy, r.fleet_reward.mean, r.fleet_reward.std, r.fulfillment_ratio.mean, r.fulfillment_ratio.std
        ));
    }
    fs::write(out.join("comparison.csv"), table)?;
    let series: Vec<_> = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "label": r.label,
                "policy": r.policy,
                "fleet_reward": r.fleet_reward,
                "fulfillment_ratio": r.fulfillment_ratio,
            })
        })
        .collect();
    write_json(
        &out.join("plotdata.json"),
        &serde_json::json!({ "metrics": ["fleet_reward", "fulfillment_ratio"], "series": series }),
    )?;
    Ok(rows)
}

/// Records every oracle round so the matchings can be audited.
struct Audited {
    episode: usize,
    lines: Vec<String>,
}

impl FleetController for Audited {
    fn decide(&mut self, world: &World, deciding: &[usize]) -> aam_core::Result<Vec<Decision>> {
        let decisions = odla_step(world, deciding);
        for (v, d) in deciding.iter().zip(&decisions) {
            let choice = match d {
                Decision::Depot(d) => d.to_string(),
                Decision::Hold => "hold".into(),
            };
            self.lines.push(format!(
                "{}\t{}\t{}\t{}\t{}",
                self.episode,
                world.clock,
                v,
                world.queued_requests(),
                choice
            ));
        }
        Ok(decisions)
    }
}

pub const ORACLE_HEADER: &str = "episode\ttick\tvehicle\tqueued\tdepot";

/// Evaluates the assignment oracle and writes its decisions to `oracle.tsv`
/// next to the usual metrics.
pub fn oracle(spec: &RunSpec) -> Result<EvalReport> {
    let spec = RunSpec {
        policy: PolicySelector::Odla,
        ..spec.clone()
    };
    prepare(&spec)?;
    let mut rows = Vec::with_capacity(spec.episodes);
    let mut audit = vec![ORACLE_HEADER.to_string()];
    for episode in 0..spec.episodes {
        let episode_seed = spec.seed + episode as u64;
        let mut c = Audited {
            episode,
            lines: Vec::new(),
        };
        let run = run_episode(&spec.env, episode_seed, &mut c)?;
        audit.append(&mut c.lines);
        rows.push(EpisodeRow {
            episode,
            episode_seed,
            metrics: run.metrics,
        });
    }
    let summary = Summary::new(spec.policy.name(), &rows);
    write_metrics(&spec.out_dir.join("metrics.csv"), &rows)?;
    write_json(&spec.out_dir.join("summary.json"), &summary)?;
    fs::write(spec.out_dir.join("oracle.tsv"), audit.join("\n") + "\n")?;
    Ok(EvalReport { rows, summary })
}

pub struct TraceReport {
    pub world: World,
    pub log: String,
    pub snapshots: String,
}

/// Snapshots the world on every tick that is a multiple of `every` and on
/// which something happens, while delegating decisions.
struct Snapshotting<'a> {
    inner: Box<dyn FleetController + 'a>,
    every: u64,
    last: Option<u64>,
    out: String,
}

impl Snapshotting<'_> {
    fn capture(&mut self, world: &World) {
        if self.last != Some(world.clock) {
            self.out.push_str(&snapshot(world));
            self.out.push('\n');
            self.last = Some(world.clock);
        }
    }

    fn scheduled(&mut self, world: &World) {
        if self.every > 0 && world.clock.is_multiple_of(self.every) {
            self.capture(world);
        }
    }
}

impl FleetController for Snapshotting<'_> {
    fn decide(&mut self, world: &World, deciding: &[usize]) -> aam_core::Result<Vec<Decision>> {
        self.scheduled(world);
        self.inner.decide(world, deciding)
    }

    fn on_completion(&mut self, world: &World, completion: &Completion) {
        self.inner.on_completion(world, completion);
        self.scheduled(world);
    }
}

/// Runs one episode (`seed`) and writes `trace.log`, one event per line,
/// and `snapshots.txt`.
pub fn trace(spec: &RunSpec) -> Result<TraceReport> {
    if spec.policy == PolicySelector::Odla {
        return Err(CliError::Spec("the oracle is only available to eval, compare and oracle".into()));
    }
    let policy = load_policy(spec)?;
    let world = World::new(&spec.env, spec.seed)?;
    trace_world(spec, world, controller(spec, policy.as_ref(), mix_seed(spec.seed, 0)))
}

/// Traces an already built world under any controller. Only the run spec's
/// output directory and snapshot interval are used. The first and final
/// states are always drawn.
pub fn trace_world(spec: &RunSpec, world: World, inner: Box<dyn FleetController + '_>) -> Result<TraceReport> {
    let mut c = Snapshotting {
        inner,
        every: spec.snapshot_every,
        last: None,
        out: String::new(),
    };
    c.capture(&world);
    let run = run_world(world, &mut c)?;
    c.capture(&run.world);
    let log = format_log(run.world.events());
    prepare(spec)?;
    fs::write(spec.out_dir.join("trace.log"), &log)?;
    fs::write(spec.out_dir.join("snapshots.txt"), &c.out)?;
    Ok(TraceReport {
        world: run.world,
        log,
        snapshots: c.out,
    })
}

/// Structure of the selected network: from the checkpoint when one is
/// given, otherwise freshly initialised from `seed`.
pub fn policy_info(spec: &RunSpec) -> Result<aam_core::policy::PolicyInfo> {
    let Some((arch, _)) = spec.policy.learned() else {
        return Err(CliError::Spec(format!("policy {} has no network", spec.policy)));
    };
    let policy = match spec.checkpoint {
        Some(_) => load_policy(spec)?.expect("learned selector"),
        None => Policy::new(arch, spec.seed)?,
    };
    let info = policy.info();
    prepare(spec)?;
    write_json(&spec.out_dir.join("policy-info.json"), &info)?;
    Ok(info)
}
