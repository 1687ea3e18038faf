//! `eval` and `compare`: per-episode metrics, aggregates and relative deltas.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::sha256_hex;
use crate::ars::EsPolicy;
use crate::env::{run_episode, write_trajectory_csv, Env, Stage, Trajectory};
use crate::error::{Error, Result};
use crate::ppo::MlpPolicy;
use crate::seeds::derive_seed;
use crate::sim::NUM_JOINTS;
use crate::task::task_by_name;

pub const SUMMARY_FILE: &str = "summary.jsonl";

/// A policy file of either stage, told apart by its magic bytes.
#[derive(Debug, Clone)]
pub enum LoadedPolicy {
    Ars(EsPolicy),
    Ppo(MlpPolicy),
}

impl LoadedPolicy {
    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read(path).map_err(|e| Error::PolicyFile { path: path.to_path_buf(), msg: e.to_string() })?;
        let bad = |msg: String| Error::PolicyFile { path: path.to_path_buf(), msg };
        match data.get(..8) {
            Some(b"ACRBPPO\0") => Ok(LoadedPolicy::Ppo(MlpPolicy::from_bytes(&data).map_err(bad)?)),
            Some(b"ACRBTES\0") => Ok(LoadedPolicy::Ars(EsPolicy::from_bytes(&data).map_err(bad)?)),
            _ => Err(bad("not a policy file".into())),
        }
    }

    pub fn stage(&self) -> Stage {
        match self {
            LoadedPolicy::Ars(_) => Stage::Ars,
            LoadedPolicy::Ppo(_) => Stage::Ppo,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            LoadedPolicy::Ars(p) => p.obs_dim(),
            LoadedPolicy::Ppo(p) => p.obs_dim(),
        }
    }

    pub fn act_dim(&self) -> usize {
        match self {
            LoadedPolicy::Ars(p) => p.act_dim(),
            LoadedPolicy::Ppo(p) => p.act_dim(),
        }
    }

    fn act(&self, obs: &[f64]) -> Result<[f64; NUM_JOINTS]> {
        let a = match self {
            LoadedPolicy::Ars(p) => p.act(obs)?,
            LoadedPolicy::Ppo(p) => p.deterministic_action(obs)?,
        };
        a.try_into().map_err(|v: Vec<f64>| Error::Dimension { what: "action", expected: NUM_JOINTS, got: v.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub seed: u64,
    pub height: f64,
    pub distance: f64,
    pub force: f64,
    pub success: bool,
    #[serde(rename = "return")]
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics; one sample has std 0.
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub task: String,
    pub robot: String,
    pub stage: String,
    pub randomized: bool,
    pub episodes: usize,
    pub height: MeanStd,
    pub distance: MeanStd,
    pub force: MeanStd,
    pub success_rate: f64,
    #[serde(rename = "return")]
    pub ret: MeanStd,
    pub config_hash: String,
    pub policy_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Row {
    Aggregate(Aggregate),
    Episode(EpisodeMetrics),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub aggregate: Aggregate,
    pub episodes: Vec<EpisodeMetrics>,
}

impl ExperimentSummary {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let rows = std::iter::once(Row::Aggregate(self.aggregate.clone())).chain(self.episodes.iter().cloned().map(Row::Episode));
        for row in rows {
            out.push_str(&serde_json::to_string(&row).expect("summary rows serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut aggregate = None;
        let mut episodes = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: Row = serde_json::from_str(line).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            match (row, i) {
                (Row::Aggregate(a), 0) => aggregate = Some(a),
                (Row::Episode(e), i) if i > 0 => episodes.push(e),
                _ => return Err(Error::Parse { line: i + 1, msg: "the aggregate row must come first, and only once".into() }),
            }
        }
        let aggregate = aggregate.ok_or(Error::Parse { line: 1, msg: "missing aggregate row".into() })?;
        if aggregate.episodes != episodes.len() {
            return Err(Error::Parse {
                line: 1,
                msg: format!("aggregate counts {} episodes but {} rows follow", aggregate.episodes, episodes.len()),
            });
        }
        Ok(ExperimentSummary { aggregate, episodes })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }
}

/// Runs `episodes` evaluation episodes of `policy` under `cfg` and returns
/// the summary plus one trajectory per episode.
pub fn evaluate(
    cfg: &RunConfig,
    policy: &LoadedPolicy,
    policy_hash: &str,
    episodes: usize,
    seed: u64,
) -> Result<(ExperimentSummary, Vec<Trajectory>)> {
    if episodes == 0 {
        return Err(Error::config("eval: episodes must be at least 1"));
    }
    let task = task_by_name(&cfg.task)?;
    let stage = policy.stage();
    let env_cfg = cfg.env_config(stage);
    if policy.obs_dim() != env_cfg.obs_dim() || policy.act_dim() != NUM_JOINTS {
        return Err(Error::config(format!(
            "policy maps {} observations to {} actions; the {} environment needs {} to {}",
            policy.obs_dim(),
            policy.act_dim(),
            if stage == Stage::Ars { "first-stage" } else { "second-stage" },
            env_cfg.obs_dim(),
            NUM_JOINTS
        )));
    }
    let mut env = Env::new(env_cfg, task.clone())?;
    env.set_recording(true);
    let mut rows = Vec::with_capacity(episodes);
    let mut trajectories = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let s = derive_seed(seed, "eval", k as u64);
        let out = run_episode(&mut env, &mut |obs| policy.act(obs), s)?;
        rows.push(EpisodeMetrics {
            episode: k,
            seed: s,
            height: out.stats.max_height,
            distance: out.stats.distance,
            force: out.stats.peak_landing_force,
            success: task.success(&out.stats),
            ret: out.total_reward,
        });
        trajectories.push(out.trajectory);
    }
    let col = |f: fn(&EpisodeMetrics) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let aggregate = Aggregate {
        task: cfg.task.clone(),
        robot: cfg.robot.to_string(),
        stage: if stage == Stage::Ars { "ars" } else { "ppo" }.into(),
        randomized: cfg.randomize,
        episodes,
        height: MeanStd::of(&col(|e| e.height)),
        distance: MeanStd::of(&col(|e| e.distance)),
        force: MeanStd::of(&col(|e| e.force)),
        success_rate: rows.iter().filter(|e| e.success).count() as f64 / episodes as f64,
        ret: MeanStd::of(&col(|e| e.ret)),
        config_hash: sha256_hex(cfg.to_ini().as_bytes()),
        policy_hash: policy_hash.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok((ExperimentSummary { aggregate, episodes: rows }, trajectories))
}

/// Evaluates the policy file and writes `summary.jsonl` and
/// `trajectories/episode_{k}.csv` under `out`.
pub fn eval_to_dir(cfg: &RunConfig, policy_path: &Path, episodes: usize, seed: u64, out: &Path) -> Result<ExperimentSummary> {
    let policy = LoadedPolicy::load(policy_path)?;
    let hash = sha256_hex(&fs::read(policy_path)?);
    let (summary, trajectories) = evaluate(cfg, &policy, &hash, episodes, seed)?;
    let tdir = out.join("trajectories");
    fs::create_dir_all(&tdir)?;
    fs::write(out.join(SUMMARY_FILE), summary.to_jsonl())?;
    for (k, t) in trajectories.iter().enumerate() {
        write_trajectory_csv(fs::File::create(tdir.join(format!("episode_{k}.csv")))?, t)?;
    }
    Ok(summary)
}

/// Metric rows with one value column per summary and, for every summary
/// after the first, its relative delta `(x - x₀) / |x₀|` against the first.
pub fn compare<W: Write>(out: W, labeled: &[(String, ExperimentSummary)]) -> Result<()> {
    if labeled.len() < 2 {
        return Err(Error::config("compare needs at least two summaries"));
    }
    let task = &labeled[0].1.aggregate.task;
    if let Some((label, s)) = labeled.iter().find(|(_, s)| &s.aggregate.task != task) {
        return Err(Error::config(format!("{label} is a {} summary; the first is {task}", s.aggregate.task)));
    }
    let metrics: [(&str, fn(&Aggregate) -> f64); 5] = [
        ("height", |a| a.height.mean),
        ("distance", |a| a.distance.mean),
        ("force", |a| a.force.mean),
        ("success_rate", |a| a.success_rate),
        ("return", |a| a.ret.mean),
    ];
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["metric".to_string()];
    head.extend(labeled.iter().map(|(l, _)| l.clone()));
    head.extend(labeled[1..].iter().map(|(l, _)| format!("delta_{l}")));
    w.write_record(&head).map_err(csv_err)?;
    for (name, get) in metrics {
        let vals: Vec<f64> = labeled.iter().map(|(_, s)| get(&s.aggregate)).collect();
        let mut rec = vec![name.to_string()];
        rec.extend(vals.iter().map(|v| v.to_string()));
        rec.extend(vals[1..].iter().map(|v| relative_delta(*v, vals[0]).to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Zero when equal, even at a zero baseline.
pub fn relative_delta(x: f64, base: f64) -> f64 {
    if x == base {
        0.0
    } else {
        (x - base) / base.abs()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
