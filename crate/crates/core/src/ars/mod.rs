//! Augmented random search (top-direction variant with observation
//! normalization) over any registered policy representation.

mod policy;
mod stats;

pub use policy::{representation_by_name, representation_registry, EsPolicy, Linear, Mlp, Representation};
pub use stats::{RunningStat, VAR_FLOOR};

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::env::{Env, EnvConfig, NoiseModel, Stage};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_for};
use crate::sim::NUM_JOINTS;
use crate::task::Task;

#[derive(Debug, Clone, PartialEq)]
pub struct ArsConfig {
    pub step_size: f64,
    pub noise: f64,
    pub directions: usize,
    pub elites: usize,
    pub rollouts_per_direction: usize,
    pub iterations: usize,
    /// Noise-free episodes averaged for each curve point.
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for ArsConfig {
    fn default() -> Self {
        ArsConfig {
            step_size: 0.02,
            noise: 0.03,
            directions: 32,
            elites: 16,
            rollouts_per_direction: 1,
            iterations: 300,
            eval_episodes: 1,
            seed: 0,
        }
    }
}

impl ArsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::config("ars.step_size must be >= 0"));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::config("ars.noise must be positive"));
        }
        if self.directions == 0 || self.elites == 0 || self.elites > self.directions {
            return Err(Error::config(format!(
                "ars needs 1 <= elites <= directions, got elites={} directions={}",
                self.elites, self.directions
            )));
        }
        if self.rollouts_per_direction == 0 || self.eval_episodes == 0 {
            return Err(Error::config("ars.rollouts_per_direction and ars.eval_episodes must be >= 1"));
        }
        Ok(())
    }
}

/// Return of one rollout plus the raw observations it visited.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub ret: f64,
    pub obs: RunningStat,
    pub steps: usize,
}

/// Scores a policy. Implementations must be deterministic in `seed`.
pub trait Evaluator: Sync {
    fn evaluate(&self, policy: &EsPolicy, seed: u64) -> Result<Rollout>;
}

/// Runs one episode of a task in its own environment per call.
pub struct EnvEvaluator {
    pub env: EnvConfig,
    pub task: Arc<dyn Task>,
}

impl EnvEvaluator {
    pub fn new(env: EnvConfig, task: Arc<dyn Task>) -> Result<Self> {
        env.validate()?;
        Ok(EnvEvaluator { env, task })
    }

    /// The same setup with observation noise switched off.
    pub fn noise_free(&self) -> Self {
        let mut env = self.env.clone();
        env.noise = NoiseModel::off();
        EnvEvaluator { env, task: self.task.clone() }
    }
}

impl Evaluator for EnvEvaluator {
    fn evaluate(&self, policy: &EsPolicy, seed: u64) -> Result<Rollout> {
        let mut env = Env::new(self.env.clone(), self.task.clone())?;
        let (mean, inv_std) = policy.obs_stat.normalizer();
        let mut obs = env.reset(seed)?;
        let mut stat = RunningStat::new(obs.len());
        let mut ret = 0.0;
        let mut steps = 0;
        loop {
            stat.push(&obs);
            let a = policy.act_with(&policy.params, &mean, &inv_std, &obs)?;
            let step = env.step(&a)?;
            ret += step.reward;
            steps += 1;
            obs = step.obs;
            if step.termination.terminated {
                return Ok(Rollout { ret, obs: stat, steps });
            }
        }
    }
}

/// What one iteration did, for logging and checks.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationInfo {
    pub elites: Vec<usize>,
    pub reward_std: f64,
    pub mean_return: f64,
    pub max_return: f64,
    pub steps: usize,
}

/// Floor on the reward standard deviation in the step scaling.
pub const REWARD_STD_FLOOR: f64 = 1e-6;

/// The parameter step for given directions and their antithetic returns.
/// Keeps the `elites` directions with the best `max(r+, r-)` (ties go to the
/// lower index).
pub fn ars_update(
    deltas: &[Vec<f64>],
    r_plus: &[f64],
    r_minus: &[f64],
    step_size: f64,
    elites: usize,
) -> (Vec<f64>, Vec<usize>, f64) {
    let n = deltas.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (r_plus[a].max(r_minus[a]), r_plus[b].max(r_minus[b]));
        kb.total_cmp(&ka).then(a.cmp(&b))
    });
    order.truncate(elites);
    order.sort_unstable();
    let used: Vec<f64> = order.iter().flat_map(|&k| [r_plus[k], r_minus[k]]).collect();
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    let std = (used.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / used.len() as f64).sqrt();
    let sigma = std.max(REWARD_STD_FLOOR);
    let dim = deltas.first().map_or(0, Vec::len);
    let mut step = vec![0.0; dim];
    let scale = step_size / (elites as f64 * sigma);
    for &k in &order {
        let c = scale * (r_plus[k] - r_minus[k]);
        for (s, d) in step.iter_mut().zip(&deltas[k]) {
            *s += c * d;
        }
    }
    (step, order, std)
}

/// One ARS iteration. Direction rollouts run in parallel and are merged in
/// direction order, so the result does not depend on scheduling.
pub fn ars_iteration(
    policy: &EsPolicy,
    cfg: &ArsConfig,
    evaluator: &dyn Evaluator,
    iteration: u64,
) -> Result<(EsPolicy, IterationInfo)> {
    cfg.validate()?;
    let dim = policy.params.len();
    let mut rng = rng_for(cfg.seed, "ars-directions", iteration);
    let deltas: Vec<Vec<f64>> =
        (0..cfg.directions).map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();

    let m = cfg.rollouts_per_direction;
    let results: Vec<Result<(f64, f64, RunningStat, usize)>> = (0..cfg.directions)
        .into_par_iter()
        .map(|k| {
            let mut stat = RunningStat::new(policy.obs_dim());
            let mut steps = 0;
            let mut r = [0.0; 2];
            for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
                let mut probe = policy.clone();
                for (p, d) in probe.params.iter_mut().zip(&deltas[k]) {
                    *p += sign * cfg.noise * d;
                }
                for j in 0..m {
                    // Both signs see the same episode seeds.
                    let seed = derive_seed(cfg.seed, "ars-rollout", (iteration * cfg.directions as u64 + k as u64) * m as u64 + j as u64);
                    let out = evaluator
                        .evaluate(&probe, seed)
                        .map_err(|e| Error::Evaluation { direction: k, source: Box::new(e) })?;
                    r[side] += out.ret / m as f64;
                    stat.merge(&out.obs);
                    steps += out.steps;
                }
            }
            Ok((r[0], r[1], stat, steps))
        })
        .collect();

    let mut r_plus = Vec::with_capacity(cfg.directions);
    let mut r_minus = Vec::with_capacity(cfg.directions);
    let mut stat = RunningStat::new(policy.obs_dim());
    let mut steps = 0;
    for res in results {
        let (rp, rm, s, n) = res?;
        r_plus.push(rp);
        r_minus.push(rm);
        stat.merge(&s);
        steps += n;
    }
    let (step, elites, reward_std) = ars_update(&deltas, &r_plus, &r_minus, cfg.step_size, cfg.elites);
    let mut next = policy.clone();
    for (p, s) in next.params.iter_mut().zip(&step) {
        *p += s;
    }
    if next.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::TrainingDiverged(format!("non-finite parameters after iteration {iteration}")));
    }
    next.obs_stat.merge(&stat);
    next.version += 1;
    let all: Vec<f64> = r_plus.iter().chain(&r_minus).copied().collect();
    let info = IterationInfo {
        elites,
        reward_std,
        mean_return: all.iter().sum::<f64>() / all.len() as f64,
        max_return: all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        steps,
    };
    Ok((next, info))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub eval_return: f64,
    /// Environment steps consumed so far, evaluations excluded.
    pub env_steps: usize,
    pub wallclock: f64,
}

#[derive(Debug, Clone)]
pub struct ArsResult {
    /// Policy with the best noise-free evaluation return seen.
    pub best: EsPolicy,
    pub best_return: f64,
    pub last: EsPolicy,
    pub curve: Vec<CurvePoint>,
}

/// Mean return of `cfg.eval_episodes` episodes with fixed seeds.
pub fn evaluate_policy(policy: &EsPolicy, evaluator: &dyn Evaluator, cfg: &ArsConfig) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..cfg.eval_episodes {
        total += evaluator.evaluate(policy, derive_seed(cfg.seed, "ars-eval", k as u64))?.ret;
    }
    Ok(total / cfg.eval_episodes as f64)
}

/// Runs `cfg.iterations` iterations from `initial`, logging a noise-free
/// evaluation after each one.
pub fn train_from(
    initial: EsPolicy,
    cfg: &ArsConfig,
    evaluator: &dyn Evaluator,
    eval: &dyn Evaluator,
    on_point: &mut dyn FnMut(&CurvePoint, &IterationInfo),
) -> Result<ArsResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut best_return = evaluate_policy(&initial, eval, cfg)?;
    let mut best = initial.clone();
    let mut policy = initial;
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut env_steps = 0;
    for it in 0..cfg.iterations {
        let (next, info) = ars_iteration(&policy, cfg, evaluator, it as u64)?;
        policy = next;
        env_steps += info.steps;
        let r = evaluate_policy(&policy, eval, cfg)?;
        if r > best_return {
            best_return = r;
            best = policy.clone();
        }
        let point = CurvePoint { iteration: it + 1, eval_return: r, env_steps, wallclock: start.elapsed().as_secs_f64() };
        on_point(&point, &info);
        curve.push(point);
    }
    Ok(ArsResult { best, best_return, last: policy, curve })
}

/// Trains a policy of representation `repr` on a task from scratch.
pub fn train_es(
    repr: &dyn Representation,
    task: Arc<dyn Task>,
    cfg: &ArsConfig,
    env: &EnvConfig,
    on_point: &mut dyn FnMut(&CurvePoint, &IterationInfo),
) -> Result<ArsResult> {
    if env.stage != Stage::Ars {
        return Err(Error::config("random search trains on the ARS-stage environment"));
    }
    let evaluator = EnvEvaluator::new(env.clone(), task)?;
    let eval = evaluator.noise_free();
    let init = EsPolicy::new(repr, env.obs_dim(), NUM_JOINTS, derive_seed(cfg.seed, "ars-init", 0));
    train_from(init, cfg, &evaluator, &eval, on_point)
}

/// Linear-policy training.
pub fn train_ars(task: Arc<dyn Task>, cfg: &ArsConfig, env: &EnvConfig) -> Result<ArsResult> {
    train_es(&Linear, task, cfg, env, &mut |_, _| {})
}

/// Trains each representation under the same seed and budget.
pub fn compare_representations(
    task: Arc<dyn Task>,
    reprs: &[&str],
    cfg: &ArsConfig,
    env: &EnvConfig,
) -> Result<Vec<(String, Vec<CurvePoint>)>> {
    let mut out = Vec::with_capacity(reprs.len());
    for name in reprs {
        let repr = representation_by_name(name)?;
        let res = train_es(repr.as_ref(), task.clone(), cfg, env, &mut |_, _| {})?;
        out.push((name.to_string(), res.curve));
    }
    Ok(out)
}

pub fn write_curve_csv<W: Write>(out: W, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "eval_return", "env_steps"]).map_err(csv_io)?;
    for p in curve {
        w.write_record([p.iteration.to_string(), p.eval_return.to_string(), p.env_steps.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing_csv<W: Write>(out: W, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "wallclock"]).map_err(csv_io)?;
    for p in curve {
        w.write_record([p.iteration.to_string(), format!("{:.3}", p.wallclock)]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// One `iteration` column, then an `eval_return` and `env_steps` column per
/// representation. Repeated names get a `#n` suffix.
pub fn write_comparison_csv<W: Write>(out: W, curves: &[(String, Vec<CurvePoint>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["iteration".to_string()];
    let mut seen: Vec<&str> = Vec::new();
    for (name, _) in curves {
        let n = seen.iter().filter(|s| **s == name.as_str()).count();
        seen.push(name);
        let label = if n == 0 { name.clone() } else { format!("{name}#{}", n + 1) };
        head.push(format!("{label}.eval_return"));
        head.push(format!("{label}.env_steps"));
    }
    w.write_record(&head).map_err(csv_io)?;
    let rows = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    for i in 0..rows {
        let mut rec = vec![(i + 1).to_string()];
        for (_, c) in curves {
            match c.get(i) {
                Some(p) => {
                    rec.push(p.eval_return.to_string());
                    rec.push(p.env_steps.to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
