//! Clipped-surrogate PPO on the squashed Gaussian network policy, plus the
//! imitation warm start from a random-search teacher.

mod gae;
mod policy;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

pub use gae::gae_advantages;
pub use policy::{gaussian_log_prob, squash_log_det, MlpPolicy, Sample, LOG_STD_MAX, LOG_STD_MIN};

use crate::ars::{CurvePoint, EsPolicy, RunningStat};
use crate::env::{Env, EnvConfig, Stage, Step};
use crate::error::{Error, Result};
use crate::rewards::{imitation_reward, ImitationConfig};
use crate::seeds::{derive_seed, rng_for};
use crate::task::Task;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub clip_range: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Weight of the squared error to teacher actions, for batches that
    /// carry them.
    pub imitation_coef: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Divide training rewards by a running std of the discounted return.
    pub normalize_reward: bool,
    pub total_timesteps: u64,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 2e-4,
            batch_size: 4096,
            gamma: 0.999,
            clip_range: 0.1,
            gae_lambda: 0.95,
            epochs: 10,
            minibatch_size: 512,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            imitation_coef: 0.0,
            hidden: vec![64, 64],
            init_log_std: -1.8,
            normalize_reward: true,
            total_timesteps: 1_000_000,
            eval_episodes: 3,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("ppo: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.clip_range > 0.0 && self.clip_range < 1.0) {
            return bad("clip range must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.minibatch_size == 0 || self.minibatch_size > self.batch_size {
            return bad("need 0 < minibatch size <= batch size");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 || self.imitation_coef < 0.0 || !(self.max_grad_norm > 0.0) {
            return bad("coefficients must be non-negative and the gradient clip positive");
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.init_log_std) {
            return bad("initial log-std outside [-5, 2]");
        }
        Ok(())
    }

    pub fn updates(&self) -> usize {
        (self.total_timesteps / self.batch_size as u64) as usize
    }
}

/// Time-aligned transitions from one collection pass.
#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub obs_dim: usize,
    pub act_dim: usize,
    /// `len × obs_dim`.
    pub obs: Vec<f64>,
    /// Squashed actions sent to the environment, `len × act_dim`.
    pub actions: Vec<f64>,
    /// Pre-squash draws, `len × act_dim`.
    pub pre_squash: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub last_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Teacher actions, `len × act_dim`, or empty.
    pub targets: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) {
        let (a, r) = gae_advantages(&self.rewards, &self.values, &self.dones, self.last_value, gamma, lambda);
        self.advantages = a;
        self.returns = r;
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let ok = self.obs.len() == n * self.obs_dim
            && self.actions.len() == n * self.act_dim
            && self.pre_squash.len() == n * self.act_dim
            && self.log_probs.len() == n
            && self.values.len() == n
            && self.dones.len() == n
            && self.advantages.len() == n
            && self.returns.len() == n
            && (self.targets.is_empty() || self.targets.len() == n * self.act_dim);
        if !ok {
            return Err(Error::config("rollout batch fields are not time-aligned"));
        }
        if self.advantages.iter().chain(&self.returns).any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged("non-finite advantages".into()));
        }
        Ok(())
    }
}

/// Zero mean, unit standard deviation.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    if adv.is_empty() {
        return Vec::new();
    }
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// Samples a loss is evaluated on.
#[derive(Debug, Clone, Default)]
pub struct Minibatch {
    pub obs: Vec<f64>,
    pub pre_squash: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Teacher actions, or empty.
    pub targets: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }

    /// Gathers `idx` from `batch` using the given (already normalized)
    /// advantages.
    pub fn gather(batch: &RolloutBatch, advantages: &[f64], idx: &[usize]) -> Self {
        let (od, ad) = (batch.obs_dim, batch.act_dim);
        let mut mb = Minibatch::default();
        for &i in idx {
            mb.obs.extend_from_slice(&batch.obs[i * od..(i + 1) * od]);
            mb.pre_squash.extend_from_slice(&batch.pre_squash[i * ad..(i + 1) * ad]);
            mb.old_log_probs.push(batch.log_probs[i]);
            mb.advantages.push(advantages[i]);
            mb.returns.push(batch.returns[i]);
            if !batch.targets.is_empty() {
                mb.targets.extend_from_slice(&batch.targets[i * ad..(i + 1) * ad]);
            }
        }
        mb
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossTerms {
    /// Negated clipped surrogate.
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Mean squared distance of the squashed mean action to the targets.
    pub imitation: f64,
    pub total: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Loss and its exact gradient over [`MlpPolicy::flat_params`]:
/// `-E[min(ρA, clip(ρ)A)] + c_v E[(V - R)²] - c_e H + c_i E[‖tanh μ - a*‖²]`,
/// the last term only when the minibatch has targets.
pub fn loss_and_grad(policy: &MlpPolicy, mb: &Minibatch, cfg: &PpoConfig) -> Result<(LossTerms, Vec<f64>)> {
    let n = mb.len();
    if n == 0 {
        return Err(Error::config("empty minibatch"));
    }
    let (od, ad) = (policy.obs_dim(), policy.act_dim());
    let mut x = Vec::with_capacity(n * od);
    for i in 0..n {
        x.extend(policy.normalize(&mb.obs[i * od..(i + 1) * od])?);
    }
    let pi_tape = policy.pi.forward_batch(&policy.pi_params, &x, n);
    let vf_tape = policy.vf.forward_batch(&policy.vf_params, &x, n);
    let means = pi_tape.output();
    let values = vf_tape.output();

    let inv_var: Vec<f64> = policy.log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    let mut g_mean = vec![0.0; n * ad];
    let mut g_log_std = vec![0.0; ad];
    let mut g_value = vec![0.0; n];
    let mut terms = LossTerms::default();
    let inv_n = 1.0 / n as f64;
    let (lo, hi) = (1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
    for i in 0..n {
        let u = &mb.pre_squash[i * ad..(i + 1) * ad];
        let mu = &means[i * ad..(i + 1) * ad];
        let log_ratio = gaussian_log_prob(u, mu, &policy.log_std) - mb.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = mb.advantages[i];
        let surr = (ratio * adv).min(ratio.clamp(lo, hi) * adv);
        terms.policy -= surr * inv_n;
        if !(lo..=hi).contains(&ratio) {
            terms.clip_fraction += inv_n;
        }
        terms.approx_kl += (ratio - 1.0 - log_ratio) * inv_n;
        // The unclipped branch carries the gradient unless the clip binds.
        let clipped = (adv >= 0.0 && ratio > hi) || (adv < 0.0 && ratio < lo);
        if !clipped {
            let g_lp = -adv * ratio * inv_n;
            for j in 0..ad {
                let d = u[j] - mu[j];
                g_mean[i * ad + j] = g_lp * d * inv_var[j];
                g_log_std[j] += g_lp * (d * d * inv_var[j] - 1.0);
            }
        }
        if !mb.targets.is_empty() {
            let target = &mb.targets[i * ad..(i + 1) * ad];
            for j in 0..ad {
                let t = mu[j].tanh();
                let e = t - target[j];
                terms.imitation += e * e * inv_n;
                g_mean[i * ad + j] += 2.0 * cfg.imitation_coef * e * (1.0 - t * t) * inv_n;
            }
        }
        let err = values[i] - mb.returns[i];
        terms.value += cfg.value_coef * err * err * inv_n;
        g_value[i] = 2.0 * cfg.value_coef * err * inv_n;
    }
    terms.entropy = policy.log_std.iter().map(|s| s + 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln())).sum();
    for g in &mut g_log_std {
        *g -= cfg.entropy_coef;
    }
    terms.total = terms.policy + terms.value - cfg.entropy_coef * terms.entropy + cfg.imitation_coef * terms.imitation;
    if !terms.total.is_finite() {
        return Err(Error::TrainingDiverged(format!("non-finite loss {terms:?}")));
    }

    let np = policy.pi_params.len();
    let mut grad = vec![0.0; policy.num_params()];
    policy.pi.backward(&policy.pi_params, &pi_tape, &g_mean, &mut grad[..np]);
    grad[np..np + ad].copy_from_slice(&g_log_std);
    policy.vf.backward(&policy.vf_params, &vf_tape, &g_value, &mut grad[np + ad..]);
    Ok((terms, grad))
}

/// Adam with the usual defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Descends along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Scales `grad` so its norm is at most `max`; returns the original norm.
pub fn clip_grad_norm(grad: &mut [f64], max: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max {
        let s = max / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

/// Averages over every minibatch step of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
}

/// One PPO update: `epochs` shuffled passes of minibatch Adam steps. On a
/// non-finite loss the inputs are left untouched and the error names the
/// epoch and minibatch.
pub fn ppo_update(
    policy: &MlpPolicy,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    adam: &mut Adam,
    rng: &mut impl Rng,
) -> Result<(MlpPolicy, UpdateDiagnostics)> {
    if batch.len() != cfg.batch_size {
        return Err(Error::config(format!("batch has {} samples, expected {}", batch.len(), cfg.batch_size)));
    }
    batch.validate()?;
    let adv = normalize_advantages(&batch.advantages);
    let mut p = policy.clone();
    let mut opt = adam.clone();
    let mut flat = p.flat_params();
    let mut idx: Vec<usize> = (0..batch.len()).collect();
    let mut diag = UpdateDiagnostics::default();
    let mut steps = 0usize;
    for epoch in 0..cfg.epochs {
        idx.shuffle(rng);
        for (k, chunk) in idx.chunks(cfg.minibatch_size).enumerate() {
            let mb = Minibatch::gather(batch, &adv, chunk);
            let (terms, mut grad) = loss_and_grad(&p, &mb, cfg).map_err(|e| match e {
                Error::TrainingDiverged(m) => Error::TrainingDiverged(format!("epoch {epoch} minibatch {k}: {m}")),
                e => e,
            })?;
            let norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            if !norm.is_finite() {
                return Err(Error::TrainingDiverged(format!("epoch {epoch} minibatch {k}: non-finite gradient")));
            }
            opt.step(&mut flat, &grad);
            p.set_flat_params(&flat);
            flat = p.flat_params();
            diag.policy_loss += terms.policy;
            diag.value_loss += terms.value;
            diag.entropy += terms.entropy;
            diag.clip_fraction += terms.clip_fraction;
            diag.approx_kl += terms.approx_kl;
            diag.grad_norm += norm;
            steps += 1;
        }
    }
    let s = 1.0 / steps as f64;
    diag.policy_loss *= s;
    diag.value_loss *= s;
    diag.entropy *= s;
    diag.clip_fraction *= s;
    diag.approx_kl *= s;
    diag.grad_norm *= s;
    if !p.is_finite() {
        return Err(Error::TrainingDiverged("non-finite parameters after update".into()));
    }
    *adam = opt;
    Ok((p, diag))
}

/// Reward for one transition given the observation it was taken from, the
/// squashed action and the environment's step result.
pub type RewardFn<'a> = dyn FnMut(&[f64], &[f64], &Step) -> Result<f64> + 'a;

/// Steps one environment continuously, resetting it at episode ends so that
/// batches need not align with episodes.
pub struct Collector {
    env: Env,
    obs: Vec<f64>,
    seed: u64,
    episodes: u64,
    steps: u64,
    /// Running discounted return and its statistics, for reward scaling.
    ret: f64,
    ret_stat: RunningStat,
    pub normalize_reward: bool,
    /// Labels every collected observation with this policy's action.
    pub teacher: Option<EsPolicy>,
}

/// Scaled rewards are clipped to this magnitude.
pub const REWARD_CLIP: f64 = 10.0;

impl Collector {
    pub fn new(mut env: Env, seed: u64) -> Result<Self> {
        let obs = env.reset(derive_seed(seed, "ppo-episode", 0))?;
        Ok(Collector { env, obs, seed, episodes: 0, steps: 0, ret: 0.0, ret_stat: RunningStat::new(1), normalize_reward: false, teacher: None })
    }

    pub fn env_steps(&self) -> u64 {
        self.steps
    }

    pub fn collect(
        &mut self,
        policy: &MlpPolicy,
        n: usize,
        gamma: f64,
        lambda: f64,
        rng: &mut impl Rng,
        reward: &mut RewardFn,
    ) -> Result<RolloutBatch> {
        let (od, ad) = (policy.obs_dim(), policy.act_dim());
        if self.obs.len() != od {
            return Err(Error::Dimension { what: "observation", expected: od, got: self.obs.len() });
        }
        let mut b = RolloutBatch { obs_dim: od, act_dim: ad, ..Default::default() };
        for _ in 0..n {
            let s = policy.sample(&self.obs, rng)?;
            let step = self.env.step(&s.action)?;
            let mut r = reward(&self.obs, &s.action, &step)?;
            if self.normalize_reward {
                self.ret = self.ret * gamma + r;
                self.ret_stat.push(&[self.ret]);
                let std = if self.ret_stat.count < 2.0 { 1.0 } else { self.ret_stat.variance()[0].sqrt() };
                r = (r / (std + 1e-8)).clamp(-REWARD_CLIP, REWARD_CLIP);
            }
            self.steps += 1;
            if let Some(t) = &self.teacher {
                b.targets.extend(t.act(&self.obs[..t.obs_dim()])?);
            }
            b.obs.extend_from_slice(&self.obs);
            b.actions.extend_from_slice(&s.action);
            b.pre_squash.extend_from_slice(&s.u);
            b.log_probs.push(s.log_prob);
            b.values.push(s.value);
            b.rewards.push(r);
            let done = step.termination.terminated;
            b.dones.push(done);
            if done {
                self.ret = 0.0;
                self.episodes += 1;
                self.obs = self.env.reset(derive_seed(self.seed, "ppo-episode", self.episodes))?;
            } else {
                self.obs = step.obs;
            }
        }
        b.last_value = policy.value(&self.obs)?;
        b.compute_advantages(gamma, lambda);
        Ok(b)
    }
}

/// Evaluation of a policy on fixed episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub ret: f64,
    /// Mean per-step imitation error, when a teacher is involved.
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateLog {
    pub update: usize,
    pub env_steps: u64,
    pub eval_return: f64,
    pub action_deviation: Option<f64>,
    /// Mean per-step reward of the batch the update was computed from.
    pub batch_reward: f64,
    pub diagnostics: UpdateDiagnostics,
    pub wallclock: f64,
}

#[derive(Debug, Clone)]
pub struct PpoRun {
    pub last: MlpPolicy,
    /// Highest evaluation return seen, the starting policy included.
    pub best: MlpPolicy,
    pub best_return: f64,
    /// Row 0 evaluates the starting policy.
    pub log: Vec<UpdateLog>,
}

impl PpoRun {
    pub fn curve(&self) -> Vec<CurvePoint> {
        self.log
            .iter()
            .map(|l| CurvePoint { iteration: l.update, eval_return: l.eval_return, env_steps: l.env_steps as usize, wallclock: l.wallclock })
            .collect()
    }
}

/// Generic PPO loop. `stop` is checked after every evaluation, the initial
/// one included.
pub fn train_ppo(
    initial: MlpPolicy,
    cfg: &PpoConfig,
    collector: &mut Collector,
    reward: &mut RewardFn,
    evaluate: &mut dyn FnMut(&MlpPolicy) -> Result<Evaluation>,
    stop: &mut dyn FnMut(&Evaluation) -> bool,
    on_update: &mut dyn FnMut(&UpdateLog),
) -> Result<PpoRun> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let mut rng = rng_for(cfg.seed, "ppo-sample", 0);
    let mut adam = Adam::new(initial.num_params(), cfg.learning_rate);
    let e = evaluate(&initial)?;
    let first = UpdateLog {
        update: 0,
        env_steps: 0,
        eval_return: e.ret,
        action_deviation: e.deviation,
        batch_reward: 0.0,
        diagnostics: UpdateDiagnostics::default(),
        wallclock: start.elapsed().as_secs_f64(),
    };
    on_update(&first);
    let mut run = PpoRun { best: initial.clone(), best_return: e.ret, last: initial, log: vec![first] };
    if stop(&e) {
        return Ok(run);
    }
    collector.normalize_reward = cfg.normalize_reward;
    let steps0 = collector.env_steps();
    for u in 1..=cfg.updates() {
        let batch = collector.collect(&run.last, cfg.batch_size, cfg.gamma, cfg.gae_lambda, &mut rng, reward)?;
        let mut shuffle = rng_for(cfg.seed, "ppo-shuffle", u as u64);
        let (p, diag) = ppo_update(&run.last, &batch, cfg, &mut adam, &mut shuffle)?;
        run.last = p;
        let e = evaluate(&run.last)?;
        let row = UpdateLog {
            update: u,
            env_steps: collector.env_steps() - steps0,
            eval_return: e.ret,
            action_deviation: e.deviation,
            batch_reward: batch.rewards.iter().sum::<f64>() / batch.len() as f64,
            diagnostics: diag,
            wallclock: start.elapsed().as_secs_f64(),
        };
        on_update(&row);
        run.log.push(row);
        if e.ret > run.best_return {
            run.best_return = e.ret;
            run.best = run.last.clone();
        }
        if stop(&e) {
            break;
        }
    }
    Ok(run)
}

/// Mean of per-episode returns for the deterministic policy, and the mean
/// per-step distance to `teacher` (queried without the flight flag) when
/// one is given. Per-step rewards come from `reward`.
pub fn evaluate_ppo(
    policy: &MlpPolicy,
    env: &mut Env,
    teacher: Option<&EsPolicy>,
    episodes: usize,
    seed: u64,
    reward: &mut RewardFn,
) -> Result<Evaluation> {
    let mut total = 0.0;
    let mut dev = 0.0;
    let mut steps = 0usize;
    for k in 0..episodes {
        let mut obs = env.reset(derive_seed(seed, "ppo-eval", k as u64))?;
        loop {
            let a = policy.deterministic_action(&obs)?;
            if let Some(t) = teacher {
                let at = t.act(&obs[..t.obs_dim()])?;
                dev += a.iter().zip(&at).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            }
            let step = env.step(&a)?;
            total += reward(&obs, &a, &step)?;
            steps += 1;
            if step.termination.terminated {
                break;
            }
            obs = step.obs;
        }
    }
    let episodes = episodes.max(1) as f64;
    Ok(Evaluation {
        ret: total / episodes,
        deviation: teacher.map(|_| dev / steps.max(1) as f64),
    })
}

/// Network policy for the PPO stage whose observation normalizer copies the
/// teacher's, with the flight flag left unscaled.
pub fn student_for(teacher: &EsPolicy, cfg: &PpoConfig) -> MlpPolicy {
    let mut rng = rng_for(cfg.seed, "ppo-init", 0);
    let obs = teacher.obs_dim() + 1;
    let mut p = MlpPolicy::new(obs, teacher.act_dim(), &cfg.hidden, cfg.init_log_std, &mut rng);
    let (mut mean, mut inv) = teacher.obs_stat.normalizer();
    mean.push(0.0);
    inv.push(1.0);
    p.set_normalizer(&mean, &inv).expect("sizes match");
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmStartConfig {
    pub imitation: ImitationConfig,
    /// Weight of the supervised term pulling the mean action onto the
    /// teacher's on every collected state.
    pub imitation_coef: f64,
    pub tolerance: f64,
    pub budget: u64,
    pub eval_episodes: usize,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        WarmStartConfig { imitation: ImitationConfig { w_a: 1.0, w_b: 5.0 }, imitation_coef: 1.0, tolerance: 0.1, budget: 1_000_000, eval_episodes: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct WarmStartResult {
    pub policy: MlpPolicy,
    pub deviation: f64,
    pub converged: bool,
    pub log: Vec<UpdateLog>,
}

fn ppo_env(env: &EnvConfig, task: &Arc<dyn Task>) -> Result<Env> {
    if env.stage != Stage::Ppo {
        return Err(Error::config("PPO training needs a PPO-stage environment"));
    }
    Env::new(env.clone(), task.clone())
}

/// PPO on the imitation reward, with the supervised imitation term added to
/// the loss, until the deterministic policy tracks the teacher within
/// `tolerance` or the budget runs out.
///
/// `teacher_env` is the ARS-stage setting the teacher was trained in. The
/// student runs in it unchanged (selector, filter, physics) apart from the
/// PPO-stage observation.
pub fn warm_start(
    policy: MlpPolicy,
    teacher: &EsPolicy,
    teacher_env: &EnvConfig,
    task: &Arc<dyn Task>,
    cfg: &PpoConfig,
    warm: &WarmStartConfig,
    on_update: &mut dyn FnMut(&UpdateLog),
) -> Result<WarmStartResult> {
    let env = &EnvConfig { stage: Stage::Ppo, ..teacher_env.clone() };
    let mut train_env = ppo_env(env, task)?;
    if teacher.obs_dim() + 1 != train_env.config().obs_dim() || teacher.act_dim() != policy.act_dim() {
        return Err(Error::config(format!(
            "teacher maps {} observations to {} actions; the student sees {} and emits {}",
            teacher.obs_dim(),
            teacher.act_dim(),
            train_env.config().obs_dim(),
            policy.act_dim()
        )));
    }
    if policy.obs_dim() != train_env.config().obs_dim() {
        return Err(Error::Dimension { what: "observation", expected: train_env.config().obs_dim(), got: policy.obs_dim() });
    }
    train_env.set_recording(false);
    let mut eval_env = ppo_env(env, task)?;
    eval_env.set_recording(false);
    let im = &warm.imitation;
    let tdim = teacher.obs_dim();
    let mut reward = |obs: &[f64], a: &[f64], _: &Step| -> Result<f64> {
        Ok(imitation_reward(a, &teacher.act(&obs[..tdim])?, im))
    };
    let mut eval_reward = |obs: &[f64], a: &[f64], _: &Step| -> Result<f64> {
        Ok(imitation_reward(a, &teacher.act(&obs[..tdim])?, im))
    };
    let seed = cfg.seed;
    let episodes = warm.eval_episodes;
    let mut evaluate = |p: &MlpPolicy| evaluate_ppo(p, &mut eval_env, Some(teacher), episodes, seed, &mut eval_reward);
    let tol = warm.tolerance;
    let mut stop = |e: &Evaluation| e.deviation.is_some_and(|d| d < tol);
    let cfg = PpoConfig { total_timesteps: warm.budget, imitation_coef: warm.imitation_coef, ..cfg.clone() };
    let mut collector = Collector::new(train_env, derive_seed(seed, "warm-start", 0))?;
    collector.teacher = Some(teacher.clone());
    let run = train_ppo(policy, &cfg, &mut collector, &mut reward, &mut evaluate, &mut stop, on_update)?;
    let deviation = run.log.last().and_then(|l| l.action_deviation).unwrap_or(f64::INFINITY);
    Ok(WarmStartResult { policy: run.last, deviation, converged: deviation < tol, log: run.log })
}

/// PPO on the environment's dense reward.
pub fn refine(
    policy: MlpPolicy,
    env: &EnvConfig,
    task: &Arc<dyn Task>,
    cfg: &PpoConfig,
    on_update: &mut dyn FnMut(&UpdateLog),
) -> Result<PpoRun> {
    let mut train_env = ppo_env(env, task)?;
    train_env.set_recording(false);
    if policy.obs_dim() != train_env.config().obs_dim() {
        return Err(Error::Dimension { what: "observation", expected: train_env.config().obs_dim(), got: policy.obs_dim() });
    }
    let mut eval_env = ppo_env(env, task)?;
    eval_env.set_recording(false);
    let mut reward = |_: &[f64], _: &[f64], s: &Step| -> Result<f64> { Ok(s.reward) };
    let mut eval_reward = |_: &[f64], _: &[f64], s: &Step| -> Result<f64> { Ok(s.reward) };
    let (seed, episodes) = (cfg.seed, cfg.eval_episodes);
    let mut evaluate = |p: &MlpPolicy| evaluate_ppo(p, &mut eval_env, None, episodes, seed, &mut eval_reward);
    let mut collector = Collector::new(train_env, derive_seed(seed, "refine", 0))?;
    train_ppo(policy, cfg, &mut collector, &mut reward, &mut evaluate, &mut |_| false, on_update)
}

/// `update,env_steps,eval_return,action_deviation,batch_reward,clip_fraction,approx_kl,policy_loss,value_loss,entropy,grad_norm`.
pub fn write_log_csv<W: Write>(out: W, log: &[UpdateLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "update",
        "env_steps",
        "eval_return",
        "action_deviation",
        "batch_reward",
        "clip_fraction",
        "approx_kl",
        "policy_loss",
        "value_loss",
        "entropy",
        "grad_norm",
    ])
    .map_err(csv_err)?;
    for l in log {
        let d = &l.diagnostics;
        w.write_record([
            l.update.to_string(),
            l.env_steps.to_string(),
            l.eval_return.to_string(),
            l.action_deviation.map(|v| v.to_string()).unwrap_or_default(),
            l.batch_reward.to_string(),
            d.clip_fraction.to_string(),
            d.approx_kl.to_string(),
            d.policy_loss.to_string(),
            d.value_loss.to_string(),
            d.entropy.to_string(),
            d.grad_norm.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn save_log_csv(log: &[UpdateLog], path: &Path) -> Result<()> {
    write_log_csv(std::fs::File::create(path)?, log)
}

#[cfg(test)]
mod tests;
