use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::env::RobotVariant;
use crate::task::task_by_name;

fn small_cfg() -> PpoConfig {
    PpoConfig { batch_size: 256, minibatch_size: 64, hidden: vec![8, 8], ..PpoConfig::default() }
}

/// Minibatch drawn from `policy` on random observations, with random
/// advantages and returns.
fn random_minibatch(policy: &MlpPolicy, n: usize, rng: &mut ChaCha8Rng) -> Minibatch {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut mb = Minibatch::default();
    for _ in 0..n {
        let obs: Vec<f64> = (0..policy.obs_dim()).map(|_| normal.sample(rng)).collect();
        let s = policy.sample(&obs, rng).unwrap();
        mb.obs.extend(obs);
        mb.pre_squash.extend(s.u);
        mb.old_log_probs.push(s.log_prob);
        mb.advantages.push(normal.sample(rng));
        mb.returns.push(normal.sample(rng));
    }
    mb
}

fn perturbed(policy: &MlpPolicy, scale: f64, rng: &mut ChaCha8Rng) -> MlpPolicy {
    let normal = Normal::new(0.0, scale).unwrap();
    let mut p = policy.clone();
    let flat: Vec<f64> = p.flat_params().iter().map(|v| v + normal.sample(rng)).collect();
    p.set_flat_params(&flat);
    p
}

fn ratios(policy: &MlpPolicy, mb: &Minibatch) -> Vec<f64> {
    let (od, ad) = (policy.obs_dim(), policy.act_dim());
    (0..mb.len())
        .map(|i| {
            let (mu, ls, _) = policy.forward(&mb.obs[i * od..(i + 1) * od]).unwrap();
            (gaussian_log_prob(&mb.pre_squash[i * ad..(i + 1) * ad], &mu, &ls) - mb.old_log_probs[i]).exp()
        })
        .collect()
}

#[test]
fn gradient_matches_finite_differences() {
    let cfg = PpoConfig { entropy_coef: 0.01, imitation_coef: 0.7, ..small_cfg() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut done = 0;
    while done < 20 {
        let base = MlpPolicy::new(3, 2, &[5, 4], -0.5, &mut rng);
        let mut mb = random_minibatch(&base, 8, &mut rng);
        // Half the repetitions exercise the imitation term too.
        if done % 2 == 0 {
            mb.targets = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        }
        let p = perturbed(&base, 0.05, &mut rng);
        // Keep every ratio away from the clip kinks.
        if ratios(&p, &mb).iter().any(|r| (r - 0.9).abs() < 1e-3 || (r - 1.1).abs() < 1e-3) {
            continue;
        }
        done += 1;
        let (_, grad) = loss_and_grad(&p, &mb, &cfg).unwrap();
        let flat = p.flat_params();
        let h = 1e-5;
        for k in 0..flat.len() {
            let mut q = p.clone();
            let mut f = flat.clone();
            f[k] += h;
            q.set_flat_params(&f);
            let up = loss_and_grad(&q, &mb, &cfg).unwrap().0.total;
            f[k] -= 2.0 * h;
            q.set_flat_params(&f);
            let down = loss_and_grad(&q, &mb, &cfg).unwrap().0.total;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[k]).abs();
            assert!(err <= 1e-4 * fd.abs().max(grad[k].abs()) + 1e-9, "param {k}: fd {fd} analytic {}", grad[k]);
        }
    }
}

#[test]
fn zero_advantage_and_value_weight_gives_zero_gradient() {
    let cfg = PpoConfig { value_coef: 0.0, ..small_cfg() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = MlpPolicy::new(3, 2, &[5], -0.5, &mut rng);
    let mut mb = random_minibatch(&p, 16, &mut rng);
    mb.advantages.iter_mut().for_each(|a| *a = 0.0);
    let (terms, grad) = loss_and_grad(&perturbed(&p, 0.1, &mut rng), &mb, &cfg).unwrap();
    assert_eq!(terms.total, 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
}

#[test]
fn imitation_term_vanishes_on_matching_targets() {
    let cfg = PpoConfig { value_coef: 0.0, imitation_coef: 2.0, ..small_cfg() };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = MlpPolicy::new(3, 2, &[5], -0.5, &mut rng);
    let mut mb = random_minibatch(&p, 16, &mut rng);
    mb.advantages.iter_mut().for_each(|a| *a = 0.0);
    for i in 0..16 {
        mb.targets.extend(p.deterministic_action(&mb.obs[i * 3..i * 3 + 3]).unwrap());
    }
    let (terms, grad) = loss_and_grad(&p, &mb, &cfg).unwrap();
    assert!(terms.imitation < 1e-24);
    assert!(grad.iter().all(|g| g.abs() < 1e-12));
    // Offset targets: mean squared distance 0.01 per component.
    mb.targets.iter_mut().for_each(|t| *t -= 0.1);
    let (terms, _) = loss_and_grad(&p, &mb, &cfg).unwrap();
    assert!((terms.imitation - 0.02).abs() < 1e-12);
    assert!((terms.total - 2.0 * 0.02).abs() < 1e-12);
}

#[test]
fn value_loss_does_not_touch_policy_parameters() {
    let cfg = small_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = MlpPolicy::new(3, 2, &[5], -0.5, &mut rng);
    let mut mb = random_minibatch(&p, 16, &mut rng);
    mb.advantages.iter_mut().for_each(|a| *a = 0.0);
    let (_, grad) = loss_and_grad(&p, &mb, &cfg).unwrap();
    let k = p.pi_params.len() + p.log_std.len();
    assert!(grad[..k].iter().all(|g| *g == 0.0));
    assert!(grad[k..].iter().any(|g| *g != 0.0));
}

#[test]
fn ratio_is_one_on_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let p = MlpPolicy::new(4, 3, &[6], -1.0, &mut rng);
    let mb = random_minibatch(&p, 32, &mut rng);
    for r in ratios(&p, &mb) {
        assert!((r - 1.0).abs() < 1e-12);
    }
    let (terms, _) = loss_and_grad(&p, &mb, &small_cfg()).unwrap();
    assert_eq!(terms.clip_fraction, 0.0);
    assert!(terms.approx_kl.abs() < 1e-12);
}

#[test]
fn clipped_branch_is_flat_in_ratio() {
    let cfg = PpoConfig { value_coef: 0.0, ..small_cfg() };
    let p = MlpPolicy::zeros(1, 1, &[2]);
    // u = 0 under N(0, 1): log-prob -0.5 ln 2π.
    let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
    for (ratio, adv, clipped) in [
        (1.5, 1.0, true),
        (3.0, 1.0, true),
        (0.5, -1.0, true),
        (0.2, -1.0, true),
        (1.5, -1.0, false),
        (0.5, 1.0, false),
        (1.05, 1.0, false),
    ] {
        let mb = Minibatch {
            obs: vec![0.0],
            pre_squash: vec![0.0],
            old_log_probs: vec![lp - f64::ln(ratio)],
            advantages: vec![adv],
            returns: vec![0.0],
            targets: vec![],
        };
        let (terms, grad) = loss_and_grad(&p, &mb, &cfg).unwrap();
        let want = -(ratio * adv).min(ratio.clamp(0.9, 1.1) * adv);
        assert!((terms.policy - want).abs() < 1e-12);
        let log_std_grad = grad[p.pi_params.len()];
        if clipped {
            assert_eq!(log_std_grad, 0.0, "ratio {ratio} adv {adv}");
        } else {
            // d/dlogσ of -ρA at u = μ is ρA.
            assert!((log_std_grad - ratio * adv).abs() < 1e-12, "ratio {ratio} adv {adv}");
        }
    }
}

fn synthetic_batch(p: &MlpPolicy, n: usize, rng: &mut ChaCha8Rng, adv_zero: bool) -> RolloutBatch {
    let mb = random_minibatch(p, n, rng);
    let mut b = RolloutBatch {
        obs_dim: p.obs_dim(),
        act_dim: p.act_dim(),
        obs: mb.obs,
        actions: mb.pre_squash.iter().map(|u| u.tanh()).collect(),
        pre_squash: mb.pre_squash,
        log_probs: mb.old_log_probs,
        rewards: mb.advantages.clone(),
        values: vec![0.0; n],
        dones: vec![true; n],
        last_value: 0.0,
        ..Default::default()
    };
    b.compute_advantages(0.99, 0.95);
    if adv_zero {
        b.advantages = vec![0.0; n];
    }
    b
}

#[test]
fn zero_advantages_leave_policy_head_unchanged() {
    let cfg = small_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = MlpPolicy::new(3, 2, &[8, 8], -1.0, &mut rng);
    let batch = synthetic_batch(&p, cfg.batch_size, &mut rng, true);
    let mut adam = Adam::new(p.num_params(), cfg.learning_rate);
    let (q, _) = ppo_update(&p, &batch, &cfg, &mut adam, &mut rng).unwrap();
    assert_eq!(q.pi_params, p.pi_params);
    assert_eq!(q.log_std, p.log_std);
    assert_ne!(q.vf_params, p.vf_params);
}

#[test]
fn update_is_seeded_and_checks_batch_size() {
    let cfg = small_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = MlpPolicy::new(3, 2, &[8, 8], -1.0, &mut rng);
    let batch = synthetic_batch(&p, cfg.batch_size, &mut rng, false);
    let run = || {
        let mut adam = Adam::new(p.num_params(), cfg.learning_rate);
        ppo_update(&p, &batch, &cfg, &mut adam, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    };
    let (a, da) = run();
    let (b, db) = run();
    assert_eq!(a, b);
    assert_eq!(da, db);
    assert_ne!(a, p);
    let short = synthetic_batch(&p, 10, &mut rng, false);
    let mut adam = Adam::new(p.num_params(), cfg.learning_rate);
    assert!(matches!(ppo_update(&p, &short, &cfg, &mut adam, &mut rng), Err(Error::Config(_))));
}

#[test]
fn non_finite_loss_aborts_without_changes() {
    let cfg = small_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = MlpPolicy::new(3, 2, &[8], -1.0, &mut rng);
    let mut batch = synthetic_batch(&p, cfg.batch_size, &mut rng, false);
    batch.returns[3] = f64::INFINITY;
    let mut adam = Adam::new(p.num_params(), cfg.learning_rate);
    let before = adam.clone();
    let err = ppo_update(&p, &batch, &cfg, &mut adam, &mut rng).unwrap_err();
    assert!(matches!(err, Error::TrainingDiverged(_)));
    assert_eq!(adam, before);
}

#[test]
fn bandit_mean_action_converges() {
    // One-step episodes with reward -(a - 0.5)²; the optimum is a = 0.5.
    let cfg = PpoConfig { batch_size: 256, minibatch_size: 64, ..PpoConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut p = MlpPolicy::new(1, 1, &[64, 64], cfg.init_log_std, &mut rng);
    let mut adam = Adam::new(p.num_params(), cfg.learning_rate);
    for _ in 0..200 {
        let mut b = RolloutBatch { obs_dim: 1, act_dim: 1, last_value: 0.0, ..Default::default() };
        for _ in 0..cfg.batch_size {
            let s = p.sample(&[1.0], &mut rng).unwrap();
            b.obs.push(1.0);
            b.rewards.push(-(s.action[0] - 0.5).powi(2));
            b.actions.extend(&s.action);
            b.pre_squash.extend(&s.u);
            b.log_probs.push(s.log_prob);
            b.values.push(s.value);
            b.dones.push(true);
        }
        b.compute_advantages(cfg.gamma, cfg.gae_lambda);
        p = ppo_update(&p, &b, &cfg, &mut adam, &mut rng).unwrap().0;
    }
    let a = p.deterministic_action(&[1.0]).unwrap()[0];
    assert!((a - 0.5).abs() < 0.05, "mean action {a}");
}

fn ppo_env_cfg() -> EnvConfig {
    EnvConfig::new(Stage::Ppo, RobotVariant::Soft)
}

fn ars_env_cfg() -> EnvConfig {
    EnvConfig::new(Stage::Ars, RobotVariant::Soft)
}

#[test]
fn refine_with_zero_budget_is_identity() {
    let task = task_by_name("jip").unwrap();
    let cfg = PpoConfig { total_timesteps: 0, eval_episodes: 1, ..PpoConfig::default() };
    let p = student_for(&EsPolicy::linear(15, 6), &cfg);
    let run = refine(p.clone(), &ppo_env_cfg(), &task, &cfg, &mut |_| {}).unwrap();
    assert_eq!(run.last, p);
    assert_eq!(run.best, p);
    assert_eq!(run.log.len(), 1);
    let mut buf = Vec::new();
    crate::ars::write_curve_csv(&mut buf, &run.curve()).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("iteration,eval_return,env_steps\n0,"));
}

#[test]
fn warm_start_already_imitating_stops_at_once() {
    let task = task_by_name("jip").unwrap();
    let cfg = PpoConfig::default();
    let teacher = EsPolicy::linear(15, 6);
    let snapshot = teacher.clone();
    let student = MlpPolicy::zeros(16, 6, &[64, 64]);
    let warm = WarmStartConfig { eval_episodes: 2, ..WarmStartConfig::default() };
    let out = warm_start(student.clone(), &teacher, &ars_env_cfg(), &task, &cfg, &warm, &mut |_| {}).unwrap();
    assert!(out.converged);
    assert_eq!(out.deviation, 0.0);
    assert_eq!(out.policy, student);
    // Mean imitation reward per step: the log stores per-episode sums.
    let steps = Env::new(ppo_env_cfg(), task.clone()).unwrap().max_steps() as f64;
    assert!(out.log[0].eval_return / steps >= 0.99 * warm.imitation.w_a);
    assert_eq!(teacher, snapshot);
}

#[test]
fn warm_start_rejects_mismatched_teacher() {
    let task = task_by_name("jip").unwrap();
    let cfg = PpoConfig::default();
    let student = MlpPolicy::zeros(16, 6, &[64, 64]);
    let err = warm_start(student.clone(), &EsPolicy::linear(16, 6), &ars_env_cfg(), &task, &cfg, &WarmStartConfig::default(), &mut |_| {})
        .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let err = warm_start(student, &EsPolicy::linear(15, 5), &ars_env_cfg(), &task, &cfg, &WarmStartConfig::default(), &mut |_| {})
        .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn collector_marks_episode_boundaries() {
    let task = task_by_name("jip").unwrap();
    let env = Env::new(ppo_env_cfg(), task).unwrap();
    let horizon = env.max_steps();
    let mut c = Collector::new(env, 3).unwrap();
    let p = MlpPolicy::zeros(16, 6, &[4]);
    let p = MlpPolicy { log_std: vec![LOG_STD_MIN; 6], ..p };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = c.collect(&p, horizon + 10, 0.99, 0.95, &mut rng, &mut |_, _, s| Ok(s.reward)).unwrap();
    b.validate().unwrap();
    assert_eq!(b.len(), horizon + 10);
    // The near-zero action stands still until the time limit.
    assert!(b.dones[horizon - 1]);
    assert_eq!(b.dones.iter().filter(|d| **d).count(), 1);
    assert_eq!(c.env_steps(), (horizon + 10) as u64);
    assert!(b.targets.is_empty());
}

#[test]
fn collector_labels_states_with_the_teacher() {
    let task = task_by_name("jip").unwrap();
    let mut c = Collector::new(Env::new(ppo_env_cfg(), task).unwrap(), 3).unwrap();
    let mut teacher = EsPolicy::linear(15, 6);
    teacher.params.iter_mut().enumerate().for_each(|(i, w)| *w = 0.01 * (i % 7) as f64 - 0.03);
    c.teacher = Some(teacher.clone());
    let p = MlpPolicy::zeros(16, 6, &[4]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = c.collect(&p, 20, 0.99, 0.95, &mut rng, &mut |_, _, s| Ok(s.reward)).unwrap();
    b.validate().unwrap();
    for i in 0..20 {
        assert_eq!(b.targets[i * 6..i * 6 + 6], teacher.act(&b.obs[i * 16..i * 16 + 15]).unwrap()[..]);
    }
}

#[test]
fn log_csv_header() {
    let log = vec![UpdateLog {
        update: 0,
        env_steps: 0,
        eval_return: 1.5,
        action_deviation: None,
        batch_reward: 0.25,
        diagnostics: UpdateDiagnostics::default(),
        wallclock: 0.0,
    }];
    let mut buf = Vec::new();
    write_log_csv(&mut buf, &log).unwrap();
    let s = String::from_utf8(buf).unwrap();
    let mut lines = s.lines();
    assert_eq!(
        lines.next().unwrap(),
        "update,env_steps,eval_return,action_deviation,batch_reward,clip_fraction,approx_kl,policy_loss,value_loss,entropy,grad_norm"
    );
    assert_eq!(lines.next().unwrap(), "0,0,1.5,,0.25,0,0,0,0,0,0");
}

#[test]
fn config_validation() {
    assert!(PpoConfig::default().validate().is_ok());
    for bad in [
        PpoConfig { clip_range: 1.0, ..PpoConfig::default() },
        PpoConfig { gamma: 0.0, ..PpoConfig::default() },
        PpoConfig { gae_lambda: 1.5, ..PpoConfig::default() },
        PpoConfig { minibatch_size: 5000, ..PpoConfig::default() },
    ] {
        assert!(bad.validate().is_err());
    }
    assert_eq!(PpoConfig::default().updates(), 244);
}
