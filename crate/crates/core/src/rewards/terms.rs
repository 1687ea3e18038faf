use super::{
    entropy, norm, normalize_clip, BackflipConfig, DenseConfig, EpisodeStats, ImitationConfig, JfStage1, JfStage2,
    JipStage1, JipStage2, PronkConfig, StepSignals,
};

/// Stage-1 sparse reward for jumping in place, scored at termination.
pub fn jip_stage1(stats: &EpisodeStats, cfg: &JipStage1) -> f64 {
    let h_n = normalize_clip(stats.max_height, cfg.h_f);
    // The in-place distance term penalizes travel in either direction.
    let d_n = normalize_clip(stats.distance.abs(), cfg.d_f);
    let r_end = (cfg.theta.eval(stats.max_pitch) + cfg.d.eval(d_n) + cfg.c_h) * h_n;
    let bonus = if stats.early_termination { -(cfg.q + cfg.m * h_n) } else { cfg.b * h_n };
    r_end + bonus
}

/// Stage-1 sparse reward for jumping forward.
pub fn jf_stage1(stats: &EpisodeStats, cfg: &JfStage1) -> f64 {
    let h_n = normalize_clip(stats.max_height, cfg.h_f);
    let d_n = normalize_clip(stats.distance, cfg.d_f);
    let r_end = (cfg.theta.eval(stats.max_pitch) + cfg.c_d * d_n + cfg.c_h) * h_n;
    let bonus = if stats.early_termination { -(cfg.q + cfg.m * (h_n + d_n)) } else { cfg.b * (h_n + d_n) };
    r_end + bonus
}

/// The per-step terms of the dense reward, kept apart for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DenseTerms {
    pub r_h: f64,
    pub r_c: f64,
    pub r_d: f64,
    pub r_s: f64,
    pub r_theta: f64,
}

impl DenseTerms {
    pub fn total(&self) -> f64 {
        self.r_h + self.r_c + self.r_d + self.r_s + self.r_theta
    }
}

fn height_term(h: f64, a_h: f64, h_min: f64, h_max: f64) -> f64 {
    if (h_min..=h_max).contains(&h) {
        a_h * h
    } else {
        0.0
    }
}

fn contact_term(f_avg: f64, a_c: f64, f_min: f64) -> f64 {
    if f_avg >= f_min {
        -a_c * f_avg
    } else {
        0.0
    }
}

fn dense_common(sig: &StepSignals, cfg: &DenseConfig) -> DenseTerms {
    DenseTerms {
        r_h: height_term(sig.h, cfg.a_h, cfg.h_min, cfg.h_max),
        r_c: contact_term(sig.f_avg, cfg.a_c, cfg.f_min),
        r_d: cfg.d.eval(sig.d),
        r_s: cfg.s.eval(norm(&sig.dtau)),
        r_theta: cfg.theta.eval(sig.theta),
    }
}

pub fn jip_stage2_step(sig: &StepSignals, cfg: &JipStage2) -> DenseTerms {
    dense_common(sig, cfg)
}

pub fn jip_stage2_bonus(stats: &EpisodeStats, cfg: &JipStage2) -> f64 {
    if stats.early_termination {
        -cfg.m * stats.max_height
    } else {
        0.0
    }
}

pub fn jf_stage2_step(sig: &StepSignals, cfg: &JfStage2) -> DenseTerms {
    DenseTerms {
        r_h: height_term(sig.h, cfg.a_h, cfg.h_min, cfg.h_max),
        r_c: contact_term(sig.f_avg, cfg.a_c, cfg.f_min),
        r_d: cfg.k_d * sig.d,
        r_s: cfg.s.eval(norm(&sig.dtau)),
        r_theta: cfg.theta.eval(sig.theta),
    }
}

pub fn jf_stage2_bonus(stats: &EpisodeStats, cfg: &JfStage2) -> f64 {
    if stats.early_termination {
        0.0
    } else {
        cfg.b * (stats.max_height + stats.distance)
    }
}

/// `w_a exp(-w_b |a - a_ars|^2)`.
pub fn imitation_reward(a: &[f64], a_ars: &[f64], cfg: &ImitationConfig) -> f64 {
    debug_assert_eq!(a.len(), a_ars.len());
    let d2: f64 = a.iter().zip(a_ars).map(|(x, y)| (x - y) * (x - y)).sum();
    cfg.w_a * (-cfg.w_b * d2).exp()
}

/// p_sj for every recorded jump.
pub fn pronk_performance(stats: &EpisodeStats, cfg: &PronkConfig) -> Vec<f64> {
    stats
        .jumps
        .iter()
        .map(|j| cfg.w_h * normalize_clip(j.height, cfg.h_max) + cfg.w_d * normalize_clip(j.distance, cfg.d_max))
        .collect()
}

fn mean(p: &[f64]) -> f64 {
    if p.is_empty() {
        0.0
    } else {
        p.iter().sum::<f64>() / p.len() as f64
    }
}

pub fn pronk_stage1(stats: &EpisodeStats, cfg: &PronkConfig) -> f64 {
    let p = pronk_performance(stats, cfg);
    let p_avg = mean(&p);
    let p_max = p.iter().copied().fold(0.0, f64::max);
    let c_j = p.iter().filter(|v| **v > cfg.threshold).count() as f64;
    let r_avg =
        p_avg * (cfg.theta.eval(stats.max_pitch) + cfg.w_t * stats.end_time_fraction + cfg.w_s * entropy(&p) + cfg.k);
    let bonus = if stats.early_termination { 0.0 } else { cfg.b };
    cfg.w_avg * r_avg + cfg.w_max * p_max + cfg.w_c * c_j + bonus
}

/// `(r_p, r_j)`: energy reward and jump reward over the jumps so far. The
/// jump reward is zero when the latest jump is below the threshold.
pub fn pronk_stage2_terms(stats: &EpisodeStats, cfg: &PronkConfig) -> (f64, f64) {
    let r_p = cfg.energy.eval(stats.energy);
    let p = pronk_performance(stats, cfg);
    let w_j = match p.last() {
        Some(&last) if last > cfg.threshold => cfg.w_j,
        _ => 0.0,
    };
    let r_j = w_j * mean(&p) * (cfg.entropy.eval(entropy(&p)) + cfg.l_j);
    (r_p, r_j)
}

/// Jump reward alone, paid at the step a jump completes.
pub fn pronk_jump_reward(stats: &EpisodeStats, cfg: &PronkConfig) -> f64 {
    pronk_stage2_terms(stats, cfg).1
}

pub fn pronk_stage2_step(sig: &StepSignals, cfg: &PronkConfig) -> DenseTerms {
    dense_common(sig, &cfg.dense)
}

fn theta_n(stats: &EpisodeStats, cfg: &BackflipConfig) -> f64 {
    normalize_clip(stats.max_pitch, cfg.theta_max)
}

pub fn backflip_stage1(stats: &EpisodeStats, cfg: &BackflipConfig) -> f64 {
    let t = theta_n(stats, cfg);
    let h = stats.max_height;
    let bonus = if stats.early_termination { 0.0 } else { cfg.b };
    cfg.w_h * h + cfg.w_theta * t + cfg.w_h_theta * h * t + bonus
}

/// Dense back-flip terms: no distance term.
pub fn backflip_stage2_step(sig: &StepSignals, cfg: &BackflipConfig) -> DenseTerms {
    DenseTerms { r_d: 0.0, ..dense_common(sig, &cfg.dense) }
}

pub fn backflip_stage2_bonus(stats: &EpisodeStats, cfg: &BackflipConfig) -> f64 {
    if stats.early_termination {
        0.0
    } else {
        cfg.w_bonus * stats.max_height * theta_n(stats, cfg)
    }
}
