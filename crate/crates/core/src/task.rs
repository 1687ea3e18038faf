//! Motion tasks. Each task picks its slice of [`RewardConfig`] and decides how
//! long an episode lasts and what counts as a success.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::Result;
use crate::registry::Registry;
use crate::rewards::{self, DenseTerms, EpisodeStats, RewardConfig, StepSignals};

pub trait Task: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Episode length in seconds.
    fn horizon(&self) -> f64 {
        2.5
    }

    /// Whether tilting past the threshold ends the episode.
    fn tilt_terminates(&self) -> bool {
        true
    }

    /// Whether the selector re-arms after landing.
    fn repeats(&self) -> bool {
        false
    }

    /// Stage-1 reward, scored once at the end of the episode.
    fn sparse_reward(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64;

    fn dense_step(&self, sig: &StepSignals, cfg: &RewardConfig) -> DenseTerms;

    /// Stage-2 reward paid at the last step.
    fn dense_bonus(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64;

    /// Stage-2 reward paid at the step a jump completes.
    fn jump_reward(&self, _stats: &EpisodeStats, _cfg: &RewardConfig) -> f64 {
        0.0
    }

    fn success(&self, stats: &EpisodeStats) -> bool {
        !stats.early_termination && stats.longest_flight > 0
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct JumpInPlace;

impl Task for JumpInPlace {
    fn name(&self) -> &'static str {
        "jip"
    }
    fn sparse_reward(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64 {
        rewards::jip_stage1(stats, &cfg.jip1)
    }
    fn dense_step(&self, sig: &StepSignals, cfg: &RewardConfig) -> DenseTerms {
        rewards::jip_stage2_step(sig, &cfg.jip2)
    }
    fn dense_bonus(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64 {
        rewards::jip_stage2_bonus(stats, &cfg.jip2)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct JumpForward;

impl Task for JumpForward {
    fn name(&self) -> &'static str {
        "jf"
    }
    fn sparse_reward(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64 {
        rewards::jf_stage1(stats, &cfg.jf1)
    }
    fn dense_step(&self, sig: &StepSignals, cfg: &RewardConfig) -> DenseTerms {
        rewards::jf_stage2_step(sig, &cfg.jf2)
    }
    fn dense_bonus(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64 {
        rewards::jf_stage2_bonus(stats, &cfg.jf2)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Pronk;

impl Task for Pronk {
    fn name(&self) -> &'static str {
        "pronk"
    }
    fn horizon(&self) -> f64 {
        10.0
    }
    fn repeats(&self) -> bool {
        true
    }
    fn sparse_reward(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64 {
        rewards::pronk_stage1(stats, &cfg.pronk)
    }
    fn dense_step(&self, sig: &StepSignals, cfg: &RewardConfig) -> DenseTerms {
        rewards::pronk_stage2_step(sig, &cfg.pronk)
    }
    fn dense_bonus(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64 {
        let (r_p, _) = rewards::pronk_stage2_terms(stats, &cfg.pronk);
        r_p + rewards::jip_stage2_bonus(stats, &cfg.pronk.dense)
    }
    fn jump_reward(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64 {
        rewards::pronk_jump_reward(stats, &cfg.pronk)
    }
    fn success(&self, stats: &EpisodeStats) -> bool {
        !stats.early_termination && stats.jumps.len() >= 2
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Backflip;

impl Task for Backflip {
    fn name(&self) -> &'static str {
        "backflip"
    }
    fn tilt_terminates(&self) -> bool {
        false
    }
    fn sparse_reward(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64 {
        rewards::backflip_stage1(stats, &cfg.backflip)
    }
    fn dense_step(&self, sig: &StepSignals, cfg: &RewardConfig) -> DenseTerms {
        rewards::backflip_stage2_step(sig, &cfg.backflip)
    }
    fn dense_bonus(&self, stats: &EpisodeStats, cfg: &RewardConfig) -> f64 {
        rewards::backflip_stage2_bonus(stats, &cfg.backflip)
    }
    fn success(&self, stats: &EpisodeStats) -> bool {
        !stats.early_termination && stats.max_pitch >= 0.9 * TAU
    }
}

pub fn task_registry() -> &'static Registry<dyn Task> {
    static REG: OnceLock<Registry<dyn Task>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn Task> = Registry::new("task");
        r.register("jip", || Arc::new(JumpInPlace));
        r.register("jf", || Arc::new(JumpForward));
        r.register("pronk", || Arc::new(Pronk));
        r.register("backflip", || Arc::new(Backflip));
        r
    })
}

pub fn task_by_name(name: &str) -> Result<Arc<dyn Task>> {
    task_registry().get(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::JumpRecord;

    #[test]
    fn registry_names() {
        assert_eq!(task_registry().names(), vec!["backflip", "jf", "jip", "pronk"]);
        for name in ["jip", "jf", "pronk", "backflip"] {
            assert_eq!(task_by_name(name).unwrap().name(), name);
        }
        assert!(task_by_name("moonwalk").is_err());
    }

    #[test]
    fn task_flags() {
        assert!(!task_by_name("backflip").unwrap().tilt_terminates());
        assert!(task_by_name("jip").unwrap().tilt_terminates());
        assert!(task_by_name("pronk").unwrap().repeats());
        assert_eq!(task_by_name("pronk").unwrap().horizon(), 10.0);
        assert_eq!(task_by_name("jf").unwrap().horizon(), 2.5);
    }

    #[test]
    fn success_rules() {
        let mut s = EpisodeStats { longest_flight: 4, ..Default::default() };
        assert!(JumpInPlace.success(&s));
        s.early_termination = true;
        assert!(!JumpInPlace.success(&s));
        let s = EpisodeStats { max_pitch: 0.95 * TAU, ..Default::default() };
        assert!(Backflip.success(&s));
        let s = EpisodeStats { max_pitch: 0.8 * TAU, ..Default::default() };
        assert!(!Backflip.success(&s));
        let j = JumpRecord { height: 0.5, distance: 0.0 };
        let s = EpisodeStats { jumps: vec![j, j], ..Default::default() };
        assert!(Pronk.success(&s));
    }
}
