//! Reward catalog for the jumping, pronking and back-flip tasks.
//!
//! Stage-1 rewards are sparse (scored once from [`EpisodeStats`] when the
//! episode ends); stage-2 rewards are dense per-step terms plus a terminal
//! bonus.

mod config;
mod terms;

pub use config::{
    BackflipConfig, DenseConfig, ImitationConfig, JfStage1, JfStage2, JipStage1, JipStage2, PronkConfig,
    RewardConfig,
};
pub use terms::{
    backflip_stage1, backflip_stage2_bonus, backflip_stage2_step, imitation_reward, jf_stage1, jf_stage2_bonus,
    jf_stage2_step, jip_stage1, jip_stage2_bonus, jip_stage2_step, pronk_jump_reward, pronk_performance,
    pronk_stage1, pronk_stage2_terms, pronk_stage2_step, DenseTerms,
};

use crate::error::{Error, Result};
use crate::sim::NUM_JOINTS;

/// Exponential kernel `a * exp(-b |x|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub a: f64,
    pub b: f64,
}

impl Kernel {
    pub const fn new(a: f64, b: f64) -> Self {
        Kernel { a, b }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.a * (-self.b * x.abs()).exp()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0 && self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::config(format!("kernel {name}: need a > 0 and b >= 0, got a={} b={}", self.a, self.b)));
        }
        Ok(())
    }
}

/// `clip(v / cap, 0, 1)`.
#[inline]
pub fn normalize_clip(v: f64, cap: f64) -> f64 {
    debug_assert!(cap > 0.0);
    (v / cap).clamp(0.0, 1.0)
}

/// Shannon entropy (natural log) of the sum-normalized array. Zero for empty
/// or all-zero input.
pub fn entropy(p: &[f64]) -> f64 {
    let total: f64 = p.iter().filter(|v| **v > 0.0).sum();
    if total <= 0.0 {
        return 0.0;
    }
    -p.iter()
        .filter(|v| **v > 0.0)
        .map(|v| {
            let x = v / total;
            x * x.ln()
        })
        .sum::<f64>()
}

/// One completed Flight→Landing cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    /// Highest trunk height reached during the cycle.
    pub height: f64,
    /// Trunk travel from the start of the take-off to touchdown.
    pub distance: f64,
}

/// Aggregates of one episode, filled in by the environment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeStats {
    /// h̄: maximum trunk height over the episode.
    pub max_height: f64,
    /// d̄: trunk travel until the first touchdown (or the end, if none).
    pub distance: f64,
    /// θ̄: maximum |pitch| over the episode. Pitch is not wrapped, so a full
    /// back-flip reads 2π.
    pub max_pitch: f64,
    pub early_termination: bool,
    pub jumps: Vec<JumpRecord>,
    /// Episode end time over the horizon, in [0, 1].
    pub end_time_fraction: f64,
    /// Motor work magnitude Σ|τ q̇| dt, in joules.
    pub energy: f64,
    /// Per-control-step average force per loaded foot.
    pub f_avg: Vec<f64>,
    /// Per-control-step torque differences between consecutive steps.
    pub torque_deltas: Vec<[f64; NUM_JOINTS]>,
    /// Largest total foot force seen after the first touchdown.
    pub peak_landing_force: f64,
    /// Longest run of consecutive control steps with no foot loaded.
    pub longest_flight: usize,
    pub touched_down: bool,
    pub control_steps: usize,
}

/// Per-step quantities read by the dense rewards.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepSignals {
    pub h: f64,
    pub f_avg: f64,
    /// Trunk travel since the episode start.
    pub d: f64,
    pub dtau: [f64; NUM_JOINTS],
    pub theta: f64,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
