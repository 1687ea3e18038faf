//! MDP wrapper around the simulator: observations, action conversion, the
//! behavior selector, termination and domain randomization.

mod episode;
mod selector;
mod trajectory;

pub use episode::{run_episode, Env, EpisodeOutcome, Step};
pub use selector::{advance_phase, filter_action, phase_action, scale_action, unscale_action, Phase, PhaseMachine};
pub use trajectory::{read_trajectory_csv, write_trajectory_csv, Trajectory, TrajectoryRow};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rewards::RewardConfig;
use crate::sim::{collision_flags, ContactParams, PdGains, RobotModel, SimState, SpringMode, SpringSpec, NUM_JOINTS};

/// Which learner the environment serves. Only the PPO observation carries the
/// flight flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ars,
    Ppo,
}

impl Stage {
    pub fn obs_dim(self) -> usize {
        match self {
            Stage::Ars => 3 + 2 * NUM_JOINTS,
            Stage::Ppo => 4 + 2 * NUM_JOINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobotVariant {
    Rigid,
    Soft,
}

impl std::str::FromStr for RobotVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rigid" => Ok(RobotVariant::Rigid),
            "soft" => Ok(RobotVariant::Soft),
            _ => Err(Error::config(format!("robot variant must be rigid or soft, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for RobotVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RobotVariant::Rigid => "rigid",
            RobotVariant::Soft => "soft",
        })
    }
}

/// White observation noise, one standard deviation per signal group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub h: f64,
    pub hd: f64,
    pub theta: f64,
    pub q: f64,
    pub qd: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { h: 0.005, hd: 0.05, theta: 0.005, q: 0.005, qd: 0.1 }
    }
}

impl NoiseModel {
    pub fn off() -> Self {
        NoiseModel { h: 0.0, hd: 0.0, theta: 0.0, q: 0.0, qd: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in [("h", self.h), ("hd", self.hd), ("theta", self.theta), ("q", self.q), ("qd", self.qd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("noise.{k} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Builds the observation `{h, ḣ, θ, q, q̇}` plus the flight flag for PPO.
/// The noise draws are consumed in the same order whatever the σ values.
pub fn observe(state: &SimState, phase: Phase, noise: &NoiseModel, stage: Stage, rng: &mut impl Rng) -> Vec<f64> {
    let mut obs = Vec::with_capacity(stage.obs_dim());
    let mut push = |v: f64, sigma: f64| {
        let n: f64 = rng.sample(StandardNormal);
        obs.push(v + sigma * n);
    };
    push(state.h, noise.h);
    push(state.hd, noise.hd);
    push(state.theta, noise.theta);
    for &q in &state.q {
        push(q, noise.q);
    }
    for &qd in &state.qd {
        push(qd, noise.qd);
    }
    if stage == Stage::Ppo {
        obs.push(if phase == Phase::Flight { 1.0 } else { 0.0 });
    }
    obs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationCause {
    Timeout,
    Fallen,
    Collision,
    TiltExceeded,
}

impl TerminationCause {
    pub fn is_early(self) -> bool {
        !matches!(self, TerminationCause::Timeout)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TerminationCause::Timeout => "timeout",
            TerminationCause::Fallen => "fallen",
            TerminationCause::Collision => "collision",
            TerminationCause::TiltExceeded => "tilt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerminationReport {
    pub terminated: bool,
    pub cause: Option<TerminationCause>,
    pub early: bool,
}

impl TerminationReport {
    pub const RUNNING: TerminationReport = TerminationReport { terminated: false, cause: None, early: false };

    fn from_cause(cause: TerminationCause) -> Self {
        TerminationReport { terminated: true, cause: Some(cause), early: cause.is_early() }
    }
}

pub const TILT_LIMIT: f64 = 0.85;

/// Early termination first (fall, collision, tilt), then the time limit.
pub fn check_termination(
    model: &RobotModel,
    state: &SimState,
    t: f64,
    horizon: f64,
    tilt_terminates: bool,
) -> TerminationReport {
    let flags = collision_flags(model, state);
    if flags.fallen {
        TerminationReport::from_cause(TerminationCause::Fallen)
    } else if flags.knee_or_link_collision {
        TerminationReport::from_cause(TerminationCause::Collision)
    } else if tilt_terminates && flags.trunk_tilt_dot < TILT_LIMIT {
        TerminationReport::from_cause(TerminationCause::TiltExceeded)
    } else if t >= horizon - 1e-9 {
        TerminationReport::from_cause(TerminationCause::Timeout)
    } else {
        TerminationReport::RUNNING
    }
}

/// Per-episode parameter ranges. Relative ranges are fractions of nominal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationSpec {
    pub leg_mass: f64,
    pub payload: (f64, f64),
    /// Payload position range in the trunk frame, x and z.
    pub com_offset: [f64; 2],
    pub spring_stiffness: f64,
    pub spring_damping: f64,
}

impl Default for RandomizationSpec {
    fn default() -> Self {
        RandomizationSpec {
            leg_mass: 0.2,
            payload: (0.0, 4.0),
            com_offset: [0.2, 0.2],
            spring_stiffness: 0.3,
            spring_damping: 0.3,
        }
    }
}

impl RandomizationSpec {
    pub fn none() -> Self {
        RandomizationSpec {
            leg_mass: 0.0,
            payload: (0.0, 0.0),
            com_offset: [0.0, 0.0],
            spring_stiffness: 0.0,
            spring_damping: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("leg_mass", self.leg_mass),
            ("spring_stiffness", self.spring_stiffness),
            ("spring_damping", self.spring_damping),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(format!("randomization.{k} must be in [0, 1), got {v}")));
            }
        }
        let (lo, hi) = self.payload;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::config("randomization.payload needs 0 <= min <= max"));
        }
        if self.com_offset.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("randomization.com_offset must be >= 0"));
        }
        Ok(())
    }
}

const RANDOMIZE_TRIES: usize = 16;

fn around(rng: &mut impl Rng, nominal: f64, rel: f64) -> f64 {
    nominal * rng.random_range(1.0 - rel..=1.0 + rel)
}

/// Samples one environment. The payload is a point mass fused into the
/// trunk, which moves the trunk's mass, center of mass and inertia.
pub fn randomize(
    model: &RobotModel,
    springs: &SpringSpec,
    spec: &RandomizationSpec,
    seed: u64,
) -> Result<(RobotModel, SpringSpec)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOMIZE_TRIES {
        let mut m = model.clone();
        for link in [&mut m.hip, &mut m.thigh, &mut m.calf] {
            let s = rng.random_range(1.0 - spec.leg_mass..=1.0 + spec.leg_mass);
            link.mass *= s;
            link.inertia *= s;
        }
        let payload = rng.random_range(spec.payload.0..=spec.payload.1);
        let px = rng.random_range(-spec.com_offset[0]..=spec.com_offset[0]);
        let pz = rng.random_range(-spec.com_offset[1]..=spec.com_offset[1]);
        let (mt, c) = (model.trunk_mass, model.trunk_com);
        let total = mt + payload;
        let com = [(mt * c[0] + payload * px) / total, (mt * c[1] + payload * pz) / total];
        let d2 = |a: [f64; 2]| (a[0] - com[0]).powi(2) + (a[1] - com[1]).powi(2);
        m.trunk_inertia = model.trunk_inertia + mt * d2(c) + payload * d2([px, pz]);
        m.trunk_mass = total;
        m.trunk_com = com;

        let mut s = springs.clone();
        for j in 0..NUM_JOINTS {
            if s.engaged[j] {
                s.stiffness[j] = around(&mut rng, springs.stiffness[j], spec.spring_stiffness);
                s.damping[j] = around(&mut rng, springs.damping[j], spec.spring_damping);
            }
        }
        if m.validate().is_ok() && s.validate().is_ok() {
            return Ok((m, s));
        }
    }
    Err(Error::config(format!("randomization produced no valid model in {RANDOMIZE_TRIES} draws")))
}

/// Everything an [`Env`] needs besides the task.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub model: RobotModel,
    pub contact: ContactParams,
    pub gains: PdGains,
    pub variant: RobotVariant,
    pub spring_mode: SpringMode,
    pub noise: NoiseModel,
    pub stage: Stage,
    /// Whether the selector overrides the policy in flight and landing.
    pub selector: bool,
    /// Low-pass coefficient on the policy output; `None` passes it through.
    pub filter_alpha: Option<f64>,
    pub physics_dt: f64,
    pub decimation: usize,
    /// Overrides the task's horizon.
    pub horizon: Option<f64>,
    pub randomization: Option<RandomizationSpec>,
    pub rearm_window: f64,
    pub rearm_speed: f64,
    pub rewards: RewardConfig,
}

impl EnvConfig {
    /// Stage defaults: the ARS stage runs with selector and filter, the PPO
    /// stage without either.
    pub fn new(stage: Stage, variant: RobotVariant) -> Self {
        let ars = stage == Stage::Ars;
        EnvConfig {
            model: RobotModel::default(),
            contact: ContactParams::default(),
            gains: PdGains::default(),
            variant,
            spring_mode: SpringMode::Commanded,
            noise: NoiseModel::default(),
            stage,
            selector: ars,
            filter_alpha: if ars { Some(0.3) } else { None },
            physics_dt: 1e-3,
            decimation: 20,
            horizon: None,
            randomization: None,
            rearm_window: 0.1,
            rearm_speed: 0.1,
            rewards: RewardConfig::default(),
        }
    }

    pub fn springs(&self) -> SpringSpec {
        match self.variant {
            RobotVariant::Rigid => SpringSpec::rigid(&self.model),
            RobotVariant::Soft => SpringSpec { mode: self.spring_mode, ..SpringSpec::soft(&self.model) },
        }
    }

    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.decimation as f64
    }

    pub fn obs_dim(&self) -> usize {
        self.stage.obs_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.gains.validate()?;
        self.noise.validate()?;
        self.springs().validate()?;
        self.rewards.validate()?;
        if let Some(r) = &self.randomization {
            r.validate()?;
        }
        if let Some(a) = self.filter_alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::config(format!("env.filter_alpha must be in (0, 1], got {a}")));
            }
        }
        if !(self.physics_dt > 0.0 && self.physics_dt <= crate::sim::dynamics::MAX_DT) {
            return Err(Error::config(format!("env.physics_dt out of range: {}", self.physics_dt)));
        }
        if self.decimation == 0 {
            return Err(Error::config("env.decimation must be >= 1"));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config("env.horizon must be positive"));
            }
        }
        if !(self.rearm_window >= 0.0 && self.rearm_speed > 0.0) {
            return Err(Error::config("env.rearm_window must be >= 0 and env.rearm_speed > 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RobotModel {
        RobotModel::default()
    }

    #[test]
    fn observation_lengths_and_flag() {
        let m = model();
        let s = SimState::at_pose(m.homing, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let off = NoiseModel::off();
        let o = observe(&s, Phase::TakeOff, &off, Stage::Ars, &mut rng);
        assert_eq!(o.len(), 15);
        let o = observe(&s, Phase::TakeOff, &off, Stage::Ppo, &mut rng);
        assert_eq!(o.len(), 16);
        assert_eq!(o[15], 0.0);
        assert_eq!(o[0], 0.3);
        assert_eq!(&o[3..9], &m.homing);
        let o = observe(&s, Phase::Flight, &off, Stage::Ppo, &mut rng);
        assert_eq!(o[15], 1.0);
    }

    #[test]
    fn noise_statistics() {
        let m = model();
        let s = SimState::at_pose(m.homing, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = NoiseModel::default();
        let n = 20000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let o = observe(&s, Phase::TakeOff, &noise, Stage::Ars, &mut rng);
            let e = o[14] - s.qd[5];
            sum += e;
            sq += e * e;
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.005, "{mean}");
        assert!((std - 0.1).abs() < 0.005, "{std}");
    }

    #[test]
    fn termination_table() {
        let m = model();
        let stand = SimState::at_pose(m.homing, 0.305);
        let horizon = 2.5;
        let cases: Vec<(&str, SimState, f64, bool, Option<TerminationCause>)> = vec![
            ("standing", stand.clone(), 1.0, true, None),
            ("fallen", SimState { h: 0.05, ..stand.clone() }, 1.0, true, Some(TerminationCause::Fallen)),
            ("knees down", SimState { h: 0.12, ..stand.clone() }, 1.0, true, Some(TerminationCause::Collision)),
            ("tilted", SimState { h: 0.6, theta: 0.6, ..stand.clone() }, 1.0, true, Some(TerminationCause::TiltExceeded)),
            ("tilted flip", SimState { h: 0.6, theta: 0.6, ..stand.clone() }, 1.0, false, None),
            ("upside down flip", SimState { h: 0.8, theta: -std::f64::consts::PI, ..stand.clone() }, 1.0, false, None),
            ("upside down jump", SimState { h: 0.8, theta: -std::f64::consts::PI, ..stand.clone() }, 1.0, true, Some(TerminationCause::TiltExceeded)),
            ("small tilt", SimState { h: 0.6, theta: 0.5, ..stand.clone() }, 1.0, true, None),
            ("timeout", stand.clone(), 2.5, true, Some(TerminationCause::Timeout)),
            ("fallen at horizon", SimState { h: 0.05, ..stand.clone() }, 2.5, true, Some(TerminationCause::Fallen)),
        ];
        for (name, s, t, tilt, want) in cases {
            let r = check_termination(&m, &s, t, horizon, tilt);
            assert_eq!(r.cause, want, "{name}");
            assert_eq!(r.terminated, want.is_some(), "{name}");
            assert_eq!(r.early, want.is_some_and(|c| c != TerminationCause::Timeout), "{name}");
        }
    }

    #[test]
    fn randomization_ranges() {
        let m = model();
        let springs = SpringSpec::soft(&m);
        let spec = RandomizationSpec::default();
        for seed in 0..200 {
            let (rm, rs) = randomize(&m, &springs, &spec, seed).unwrap();
            let payload = rm.trunk_mass - m.trunk_mass;
            assert!((0.0..=4.0).contains(&payload));
            for (a, b) in [(rm.thigh.mass, m.thigh.mass), (rm.calf.mass, m.calf.mass), (rm.hip.mass, m.hip.mass)] {
                assert!(a >= 0.8 * b - 1e-12 && a <= 1.2 * b + 1e-12);
            }
            for j in [0, 1, 3, 4] {
                assert!(rs.stiffness[j] >= 14.0 - 1e-12 && rs.stiffness[j] <= 26.0 + 1e-12);
                assert!(rs.damping[j] >= 0.14 - 1e-12 && rs.damping[j] <= 0.26 + 1e-12);
            }
            assert!(!rs.engaged[2] && rs.stiffness[2] == 0.0);
            // Payload offset stays inside the sampled box.
            let max_shift = payload / rm.trunk_mass * 0.2;
            assert!(rm.trunk_com[0].abs() <= max_shift + 1e-12);
            assert!(rm.trunk_inertia >= m.trunk_inertia);
        }
        let a = randomize(&m, &springs, &spec, 7).unwrap();
        let b = randomize(&m, &springs, &spec, 7).unwrap();
        assert_eq!(a, b);
        let c = randomize(&m, &springs, &spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_ranges_are_identity() {
        let m = model();
        let springs = SpringSpec::soft(&m);
        let (rm, rs) = randomize(&m, &springs, &RandomizationSpec::none(), 3).unwrap();
        assert_eq!(rm, m);
        assert_eq!(rs, springs);
    }

    #[test]
    fn payload_inertia_matches_point_masses() {
        // Trunk as two point masses: the fused inertia about the new CoM must
        // equal the direct sum over the point masses.
        let mut m = model();
        m.trunk_com = [0.0, 0.0];
        m.trunk_inertia = 0.0 + 1e-9;
        let spec = RandomizationSpec { payload: (2.0, 2.0), com_offset: [0.2, 0.2], ..RandomizationSpec::none() };
        let (rm, _) = randomize(&m, &SpringSpec::rigid(&m), &spec, 11).unwrap();
        let p = [rm.trunk_com[0] * rm.trunk_mass / 2.0, rm.trunk_com[1] * rm.trunk_mass / 2.0];
        let c = rm.trunk_com;
        let direct = 1e-9 + 6.0 * (c[0] * c[0] + c[1] * c[1]) + 2.0 * ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2));
        assert!((rm.trunk_inertia - direct).abs() < 1e-12);
    }

    #[test]
    fn config_defaults_by_stage() {
        let a = EnvConfig::new(Stage::Ars, RobotVariant::Soft);
        assert!(a.selector);
        assert_eq!(a.filter_alpha, Some(0.3));
        assert_eq!(a.obs_dim(), 15);
        assert!(a.springs().any_engaged());
        let p = EnvConfig::new(Stage::Ppo, RobotVariant::Rigid);
        assert!(!p.selector);
        assert_eq!(p.filter_alpha, None);
        assert_eq!(p.obs_dim(), 16);
        assert!(!p.springs().any_engaged());
        assert!((a.control_dt() - 0.02).abs() < 1e-15);
        a.validate().unwrap();
        p.validate().unwrap();
    }
}
