//! Run configuration: a sectioned `key = value` file.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! [`RunConfig::to_ini`] writes the fully resolved form, which parses back to
//! an identical value.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, ParseOption};

use crate::ars::{representation_by_name, ArsConfig};
use crate::env::{EnvConfig, NoiseModel, RandomizationSpec, RobotVariant, Stage};
use crate::error::{Error, Result};
use crate::ppo::{PpoConfig, WarmStartConfig};
use crate::rewards::RewardConfig;
use crate::seeds::derive_seed;
use crate::sim::{ContactParams, PdGains, SpringMode};
use crate::task::task_by_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StageKind {
    Ars,
    WarmStart,
    Refine,
}

impl StageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Ars => "ars",
            StageKind::WarmStart => "warm_start",
            StageKind::Refine => "refine",
        }
    }
}

impl FromStr for StageKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ars" => Ok(StageKind::Ars),
            "warm_start" => Ok(StageKind::WarmStart),
            "refine" => Ok(StageKind::Refine),
            _ => Err(format!("unknown stage `{s}` (expected ars, warm_start or refine)")),
        }
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physics and environment settings shared by both training stages.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub physics_dt: f64,
    pub decimation: usize,
    pub kp: f64,
    pub kd: f64,
    pub landing_gains: bool,
    pub landing_kp: f64,
    pub landing_kd: f64,
    pub spring_mode: SpringMode,
    pub contact: ContactParams,
    pub gravity: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        let gains = PdGains::default();
        let (landing_kp, landing_kd) = gains.landing.unwrap_or((gains.kp, gains.kd));
        SimSettings {
            physics_dt: 1e-3,
            decimation: 20,
            kp: gains.kp,
            kd: gains.kd,
            landing_gains: gains.landing.is_some(),
            landing_kp,
            landing_kd,
            spring_mode: SpringMode::Commanded,
            contact: ContactParams::default(),
            gravity: crate::sim::RobotModel::default().gravity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSettings {
    pub ars_selector: bool,
    pub ars_filter_alpha: Option<f64>,
    pub ppo_selector: bool,
    /// Overrides the task horizon.
    pub horizon: Option<f64>,
    pub rearm_window: f64,
    pub rearm_speed: f64,
    pub noise: NoiseModel,
}

impl Default for EnvSettings {
    fn default() -> Self {
        let ars = EnvConfig::new(Stage::Ars, RobotVariant::Soft);
        let ppo = EnvConfig::new(Stage::Ppo, RobotVariant::Soft);
        EnvSettings {
            ars_selector: ars.selector,
            ars_filter_alpha: ars.filter_alpha,
            ppo_selector: ppo.selector,
            horizon: None,
            rearm_window: ars.rearm_window,
            rearm_speed: ars.rearm_speed,
            noise: ars.noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: String,
    pub stages: Vec<StageKind>,
    pub robot: RobotVariant,
    pub randomize: bool,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Teacher policy for a plan that starts at the warm start.
    pub teacher: Option<PathBuf>,
    /// Network checkpoint for a plan that starts at refinement.
    pub checkpoint: Option<PathBuf>,
    pub representation: String,
    pub representations: Vec<String>,
    pub sim: SimSettings,
    pub env: EnvSettings,
    pub randomization: RandomizationSpec,
    pub rewards: RewardConfig,
    pub ars: ArsConfig,
    pub ppo: PpoConfig,
    pub warm_start: WarmStartConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: "jip".into(),
            stages: vec![StageKind::Ars, StageKind::WarmStart, StageKind::Refine],
            robot: RobotVariant::Soft,
            randomize: false,
            seeds: vec![0],
            out: PathBuf::from("runs"),
            teacher: None,
            checkpoint: None,
            representation: "linear".into(),
            representations: vec!["linear".into(), "mlp64".into(), "mlp32x32".into()],
            sim: SimSettings::default(),
            env: EnvSettings::default(),
            randomization: RandomizationSpec::default(),
            rewards: RewardConfig::default(),
            ars: ArsConfig::default(),
            ppo: PpoConfig::default(),
            warm_start: WarmStartConfig::default(),
        }
    }
}

/// A typed reference to one configuration value.
enum Slot<'a> {
    F64(&'a mut f64),
    Usize(&'a mut usize),
    U64(&'a mut u64),
    Bool(&'a mut bool),
    Str(&'a mut String),
    OptF64(&'a mut Option<f64>),
    OptPath(&'a mut Option<PathBuf>),
    Path(&'a mut PathBuf),
    Robot(&'a mut RobotVariant),
    Spring(&'a mut SpringMode),
    Stages(&'a mut Vec<StageKind>),
    Seeds(&'a mut Vec<u64>),
    Names(&'a mut Vec<String>),
    Sizes(&'a mut Vec<usize>),
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(|x| x.parse::<T>().map_err(|e| e.to_string())).collect()
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got `{s}`")),
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
    s.parse::<T>().map_err(|_| format!("expected {what}, got `{s}`"))
}

impl Slot<'_> {
    fn render(&self) -> String {
        match self {
            Slot::F64(v) => format!("{:?}", **v),
            Slot::Usize(v) => v.to_string(),
            Slot::U64(v) => v.to_string(),
            Slot::Bool(v) => v.to_string(),
            Slot::Str(v) => v.to_string(),
            Slot::OptF64(v) => v.map(|x| format!("{x:?}")).unwrap_or_else(|| "none".into()),
            Slot::OptPath(v) => v.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()),
            Slot::Path(v) => v.display().to_string(),
            Slot::Robot(v) => v.to_string(),
            Slot::Spring(v) => match v {
                SpringMode::Commanded => "commanded".into(),
                SpringMode::Measured => "measured".into(),
            },
            Slot::Stages(v) => join(v),
            Slot::Seeds(v) => join(v),
            Slot::Names(v) => v.join(", "),
            Slot::Sizes(v) => join(v),
        }
    }

    fn assign(&mut self, s: &str) -> std::result::Result<(), String> {
        match self {
            Slot::F64(v) => {
                let x: f64 = parse_num(s, "a number")?;
                if !x.is_finite() {
                    return Err(format!("expected a finite number, got `{s}`"));
                }
                **v = x;
            }
            Slot::Usize(v) => **v = parse_num(s, "a non-negative integer")?,
            Slot::U64(v) => **v = parse_num(s, "a non-negative integer")?,
            Slot::Bool(v) => **v = parse_bool(s)?,
            Slot::Str(v) => **v = s.to_string(),
            Slot::OptF64(v) => **v = if s == "none" { None } else { Some(parse_num(s, "a number or `none`")?) },
            Slot::OptPath(v) => **v = if s == "none" || s.is_empty() { None } else { Some(PathBuf::from(s)) },
            Slot::Path(v) => **v = PathBuf::from(s),
            Slot::Robot(v) => **v = s.parse().map_err(|e: Error| e.to_string())?,
            Slot::Spring(v) => {
                **v = match s {
                    "commanded" => SpringMode::Commanded,
                    "measured" => SpringMode::Measured,
                    _ => return Err(format!("expected commanded or measured, got `{s}`")),
                }
            }
            Slot::Stages(v) => **v = parse_list(s)?,
            Slot::Seeds(v) => **v = parse_list(s).map_err(|_| format!("expected a list of seeds, got `{s}`"))?,
            Slot::Names(v) => **v = parse_list(s)?,
            Slot::Sizes(v) => **v = parse_list(s).map_err(|_| format!("expected a list of layer sizes, got `{s}`"))?,
        }
        Ok(())
    }
}

const SECTIONS: [&str; 9] = ["run", "sim", "env", "randomization", "rewards", "ars", "ppo", "warm_start", ""];

impl RunConfig {
    fn slots(&mut self) -> Vec<(&'static str, &'static str, Slot<'_>)> {
        let RunConfig {
            task,
            stages,
            robot,
            randomize,
            seeds,
            out,
            teacher,
            checkpoint,
            representation,
            representations,
            sim,
            env,
            randomization,
            rewards: _,
            ars,
            ppo,
            warm_start,
        } = self;
        let c = &mut sim.contact;
        let n = &mut env.noise;
        let r = randomization;
        let [com_x, com_z] = &mut r.com_offset;
        vec![
            ("run", "task", Slot::Str(task)),
            ("run", "stages", Slot::Stages(stages)),
            ("run", "robot", Slot::Robot(robot)),
            ("run", "randomize", Slot::Bool(randomize)),
            ("run", "seeds", Slot::Seeds(seeds)),
            ("run", "out", Slot::Path(out)),
            ("run", "teacher", Slot::OptPath(teacher)),
            ("run", "checkpoint", Slot::OptPath(checkpoint)),
            ("run", "representation", Slot::Str(representation)),
            ("run", "representations", Slot::Names(representations)),
            ("sim", "physics_dt", Slot::F64(&mut sim.physics_dt)),
            ("sim", "decimation", Slot::Usize(&mut sim.decimation)),
            ("sim", "kp", Slot::F64(&mut sim.kp)),
            ("sim", "kd", Slot::F64(&mut sim.kd)),
            ("sim", "landing_gains", Slot::Bool(&mut sim.landing_gains)),
            ("sim", "landing_kp", Slot::F64(&mut sim.landing_kp)),
            ("sim", "landing_kd", Slot::F64(&mut sim.landing_kd)),
            ("sim", "spring_mode", Slot::Spring(&mut sim.spring_mode)),
            ("sim", "gravity", Slot::F64(&mut sim.gravity)),
            ("sim", "contact.normal_stiffness", Slot::F64(&mut c.normal_stiffness)),
            ("sim", "contact.normal_damping", Slot::F64(&mut c.normal_damping)),
            ("sim", "contact.friction", Slot::F64(&mut c.friction)),
            ("sim", "contact.tangent_stiffness", Slot::F64(&mut c.tangent_stiffness)),
            ("sim", "contact.tangent_damping", Slot::F64(&mut c.tangent_damping)),
            ("sim", "contact.limit_stiffness", Slot::F64(&mut c.limit_stiffness)),
            ("sim", "contact.limit_damping", Slot::F64(&mut c.limit_damping)),
            ("env", "ars.selector", Slot::Bool(&mut env.ars_selector)),
            ("env", "ars.filter_alpha", Slot::OptF64(&mut env.ars_filter_alpha)),
            ("env", "ppo.selector", Slot::Bool(&mut env.ppo_selector)),
            ("env", "horizon", Slot::OptF64(&mut env.horizon)),
            ("env", "rearm_window", Slot::F64(&mut env.rearm_window)),
            ("env", "rearm_speed", Slot::F64(&mut env.rearm_speed)),
            ("env", "noise.h", Slot::F64(&mut n.h)),
            ("env", "noise.hd", Slot::F64(&mut n.hd)),
            ("env", "noise.theta", Slot::F64(&mut n.theta)),
            ("env", "noise.q", Slot::F64(&mut n.q)),
            ("env", "noise.qd", Slot::F64(&mut n.qd)),
            ("randomization", "leg_mass", Slot::F64(&mut r.leg_mass)),
            ("randomization", "payload_min", Slot::F64(&mut r.payload.0)),
            ("randomization", "payload_max", Slot::F64(&mut r.payload.1)),
            ("randomization", "com_x", Slot::F64(com_x)),
            ("randomization", "com_z", Slot::F64(com_z)),
            ("randomization", "spring_stiffness", Slot::F64(&mut r.spring_stiffness)),
            ("randomization", "spring_damping", Slot::F64(&mut r.spring_damping)),
            ("ars", "step_size", Slot::F64(&mut ars.step_size)),
            ("ars", "noise", Slot::F64(&mut ars.noise)),
            ("ars", "directions", Slot::Usize(&mut ars.directions)),
            ("ars", "elites", Slot::Usize(&mut ars.elites)),
            ("ars", "rollouts_per_direction", Slot::Usize(&mut ars.rollouts_per_direction)),
            ("ars", "iterations", Slot::Usize(&mut ars.iterations)),
            ("ars", "eval_episodes", Slot::Usize(&mut ars.eval_episodes)),
            ("ppo", "learning_rate", Slot::F64(&mut ppo.learning_rate)),
            ("ppo", "batch_size", Slot::Usize(&mut ppo.batch_size)),
            ("ppo", "gamma", Slot::F64(&mut ppo.gamma)),
            ("ppo", "clip_range", Slot::F64(&mut ppo.clip_range)),
            ("ppo", "gae_lambda", Slot::F64(&mut ppo.gae_lambda)),
            ("ppo", "epochs", Slot::Usize(&mut ppo.epochs)),
            ("ppo", "minibatch_size", Slot::Usize(&mut ppo.minibatch_size)),
            ("ppo", "entropy_coef", Slot::F64(&mut ppo.entropy_coef)),
            ("ppo", "value_coef", Slot::F64(&mut ppo.value_coef)),
            ("ppo", "max_grad_norm", Slot::F64(&mut ppo.max_grad_norm)),
            ("ppo", "hidden", Slot::Sizes(&mut ppo.hidden)),
            ("ppo", "init_log_std", Slot::F64(&mut ppo.init_log_std)),
            ("ppo", "normalize_reward", Slot::Bool(&mut ppo.normalize_reward)),
            ("ppo", "total_timesteps", Slot::U64(&mut ppo.total_timesteps)),
            ("ppo", "eval_episodes", Slot::Usize(&mut ppo.eval_episodes)),
            ("warm_start", "tolerance", Slot::F64(&mut warm_start.tolerance)),
            ("warm_start", "imitation_coef", Slot::F64(&mut warm_start.imitation_coef)),
            ("warm_start", "budget", Slot::U64(&mut warm_start.budget)),
            ("warm_start", "eval_episodes", Slot::Usize(&mut warm_start.eval_episodes)),
        ]
    }

    pub fn from_ini_str(text: &str) -> Result<Self> {
        let opt = ParseOption { enabled_quote: false, enabled_escape: false, ..ParseOption::default() };
        let ini = Ini::load_from_str_opt(text, opt).map_err(|e| Error::config(format!("config syntax: {e}")))?;
        let mut cfg = RunConfig::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            if !SECTIONS.contains(&section) {
                return Err(Error::config(format!("[{section}]: unknown section")));
            }
            for (key, value) in props.iter() {
                let value = value.trim();
                if section == "rewards" {
                    let v: f64 = parse_num(value, "a number").map_err(|m| key_error(section, key, &m))?;
                    cfg.rewards.set(key, v).map_err(|_| key_error(section, key, "unknown key"))?;
                    continue;
                }
                let mut slots = cfg.slots();
                let slot = slots.iter_mut().find(|(s, k, _)| *s == section && *k == key);
                match slot {
                    Some((_, _, slot)) => slot.assign(value).map_err(|m| key_error(section, key, &m))?,
                    None => return Err(key_error(section, key, "unknown key")),
                }
            }
        }
        cfg.warm_start.imitation = cfg.rewards.imitation.clone();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    /// Every key with its resolved value.
    pub fn to_ini(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        let mut current = "";
        for (section, key, slot) in copy.slots() {
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{section}]\n"));
                current = section;
            }
            out.push_str(&format!("{key} = {}\n", slot.render()));
        }
        out.push_str("\n[rewards]\n");
        out.push_str(&self.rewards.to_text());
        out
    }

    /// Checks values and cross-references. Paths are checked for existence.
    pub fn validate(&self) -> Result<()> {
        let wrap = |section: &str, e: Error| match e {
            Error::Config(m) => Error::config(format!("[{section}] {m}")),
            e => e,
        };
        task_by_name(&self.task).map_err(|e| wrap("run", e))?;
        representation_by_name(&self.representation).map_err(|e| wrap("run", e))?;
        for r in &self.representations {
            representation_by_name(r).map_err(|e| wrap("run", e))?;
        }
        if self.seeds.is_empty() {
            return Err(key_error("run", "seeds", "at least one seed is required"));
        }
        if self.stages.is_empty() {
            return Err(key_error("run", "stages", "the stage plan is empty"));
        }
        if self.stages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(key_error("run", "stages", "stages must be listed once each, in the order ars, warm_start, refine"));
        }
        let has = |s| self.stages.contains(&s);
        if has(StageKind::WarmStart) && !has(StageKind::Ars) && self.teacher.is_none() {
            return Err(key_error("run", "teacher", "a warm start without the ars stage needs a teacher policy"));
        }
        if has(StageKind::Refine) && !has(StageKind::WarmStart) && self.checkpoint.is_none() {
            return Err(key_error("run", "checkpoint", "refinement without a warm start needs a network checkpoint"));
        }
        for (key, path) in [("teacher", &self.teacher), ("checkpoint", &self.checkpoint)] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(key_error("run", key, &format!("file {} does not exist", p.display())));
                }
            }
        }
        self.env_config(Stage::Ars).validate().map_err(|e| wrap("env", e))?;
        self.env_config(Stage::Ppo).validate().map_err(|e| wrap("env", e))?;
        self.rewards.validate().map_err(|e| wrap("rewards", e))?;
        self.ars.validate().map_err(|e| wrap("ars", e))?;
        self.ppo.validate().map_err(|e| wrap("ppo", e))?;
        let w = &self.warm_start;
        if !(w.tolerance > 0.0) || w.eval_episodes == 0 {
            return Err(key_error("warm_start", "tolerance", "tolerance and eval_episodes must be positive"));
        }
        if !(w.imitation_coef >= 0.0 && w.imitation_coef.is_finite()) {
            return Err(key_error("warm_start", "imitation_coef", "must be a finite non-negative number"));
        }
        Ok(())
    }

    pub fn gains(&self) -> PdGains {
        let s = &self.sim;
        PdGains { kp: s.kp, kd: s.kd, landing: s.landing_gains.then_some((s.landing_kp, s.landing_kd)) }
    }

    pub fn env_config(&self, stage: Stage) -> EnvConfig {
        let mut e = EnvConfig::new(stage, self.robot);
        e.model.gravity = self.sim.gravity;
        e.contact = self.sim.contact;
        e.gains = self.gains();
        e.spring_mode = self.sim.spring_mode;
        e.noise = self.env.noise;
        e.physics_dt = self.sim.physics_dt;
        e.decimation = self.sim.decimation;
        e.horizon = self.env.horizon;
        e.randomization = self.randomize.then_some(self.randomization);
        e.rearm_window = self.env.rearm_window;
        e.rearm_speed = self.env.rearm_speed;
        e.rewards = self.rewards.clone();
        match stage {
            Stage::Ars => {
                e.selector = self.env.ars_selector;
                e.filter_alpha = self.env.ars_filter_alpha;
            }
            Stage::Ppo => {
                e.selector = self.env.ppo_selector;
                e.filter_alpha = None;
            }
        }
        e
    }

    pub fn ars_config(&self, seed: u64) -> ArsConfig {
        ArsConfig { seed, ..self.ars.clone() }
    }

    pub fn ppo_config(&self, seed: u64) -> PpoConfig {
        PpoConfig { seed: derive_seed(seed, "ppo", 0), ..self.ppo.clone() }
    }

    pub fn warm_start_config(&self) -> WarmStartConfig {
        WarmStartConfig { imitation: self.rewards.imitation.clone(), ..self.warm_start.clone() }
    }
}

fn key_error(section: &str, key: &str, msg: &str) -> Error {
    Error::config(format!("[{section}] {key}: {msg}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_ini_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.ppo.learning_rate, 2e-4);
        assert_eq!(cfg.ppo.batch_size, 4096);
        assert_eq!(cfg.ppo.gamma, 0.999);
        assert_eq!(cfg.ppo.clip_range, 0.1);
    }

    #[test]
    fn resolved_form_round_trips() {
        let text = "[run]\ntask = jf\nseeds = 3, 4\nstages = ars\nrobot = rigid\n\n[ppo]\nhidden = 32, 16\n\n[rewards]\njf1.c_d = 7.5\n\n[env]\nars.filter_alpha = none\nhorizon = 1.5\n";
        let cfg = RunConfig::from_ini_str(text).unwrap();
        assert_eq!(cfg.task, "jf");
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.stages, vec![StageKind::Ars]);
        assert_eq!(cfg.ppo.hidden, vec![32, 16]);
        assert_eq!(cfg.rewards.get("jf1.c_d"), Some(7.5));
        assert_eq!(cfg.env.ars_filter_alpha, None);
        let again = RunConfig::from_ini_str(&cfg.to_ini()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_ini(), cfg.to_ini());
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("[ars]\ndirections = many\n", "[ars] directions"),
            ("[ppo]\nlearnign_rate = 1\n", "[ppo] learnign_rate: unknown key"),
            ("[rewards]\njip1.nope = 1\n", "[rewards] jip1.nope"),
            ("[bogus]\nx = 1\n", "[bogus]"),
            ("[run]\nrobot = squishy\n", "[run] robot"),
        ];
        for (text, want) in cases {
            let err = RunConfig::from_ini_str(text).unwrap_err().to_string();
            assert!(err.contains(want), "{err}");
        }
    }

    #[test]
    fn validation_checks_plan_and_values() {
        let bad = |text: &str, want: &str| {
            let err = RunConfig::from_ini_str(text).unwrap().validate().unwrap_err();
            assert!(matches!(err, Error::Config(_)));
            assert!(err.to_string().contains(want), "{err}");
        };
        bad("[run]\nseeds = \n", "seeds");
        bad("[run]\nstages = refine, ars\n", "stages");
        bad("[run]\nstages = warm_start\n", "teacher");
        bad("[run]\nstages = refine\n", "checkpoint");
        bad("[run]\nstages = refine\ncheckpoint = /nonexistent/x.ckpt\n", "does not exist");
        bad("[run]\ntask = cartwheel\n", "task");
        bad("[ppo]\nclip_range = 1.5\n", "[ppo]");
        bad("[ars]\nelites = 100\n", "[ars]");
    }

    #[test]
    fn env_configs_follow_stage_defaults() {
        let cfg = RunConfig::default();
        let a = cfg.env_config(Stage::Ars);
        let p = cfg.env_config(Stage::Ppo);
        assert!(a.selector && a.filter_alpha == Some(0.3));
        assert!(!p.selector && p.filter_alpha.is_none());
        assert_eq!(a.gains, PdGains::default());
        assert!(a.randomization.is_none());
        let r = RunConfig { randomize: true, ..cfg.clone() };
        assert_eq!(r.env_config(Stage::Ars).randomization, Some(RandomizationSpec::default()));
        assert_ne!(cfg.ppo_config(1).seed, cfg.ppo_config(2).seed);
    }
}
