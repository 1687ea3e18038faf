use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::selector::{filter_action, phase_action, scale_action, unscale_action, Phase, PhaseMachine};
use super::trajectory::{Trajectory, TrajectoryRow};
use super::{check_termination, observe, randomize, EnvConfig, Stage, TerminationReport};
use crate::error::{Error, Result};
use crate::rewards::{EpisodeStats, JumpRecord, StepSignals};
use crate::sim::control::{pd_torque_unchecked, spring_torque_for};
use crate::sim::{contact_summary, SimState, Simulator, SpringSpec, NUM_JOINTS};
use crate::task::Task;

/// Result of one control step.
#[derive(Debug, Clone)]
pub struct Step {
    pub obs: Vec<f64>,
    /// Sparse reward for the ARS stage (zero until the last step), dense
    /// per-step reward for the PPO stage.
    pub reward: f64,
    pub signals: StepSignals,
    pub termination: TerminationReport,
}

/// One episode of a task. Each instance is single-owner; run many side by
/// side for parallel rollouts.
pub struct Env {
    cfg: EnvConfig,
    task: Arc<dyn Task>,
    nominal_sim: Simulator,
    sim: Simulator,
    nominal_springs: SpringSpec,
    springs: SpringSpec,
    horizon: f64,
    state: SimState,
    machine: PhaseMachine,
    noise_rng: ChaCha8Rng,
    prev_filtered: [f64; NUM_JOINTS],
    prev_ref: [f64; NUM_JOINTS],
    prev_tau: Option<[f64; NUM_JOINTS]>,
    x0: f64,
    cycle_x0: f64,
    cycle_hmax: f64,
    flight_run: usize,
    stats: EpisodeStats,
    termination: TerminationReport,
    started: bool,
    record: bool,
    trajectory: Trajectory,
}

impl Env {
    pub fn new(cfg: EnvConfig, task: Arc<dyn Task>) -> Result<Self> {
        cfg.validate()?;
        let sim = Simulator::new(cfg.model.clone(), cfg.contact)?;
        let springs = cfg.springs();
        let horizon = cfg.horizon.unwrap_or_else(|| task.horizon());
        let machine = PhaseMachine::new(task.repeats(), cfg.rearm_window, cfg.rearm_speed);
        let state = SimState::at_pose(cfg.model.homing, cfg.model.standing_height);
        Ok(Env {
            nominal_sim: sim.clone(),
            sim,
            nominal_springs: springs.clone(),
            springs,
            horizon,
            state,
            machine,
            noise_rng: ChaCha8Rng::seed_from_u64(0),
            prev_filtered: [0.0; NUM_JOINTS],
            prev_ref: cfg.model.homing,
            prev_tau: None,
            x0: 0.0,
            cycle_x0: 0.0,
            cycle_hmax: 0.0,
            flight_run: 0,
            stats: EpisodeStats::default(),
            termination: TerminationReport::RUNNING,
            started: false,
            record: false,
            trajectory: Vec::new(),
            cfg,
            task,
        })
    }

    /// Keep a per-step trajectory from the next reset on.
    pub fn set_recording(&mut self, on: bool) {
        self.record = on;
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn task(&self) -> &Arc<dyn Task> {
        &self.task
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.machine.phase
    }

    pub fn stats(&self) -> &EpisodeStats {
        &self.stats
    }

    pub fn springs(&self) -> &SpringSpec {
        &self.springs
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn termination(&self) -> TerminationReport {
        self.termination
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn max_steps(&self) -> usize {
        (self.horizon / self.cfg.control_dt() - 1e-9).ceil() as usize
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn take_trajectory(&mut self) -> Trajectory {
        std::mem::take(&mut self.trajectory)
    }

    /// Stage-1 reward of the episode so far.
    pub fn sparse_reward(&self) -> f64 {
        self.task.sparse_reward(&self.stats, &self.cfg.rewards)
    }

    /// Starts an episode at rest in the homing pose with the feet just
    /// carrying the robot's weight. The seed drives the observation noise and,
    /// when enabled, the sampled environment.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(1);
        self.noise_rng = noise_rng;
        match &self.cfg.randomization {
            Some(spec) => {
                let (m, s) = randomize(&self.cfg.model, &self.nominal_springs, spec, seed)?;
                self.sim = Simulator::new(m, self.cfg.contact)?;
                self.springs = s;
            }
            None => {
                self.sim = self.nominal_sim.clone();
                self.springs = self.nominal_springs.clone();
            }
        }
        let m = self.sim.model();
        let homing = m.homing;
        let sink = m.total_mass() * m.gravity / (2.0 * self.cfg.contact.normal_stiffness);
        let h0 = self.sim.touchdown_height(&homing) - sink;
        self.state = SimState::at_pose(homing, h0);
        self.machine = PhaseMachine::new(self.task.repeats(), self.cfg.rearm_window, self.cfg.rearm_speed);
        let lo = m.joint_lower;
        let hi = m.joint_upper;
        self.prev_filtered = unscale_action(&homing, &lo, &hi);
        self.prev_ref = homing;
        self.prev_tau = None;
        self.x0 = self.state.x;
        self.cycle_x0 = self.state.x;
        self.cycle_hmax = h0;
        self.flight_run = 0;
        self.stats = EpisodeStats { max_height: h0, ..Default::default() };
        self.termination = TerminationReport::RUNNING;
        self.started = true;
        self.trajectory.clear();
        if self.record {
            self.trajectory.push(self.row([0.0; NUM_JOINTS], 0.0));
        }
        Ok(self.observe())
    }

    fn observe(&mut self) -> Vec<f64> {
        observe(&self.state, self.machine.phase, &self.cfg.noise, self.cfg.stage, &mut self.noise_rng)
    }

    fn row(&self, tau: [f64; NUM_JOINTS], f_contact: f64) -> TrajectoryRow {
        let s = &self.state;
        TrajectoryRow {
            t: s.t,
            x: s.x,
            h: s.h,
            theta: s.theta,
            q: s.q,
            qd: s.qd,
            tau,
            f_contact,
            xd: s.xd,
            hd: s.hd,
            thetad: s.thetad,
            phase: self.machine.phase,
        }
    }

    /// Applies one policy action for one control period.
    pub fn step(&mut self, action: &[f64]) -> Result<Step> {
        if !self.started || self.termination.terminated {
            return Err(Error::InputDomain("step called outside a running episode".into()));
        }
        if action.len() != NUM_JOINTS {
            return Err(Error::Dimension { what: "action", expected: NUM_JOINTS, got: action.len() });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::InputDomain("non-finite action".into()));
        }
        let mut a = [0.0; NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            a[i] = action[i].clamp(-1.0, 1.0);
        }
        let filtered = match self.cfg.filter_alpha {
            Some(alpha) => filter_action(&a, &self.prev_filtered, alpha),
            None => a,
        };
        self.prev_filtered = filtered;

        let model = self.sim.model();
        let policy_ref = scale_action(&filtered, &model.joint_lower, &model.joint_upper);
        let (q_ref, gains) = if self.cfg.selector {
            phase_action(self.machine.phase, &policy_ref, &model.homing, &self.cfg.gains)
        } else {
            (policy_ref, self.cfg.gains.nominal())
        };
        let control_dt = self.cfg.control_dt();
        let mut qd_ref = [0.0; NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            qd_ref[i] = (q_ref[i] - self.prev_ref[i]) / control_dt;
        }
        self.prev_ref = q_ref;
        let limit = model.torque_limit;
        let motors = model.motors_per_joint;
        let dt = self.cfg.physics_dt;

        let mut tau_sum = [0.0; NUM_JOINTS];
        let mut f_peak = 0.0f64;
        let mut f_avg_peak = 0.0f64;
        let mut airborne = true;
        for _ in 0..self.cfg.decimation {
            let s = &self.state;
            let tau_m = pd_torque_unchecked(&q_ref, &s.q, &s.qd, gains.kp, gains.kd, &limit);
            let spring = spring_torque_for(&q_ref, &qd_ref, s, &self.springs);
            let mut tau = [0.0; NUM_JOINTS];
            for i in 0..NUM_JOINTS {
                tau[i] = tau_m[i] + spring[i];
            }
            self.state = self.sim.step(&self.state, &tau, dt)?;
            let mut power = 0.0;
            for i in 0..NUM_JOINTS {
                power += (tau_m[i] * self.state.qd[i]).abs();
                tau_sum[i] += tau_m[i];
            }
            self.stats.energy += motors * power * dt;
            let c = contact_summary(&self.state);
            f_peak = f_peak.max(c.total);
            f_avg_peak = f_avg_peak.max(c.average);
            airborne &= c.total == 0.0;
        }
        let n = self.cfg.decimation as f64;
        let tau_mean = tau_sum.map(|v| v / n);

        let s = &self.state;
        let f_contact = contact_summary(s).total;
        let before = self.machine.phase;
        let after = self.machine.update(f_contact, s.hd, control_dt);

        let st = &mut self.stats;
        st.control_steps += 1;
        st.max_height = st.max_height.max(s.h);
        st.max_pitch = st.max_pitch.max(s.theta.abs());
        if airborne {
            self.flight_run += 1;
            st.longest_flight = st.longest_flight.max(self.flight_run);
        } else {
            self.flight_run = 0;
        }
        self.cycle_hmax = self.cycle_hmax.max(s.h);
        let mut jump_done = false;
        if before == Phase::Flight && after == Phase::Landing {
            st.jumps.push(JumpRecord { height: self.cycle_hmax, distance: s.x - self.cycle_x0 });
            jump_done = true;
            if !st.touched_down {
                st.touched_down = true;
                st.distance = s.x - self.x0;
            }
        }
        if before == Phase::Landing && after == Phase::TakeOff {
            self.cycle_x0 = s.x;
            self.cycle_hmax = s.h;
        }
        if st.touched_down {
            st.peak_landing_force = st.peak_landing_force.max(f_peak);
        }
        st.f_avg.push(f_avg_peak);
        let prev_tau = self.prev_tau.unwrap_or(tau_mean);
        let mut dtau = [0.0; NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            dtau[i] = tau_mean[i] - prev_tau[i];
        }
        self.prev_tau = Some(tau_mean);
        st.torque_deltas.push(dtau);

        let signals = StepSignals { h: s.h, f_avg: f_avg_peak, d: s.x - self.x0, dtau, theta: s.theta };
        let report = check_termination(self.sim.model(), s, s.t, self.horizon, self.task.tilt_terminates());
        if report.terminated {
            st.early_termination = report.early;
            st.end_time_fraction = (s.t / self.horizon).min(1.0);
            if !st.touched_down {
                st.distance = s.x - self.x0;
            }
        } else {
            // Running value so mid-episode sparse scores see the travel so far.
            if !st.touched_down {
                st.distance = s.x - self.x0;
            }
            st.end_time_fraction = (s.t / self.horizon).min(1.0);
        }
        self.termination = report;

        let rewards = &self.cfg.rewards;
        let reward = match self.cfg.stage {
            Stage::Ars => {
                if report.terminated {
                    self.task.sparse_reward(&self.stats, rewards)
                } else {
                    0.0
                }
            }
            Stage::Ppo => {
                let mut r = self.task.dense_step(&signals, rewards).total();
                if jump_done {
                    r += self.task.jump_reward(&self.stats, rewards);
                }
                if report.terminated {
                    r += self.task.dense_bonus(&self.stats, rewards);
                }
                r
            }
        };
        if self.record {
            let row = self.row(tau_mean, f_contact);
            self.trajectory.push(row);
        }
        let obs = self.observe();
        Ok(Step { obs, reward, signals, termination: report })
    }
}

/// A finished episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub stats: EpisodeStats,
    pub termination: TerminationReport,
    /// Sum of the per-step rewards of the env's stage.
    pub total_reward: f64,
    pub trajectory: Trajectory,
}

/// Resets `env` with `seed` and runs `policy` until termination.
pub fn run_episode(env: &mut Env, policy: &mut dyn FnMut(&[f64]) -> Result<[f64; NUM_JOINTS]>, seed: u64) -> Result<EpisodeOutcome> {
    let mut obs = env.reset(seed)?;
    let mut total = 0.0;
    loop {
        let a = policy(&obs)?;
        let step = env.step(&a)?;
        total += step.reward;
        obs = step.obs;
        if step.termination.terminated {
            return Ok(EpisodeOutcome {
                stats: env.stats().clone(),
                termination: step.termination,
                total_reward: total,
                trajectory: env.take_trajectory(),
            });
        }
    }
}
