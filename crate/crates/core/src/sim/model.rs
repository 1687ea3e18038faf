//! Physical description of the planar quadruped.
//!
//! The sagittal model has a trunk and two legs (front, rear); each planar leg
//! stands for a mirrored left/right pair of the real robot. Joint numbering
//! per leg is calf, thigh, hip, so `q[0..3]` is the front leg and `q[3..6]`
//! the rear leg.

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 6;
pub const NUM_LEGS: usize = 2;

pub const FRONT_CALF: usize = 0;
pub const FRONT_THIGH: usize = 1;
pub const FRONT_HIP: usize = 2;
pub const REAR_CALF: usize = 3;
pub const REAR_THIGH: usize = 4;
pub const REAR_HIP: usize = 5;

/// Joint indices `(calf, thigh, hip)` of a leg.
pub const fn leg_joints(leg: usize) -> (usize, usize, usize) {
    (3 * leg, 3 * leg + 1, 3 * leg + 2)
}

pub fn is_sagittal_joint(joint: usize) -> bool {
    joint % 3 != 2
}

/// Nominal standing height of the trunk in the homing pose.
pub const STANDING_HEIGHT: f64 = 0.32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub mass: f64,
    pub length: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub trunk_mass: f64,
    pub trunk_inertia: f64,
    /// Trunk centre of mass in the trunk frame `(forward, up)`.
    pub trunk_com: [f64; 2],
    pub trunk_half_length: f64,
    pub trunk_half_height: f64,
    /// Forward offset of the front and rear hip joints in the trunk frame.
    pub hip_offset: [f64; NUM_LEGS],
    /// The abduction link. Its mass rides on the trunk at the hip joint and
    /// its inertia is that of the out-of-plane abduction rotor.
    pub hip: LinkParams,
    pub thigh: LinkParams,
    pub calf: LinkParams,
    /// Reflected rotor inertia added on every joint coordinate.
    pub armature: f64,
    /// Each planar leg stands for a left/right pair, so every planar joint is
    /// driven by this many motors. Torques are given per motor.
    pub motors_per_joint: f64,
    pub joint_lower: [f64; NUM_JOINTS],
    pub joint_upper: [f64; NUM_JOINTS],
    pub torque_limit: [f64; NUM_JOINTS],
    pub homing: [f64; NUM_JOINTS],
    pub standing_height: f64,
    pub foot_radius: f64,
    pub gravity: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        let thigh_len = 0.213;
        let calf_len = 0.213;
        let foot_radius = 0.02;
        // Feet straight below the hips at the nominal standing height.
        let knee_half = ((STANDING_HEIGHT - foot_radius) / (thigh_len + calf_len)).acos();
        let leg_home = [-2.0 * knee_half, knee_half, 0.0];
        let mut homing = [0.0; NUM_JOINTS];
        homing[..3].copy_from_slice(&leg_home);
        homing[3..].copy_from_slice(&leg_home);
        let leg_lower = [-2.6, -0.2, -0.5];
        let leg_upper = [-0.6, 1.8, 0.5];
        let mut joint_lower = [0.0; NUM_JOINTS];
        let mut joint_upper = [0.0; NUM_JOINTS];
        for leg in 0..NUM_LEGS {
            joint_lower[3 * leg..3 * leg + 3].copy_from_slice(&leg_lower);
            joint_upper[3 * leg..3 * leg + 3].copy_from_slice(&leg_upper);
        }
        RobotModel {
            trunk_mass: 6.0,
            trunk_inertia: 0.08,
            trunk_com: [0.0, 0.0],
            trunk_half_length: 0.19,
            trunk_half_height: 0.05,
            hip_offset: [0.1881, -0.1881],
            hip: LinkParams { mass: 0.7, length: 0.08, inertia: 0.002 },
            thigh: LinkParams { mass: 1.6, length: thigh_len, inertia: 1.6 * thigh_len * thigh_len / 12.0 },
            calf: LinkParams { mass: 0.7, length: calf_len, inertia: 0.7 * calf_len * calf_len / 12.0 },
            armature: 0.01,
            motors_per_joint: 2.0,
            joint_lower,
            joint_upper,
            torque_limit: [33.5; NUM_JOINTS],
            homing,
            standing_height: STANDING_HEIGHT,
            foot_radius,
            gravity: 9.81,
        }
    }
}

impl RobotModel {
    pub fn total_mass(&self) -> f64 {
        self.trunk_mass + NUM_LEGS as f64 * (self.hip.mass + self.thigh.mass + self.calf.mass)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("trunk_mass", self.trunk_mass),
            ("trunk_inertia", self.trunk_inertia),
            ("hip.mass", self.hip.mass),
            ("hip.length", self.hip.length),
            ("hip.inertia", self.hip.inertia),
            ("thigh.mass", self.thigh.mass),
            ("thigh.length", self.thigh.length),
            ("thigh.inertia", self.thigh.inertia),
            ("calf.mass", self.calf.mass),
            ("calf.length", self.calf.length),
            ("calf.inertia", self.calf.inertia),
            ("foot_radius", self.foot_radius),
            ("motors_per_joint", self.motors_per_joint),
            ("standing_height", self.standing_height),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("robot.{name} must be positive, got {v}")));
            }
        }
        if !(self.armature.is_finite() && self.armature >= 0.0) {
            return Err(Error::config("robot.armature must be non-negative"));
        }
        for j in 0..NUM_JOINTS {
            let (lo, hi) = (self.joint_lower[j], self.joint_upper[j]);
            if !(lo < hi) {
                return Err(Error::config(format!("joint {j}: lower limit {lo} not below upper {hi}")));
            }
            let home = self.homing[j];
            if !(lo < home && home < hi) {
                return Err(Error::config(format!("joint {j}: homing angle {home} outside ({lo}, {hi})")));
            }
            if !(self.torque_limit[j] > 0.0) {
                return Err(Error::config(format!("joint {j}: torque limit must be positive")));
            }
        }
        Ok(())
    }
}

/// Whether spring torque follows the commanded or the measured joint motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpringMode {
    /// `k(q_ref - q⁰) + c q̇_ref`, as the spring law is written.
    #[default]
    Commanded,
    /// Restoring `-k(q - q⁰) - c q̇` on the measured joint state.
    Measured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpringSpec {
    pub stiffness: [f64; NUM_JOINTS],
    pub damping: [f64; NUM_JOINTS],
    pub rest: [f64; NUM_JOINTS],
    pub engaged: [bool; NUM_JOINTS],
    pub mode: SpringMode,
}

impl SpringSpec {
    /// No joint engaged: the rigid robot.
    pub fn rigid(model: &RobotModel) -> Self {
        SpringSpec {
            stiffness: [0.0; NUM_JOINTS],
            damping: [0.0; NUM_JOINTS],
            rest: model.homing,
            engaged: [false; NUM_JOINTS],
            mode: SpringMode::Commanded,
        }
    }

    /// Thigh and calf springs engaged, resting at the homing pose.
    pub fn soft(model: &RobotModel) -> Self {
        let mut spec = Self::rigid(model);
        for j in 0..NUM_JOINTS {
            if is_sagittal_joint(j) {
                spec.stiffness[j] = 20.0;
                spec.damping[j] = 0.2;
                spec.engaged[j] = true;
            }
        }
        spec
    }

    pub fn any_engaged(&self) -> bool {
        self.engaged.iter().any(|&e| e)
    }

    pub fn validate(&self) -> Result<()> {
        for j in 0..NUM_JOINTS {
            if !(self.stiffness[j] >= 0.0 && self.damping[j] >= 0.0) {
                return Err(Error::config(format!("spring {j}: stiffness and damping must be >= 0")));
            }
            if !self.rest[j].is_finite() {
                return Err(Error::config(format!("spring {j}: rest angle not finite")));
            }
            if self.engaged[j] && !is_sagittal_joint(j) {
                return Err(Error::config(format!("spring {j}: only thigh and calf joints take springs")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
    /// Reduced `(kp, kd)` used while landing.
    pub landing: Option<(f64, f64)>,
}

impl Default for PdGains {
    fn default() -> Self {
        PdGains { kp: 55.0, kd: 0.8, landing: Some((40.0, 1.5)) }
    }
}

impl PdGains {
    pub fn nominal(&self) -> PdGains {
        PdGains { landing: None, ..*self }
    }

    pub fn landing_gains(&self) -> PdGains {
        match self.landing {
            Some((kp, kd)) => PdGains { kp, kd, landing: None },
            None => self.nominal(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0 && self.kp.is_finite()) {
            return Err(Error::config("pd.kp must be positive"));
        }
        if !(self.kd >= 0.0 && self.kd.is_finite()) {
            return Err(Error::config("pd.kd must be non-negative"));
        }
        if let Some((kp, kd)) = self.landing {
            if !(kp > 0.0 && kd >= 0.0) {
                return Err(Error::config("pd landing gains must be kp > 0, kd >= 0"));
            }
            // Landing lowers stiffness; the damping is allowed to rise.
            if kp > self.kp {
                return Err(Error::config("pd landing kp must not exceed the nominal kp"));
            }
        }
        Ok(())
    }
}

/// Penalty contact and joint-limit parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    pub normal_stiffness: f64,
    pub normal_damping: f64,
    pub friction: f64,
    pub tangent_stiffness: f64,
    pub tangent_damping: f64,
    pub limit_stiffness: f64,
    pub limit_damping: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            normal_stiffness: 1e5,
            normal_damping: 1e3,
            friction: 0.8,
            tangent_stiffness: 5e4,
            tangent_damping: 5e2,
            limit_stiffness: 1e3,
            limit_damping: 2.0,
        }
    }
}
