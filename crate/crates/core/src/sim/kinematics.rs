//! Forward kinematics of the planar chain.
//!
//! Link direction for an absolute angle `phi` (pitch plus the joint angles up
//! the chain) is `(-sin phi, -cos phi)`: zero points straight down and a
//! positive angle swings the distal end backward.

use super::model::{leg_joints, RobotModel, NUM_LEGS};
use super::state::SimState;

pub type P2 = [f64; 2];

#[inline]
pub(crate) fn rotate(theta: f64, v: P2) -> P2 {
    let (s, c) = theta.sin_cos();
    [v[0] * c + v[1] * s, -v[0] * s + v[1] * c]
}

#[inline]
pub(crate) fn link_dir(phi: f64) -> P2 {
    let (s, c) = phi.sin_cos();
    [-s, -c]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegPoints {
    pub hip: P2,
    pub knee: P2,
    pub foot: P2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyPoints {
    /// Trunk corners: front-top, front-bottom, rear-bottom, rear-top.
    pub trunk: [P2; 4],
    pub legs: [LegPoints; NUM_LEGS],
    pub com: P2,
}

pub fn body_points(model: &RobotModel, state: &SimState) -> BodyPoints {
    let base = [state.x, state.h];
    let add = |a: P2, b: P2| [a[0] + b[0], a[1] + b[1]];
    let scale = |a: P2, k: f64| [a[0] * k, a[1] * k];
    let (hl, hh) = (model.trunk_half_length, model.trunk_half_height);
    let trunk = [[hl, hh], [hl, -hh], [-hl, -hh], [-hl, hh]].map(|c| add(base, rotate(state.theta, c)));

    let mut mass_pos = scale(add(base, rotate(state.theta, model.trunk_com)), model.trunk_mass);
    let mut legs = [LegPoints { hip: base, knee: base, foot: base }; NUM_LEGS];
    for (leg, out) in legs.iter_mut().enumerate() {
        let (calf, thigh, _) = leg_joints(leg);
        let hip = add(base, rotate(state.theta, [model.hip_offset[leg], 0.0]));
        let phi_t = state.theta + state.q[thigh];
        let knee = add(hip, scale(link_dir(phi_t), model.thigh.length));
        let phi_c = phi_t + state.q[calf];
        let foot = add(knee, scale(link_dir(phi_c), model.calf.length));
        *out = LegPoints { hip, knee, foot };

        let thigh_com = scale(add(hip, knee), 0.5);
        let calf_com = scale(add(knee, foot), 0.5);
        mass_pos = add(mass_pos, scale(hip, model.hip.mass));
        mass_pos = add(mass_pos, scale(thigh_com, model.thigh.mass));
        mass_pos = add(mass_pos, scale(calf_com, model.calf.mass));
    }
    let com = scale(mass_pos, 1.0 / model.total_mass());
    BodyPoints { trunk, legs, com }
}

fn orient(a: P2, b: P2, c: P2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Proper intersection of two closed segments.
pub fn segments_intersect(p1: P2, p2: P2, q1: P2, q2: P2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionFlags {
    pub fallen: bool,
    pub knee_or_link_collision: bool,
    /// Dot product of the trunk's up axis with the world up axis.
    pub trunk_tilt_dot: f64,
}

pub const FALL_HEIGHT: f64 = 0.1;

pub fn collision_flags(model: &RobotModel, state: &SimState) -> CollisionFlags {
    let pts = body_points(model, state);
    let knee_down = pts.legs.iter().any(|l| l.knee[1] <= 0.0);
    let trunk_down = pts.trunk.iter().any(|c| c[1] <= 0.0);
    let [front, rear] = pts.legs;
    let front_segs = [(front.hip, front.knee), (front.knee, front.foot)];
    let rear_segs = [(rear.hip, rear.knee), (rear.knee, rear.foot)];
    let legs_cross = front_segs
        .iter()
        .any(|&(a, b)| rear_segs.iter().any(|&(c, d)| segments_intersect(a, b, c, d)));
    CollisionFlags {
        fallen: state.h < FALL_HEIGHT,
        knee_or_link_collision: knee_down || trunk_down || legs_cross,
        trunk_tilt_dot: state.theta.cos(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: P2, b: P2) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn homing_pose_geometry() {
        let m = RobotModel::default();
        let s = SimState::at_pose(m.homing, m.standing_height);
        let pts = body_points(&m, &s);
        for leg in pts.legs {
            assert!((dist(leg.hip, leg.knee) - m.thigh.length).abs() < 1e-12);
            assert!((dist(leg.knee, leg.foot) - m.calf.length).abs() < 1e-12);
            // Foot directly below the hip, touching the ground.
            assert!((leg.foot[0] - leg.hip[0]).abs() < 1e-12);
            assert!((leg.foot[1] - m.foot_radius).abs() < 1e-12);
            // Knee points backward.
            assert!(leg.knee[0] < leg.hip[0]);
        }
    }

    #[test]
    fn fallen_below_threshold() {
        let m = RobotModel::default();
        let mut s = SimState::at_pose(m.homing, 0.05);
        assert!(collision_flags(&m, &s).fallen);
        s.h = 0.32;
        assert!(!collision_flags(&m, &s).fallen);
    }

    #[test]
    fn tilt_dot_is_cosine() {
        let m = RobotModel::default();
        let mut s = SimState::at_pose(m.homing, 0.32);
        assert_eq!(collision_flags(&m, &s).trunk_tilt_dot, 1.0);
        s.theta = 0.6;
        let d = collision_flags(&m, &s).trunk_tilt_dot;
        assert!((d - 0.8253356149).abs() < 1e-9);
        assert!(d < 0.85);
    }

    #[test]
    fn knee_on_ground_is_collision() {
        let m = RobotModel::default();
        let mut s = SimState::at_pose(m.homing, 0.32);
        assert!(!collision_flags(&m, &s).knee_or_link_collision);
        // Drop the trunk so the knees sit below ground.
        s.h = 0.12;
        assert!(collision_flags(&m, &s).knee_or_link_collision);
    }

    #[test]
    fn crossing_segments() {
        assert!(segments_intersect([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]));
        assert!(!segments_intersect([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]));
    }
}
