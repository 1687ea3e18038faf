use super::model::{NUM_JOINTS, NUM_LEGS};

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Trunk reference point `(x, h)` in metres.
    pub x: f64,
    pub h: f64,
    /// Trunk pitch, unwrapped.
    pub theta: f64,
    pub xd: f64,
    pub hd: f64,
    pub thetad: f64,
    pub q: [f64; NUM_JOINTS],
    pub qd: [f64; NUM_JOINTS],
    /// Normal force on each foot (front, rear).
    pub foot_force: [f64; NUM_LEGS],
    /// Sticking point of each foot while in contact.
    pub foot_anchor: [Option<f64>; NUM_LEGS],
    pub t: f64,
    pub step: u64,
}

impl SimState {
    /// Robot resting in `pose` with the trunk at height `h`, everything at rest.
    pub fn at_pose(pose: [f64; NUM_JOINTS], h: f64) -> Self {
        SimState {
            x: 0.0,
            h,
            theta: 0.0,
            xd: 0.0,
            hd: 0.0,
            thetad: 0.0,
            q: pose,
            qd: [0.0; NUM_JOINTS],
            foot_force: [0.0; NUM_LEGS],
            foot_anchor: [None; NUM_LEGS],
            t: 0.0,
            step: 0,
        }
    }

    pub fn generalized_position(&self) -> [f64; 9] {
        let mut g = [0.0; 9];
        g[0] = self.x;
        g[1] = self.h;
        g[2] = self.theta;
        g[3..].copy_from_slice(&self.q);
        g
    }

    pub fn generalized_velocity(&self) -> [f64; 9] {
        let mut g = [0.0; 9];
        g[0] = self.xd;
        g[1] = self.hd;
        g[2] = self.thetad;
        g[3..].copy_from_slice(&self.qd);
        g
    }

    pub(crate) fn set_generalized(&mut self, pos: &[f64; 9], vel: &[f64; 9]) {
        self.x = pos[0];
        self.h = pos[1];
        self.theta = pos[2];
        self.q.copy_from_slice(&pos[3..]);
        self.xd = vel[0];
        self.hd = vel[1];
        self.thetad = vel[2];
        self.qd.copy_from_slice(&vel[3..]);
    }

    pub fn is_finite(&self) -> bool {
        self.generalized_position().iter().all(|v| v.is_finite())
            && self.generalized_velocity().iter().all(|v| v.is_finite())
            && self.foot_force.iter().all(|v| v.is_finite())
    }
}

/// Aggregate ground reaction on the feet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSummary {
    pub total: f64,
    pub legs_in_contact: usize,
    pub average: f64,
}

pub fn contact_summary(state: &SimState) -> ContactSummary {
    let total: f64 = state.foot_force.iter().sum();
    let legs_in_contact = state.foot_force.iter().filter(|&&f| f > 0.0).count();
    let average = if legs_in_contact == 0 { 0.0 } else { total / legs_in_contact as f64 };
    ContactSummary { total, legs_in_contact, average }
}
