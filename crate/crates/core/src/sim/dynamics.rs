//! Planar multibody dynamics with penalty contact.
//!
//! Generalized coordinates are `[x, h, theta, q0..q5]`. The mass matrix and
//! bias forces are assembled from per-body point Jacobians (Kane's form):
//! `M qdd = sum_b m_b J_b^T (g - a_vp,b) + tau + J_c^T F_c`, where `a_vp` is
//! the velocity-product acceleration of each body's centre of mass.

use nalgebra::{SMatrix, SVector};

use super::kinematics::{link_dir, rotate, P2};
use super::model::{leg_joints, ContactParams, RobotModel, NUM_JOINTS, NUM_LEGS};
use super::state::SimState;
use crate::error::{Error, Result};

pub const NGC: usize = 9;
pub const MAX_DT: f64 = 0.005;

type Mat = SMatrix<f64, NGC, NGC>;
type Vector = SVector<f64, NGC>;

#[derive(Clone, Copy)]
struct Point {
    pos: P2,
    /// Rows are the x and z components.
    jac: [[f64; NGC]; 2],
    vp: P2,
}

impl Point {
    fn velocity(&self, v: &[f64; NGC]) -> P2 {
        let mut out = [0.0; 2];
        for (o, row) in out.iter_mut().zip(&self.jac) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// `self + len * link_dir(phi)` with `phi` depending on the listed coordinates.
    fn extend(&self, len: f64, phi: f64, omega: f64, coords: &[usize]) -> Point {
        let d = link_dir(phi);
        let dd = [-phi.cos(), phi.sin()];
        let mut jac = self.jac;
        for &c in coords {
            jac[0][c] += len * dd[0];
            jac[1][c] += len * dd[1];
        }
        Point {
            pos: [self.pos[0] + len * d[0], self.pos[1] + len * d[1]],
            jac,
            vp: [self.vp[0] - len * d[0] * omega * omega, self.vp[1] - len * d[1] * omega * omega],
        }
    }
}

#[derive(Clone, Copy)]
struct LegKin {
    knee: Point,
    foot: Point,
    thigh_com: Point,
    calf_com: Point,
}

/// Rigid trunk including the hip-link masses.
#[derive(Debug, Clone, Copy)]
struct TrunkBody {
    mass: f64,
    com: P2,
    inertia: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct ContactEval {
    normal: [f64; NUM_LEGS],
    foot_x: [f64; NUM_LEGS],
}

#[derive(Debug, Clone)]
pub struct Simulator {
    model: RobotModel,
    contact: ContactParams,
    trunk: TrunkBody,
}

impl Simulator {
    pub fn new(model: RobotModel, contact: ContactParams) -> Result<Self> {
        model.validate()?;
        let mut mass = model.trunk_mass;
        let mut moment = [model.trunk_mass * model.trunk_com[0], model.trunk_mass * model.trunk_com[1]];
        for &hx in &model.hip_offset {
            mass += model.hip.mass;
            moment[0] += model.hip.mass * hx;
        }
        let com = [moment[0] / mass, moment[1] / mass];
        let sq = |p: P2| (p[0] - com[0]).powi(2) + (p[1] - com[1]).powi(2);
        let mut inertia = model.trunk_inertia + model.trunk_mass * sq(model.trunk_com);
        for &hx in &model.hip_offset {
            inertia += model.hip.mass * sq([hx, 0.0]);
        }
        Ok(Simulator { model, contact, trunk: TrunkBody { mass, com, inertia } })
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn contact_params(&self) -> &ContactParams {
        &self.contact
    }

    fn base_point(&self, pos: &[f64; NGC], vel: &[f64; NGC], offset: P2) -> Point {
        let theta = pos[2];
        let r = rotate(theta, offset);
        let dr = [-offset[0] * theta.sin() + offset[1] * theta.cos(), -offset[0] * theta.cos() - offset[1] * theta.sin()];
        let mut jac = [[0.0; NGC]; 2];
        jac[0][0] = 1.0;
        jac[1][1] = 1.0;
        jac[0][2] = dr[0];
        jac[1][2] = dr[1];
        let w2 = vel[2] * vel[2];
        Point { pos: [pos[0] + r[0], pos[1] + r[1]], jac, vp: [-r[0] * w2, -r[1] * w2] }
    }

    fn leg_kinematics(&self, pos: &[f64; NGC], vel: &[f64; NGC], leg: usize) -> LegKin {
        let m = &self.model;
        let (calf, thigh, _) = leg_joints(leg);
        let (ct, cc) = (3 + thigh, 3 + calf);
        let hip = self.base_point(pos, vel, [m.hip_offset[leg], 0.0]);
        let phi_t = pos[2] + pos[ct];
        let om_t = vel[2] + vel[ct];
        let phi_c = phi_t + pos[cc];
        let om_c = om_t + vel[cc];
        let knee = hip.extend(m.thigh.length, phi_t, om_t, &[2, ct]);
        let thigh_com = hip.extend(0.5 * m.thigh.length, phi_t, om_t, &[2, ct]);
        let foot = knee.extend(m.calf.length, phi_c, om_c, &[2, ct, cc]);
        let calf_com = knee.extend(0.5 * m.calf.length, phi_c, om_c, &[2, ct, cc]);
        LegKin { knee, foot, thigh_com, calf_com }
    }

    fn mass_matrix_and_bias(&self, pos: &[f64; NGC], vel: &[f64; NGC]) -> (Mat, Vector, [LegKin; NUM_LEGS]) {
        let m = &self.model;
        let g = m.gravity;
        let mut mm = Mat::zeros();
        let mut q = Vector::zeros();

        let add_point_mass = |p: &Point, mass: f64, mm: &mut Mat, q: &mut Vector| {
            let (jx, jz) = (&p.jac[0], &p.jac[1]);
            let force = [-mass * p.vp[0], mass * (-g - p.vp[1])];
            for i in 0..NGC {
                if jx[i] == 0.0 && jz[i] == 0.0 {
                    continue;
                }
                q[i] += jx[i] * force[0] + jz[i] * force[1];
                for j in i..NGC {
                    let v = mass * (jx[i] * jx[j] + jz[i] * jz[j]);
                    if v != 0.0 {
                        mm[(i, j)] += v;
                    }
                }
            }
        };

        let trunk = self.base_point(pos, vel, self.trunk.com);
        add_point_mass(&trunk, self.trunk.mass, &mut mm, &mut q);
        mm[(2, 2)] += self.trunk.inertia;

        let legs = [self.leg_kinematics(pos, vel, 0), self.leg_kinematics(pos, vel, 1)];
        for (leg, kin) in legs.iter().enumerate() {
            let (calf, thigh, hip) = leg_joints(leg);
            let (cc, ct, ch) = (3 + calf, 3 + thigh, 3 + hip);
            add_point_mass(&kin.thigh_com, m.thigh.mass, &mut mm, &mut q);
            add_point_mass(&kin.calf_com, m.calf.mass, &mut mm, &mut q);
            // Rotational inertia: thigh spins at theta + q_t, calf at theta + q_t + q_c.
            // Upper triangle only (calf coordinate precedes thigh).
            for &(i, j) in &[(2, 2), (2, ct), (ct, ct)] {
                mm[(i, j)] += m.thigh.inertia;
            }
            for &(i, j) in &[(2, 2), (2, ct), (2, cc), (ct, ct), (cc, ct), (cc, cc)] {
                mm[(i, j)] += m.calf.inertia;
            }
            mm[(ct, ct)] += m.armature;
            mm[(cc, cc)] += m.armature;
            mm[(ch, ch)] += m.hip.inertia + m.armature;
        }
        for i in 0..NGC {
            for j in 0..i {
                mm[(i, j)] = mm[(j, i)];
            }
        }
        (mm, q, legs)
    }

    /// Generalized accelerations for the given applied joint torques.
    fn acceleration(
        &self,
        pos: &[f64; NGC],
        vel: &[f64; NGC],
        tau: &[f64; NUM_JOINTS],
        anchors: &[Option<f64>; NUM_LEGS],
        dt: f64,
    ) -> Option<([f64; NGC], ContactEval)> {
        let (mut mm, mut q, legs) = self.mass_matrix_and_bias(pos, vel);
        let m = &self.model;
        let c = &self.contact;

        for j in 0..NUM_JOINTS {
            let (qj, qdj) = (pos[3 + j], vel[3 + j]);
            let mut t = m.motors_per_joint * tau[j];
            if qj < m.joint_lower[j] {
                t += c.limit_stiffness * (m.joint_lower[j] - qj) - c.limit_damping * qdj;
                mm[(3 + j, 3 + j)] += dt * c.limit_damping;
            } else if qj > m.joint_upper[j] {
                t += c.limit_stiffness * (m.joint_upper[j] - qj) - c.limit_damping * qdj;
                mm[(3 + j, 3 + j)] += dt * c.limit_damping;
            }
            q[3 + j] += t;
        }

        let mut eval = ContactEval::default();
        let apply = |p: &Point, f: P2, q: &mut Vector| {
            for i in 0..NGC {
                q[i] += p.jac[0][i] * f[0] + p.jac[1][i] * f[1];
            }
        };
        // Damping along an active contact direction is taken implicitly.
        let damp = |p: &Point, axis: usize, d: f64, mm: &mut Mat| {
            let jac = &p.jac[axis];
            for i in 0..NGC {
                if jac[i] == 0.0 {
                    continue;
                }
                for j in 0..NGC {
                    mm[(i, j)] += dt * d * jac[i] * jac[j];
                }
            }
        };
        for (leg, kin) in legs.iter().enumerate() {
            let foot = &kin.foot;
            eval.foot_x[leg] = foot.pos[0];
            let pen = m.foot_radius - foot.pos[1];
            if pen > 0.0 {
                let v = foot.velocity(vel);
                let fn_ = (c.normal_stiffness * pen - c.normal_damping * v[1]).max(0.0);
                let anchor = anchors[leg].unwrap_or(foot.pos[0]);
                let cap = c.friction * fn_;
                let ft_raw = -c.tangent_stiffness * (foot.pos[0] - anchor) - c.tangent_damping * v[0];
                let ft = ft_raw.clamp(-cap, cap);
                eval.normal[leg] = fn_;
                apply(foot, [ft, fn_], &mut q);
                if fn_ > 0.0 {
                    damp(foot, 1, c.normal_damping, &mut mm);
                }
                if ft_raw.abs() < cap {
                    damp(foot, 0, c.tangent_damping, &mut mm);
                }
            }
            let knee = &kin.knee;
            if knee.pos[1] < 0.0 {
                let v = knee.velocity(vel);
                let fn_ = (-c.normal_stiffness * knee.pos[1] - c.normal_damping * v[1]).max(0.0);
                let cap = c.friction * fn_;
                let ft_raw = -c.tangent_damping * v[0];
                let ft = ft_raw.clamp(-cap, cap);
                apply(knee, [ft, fn_], &mut q);
                if fn_ > 0.0 {
                    damp(knee, 1, c.normal_damping, &mut mm);
                }
                if ft_raw.abs() < cap {
                    damp(knee, 0, c.tangent_damping, &mut mm);
                }
            }
        }

        let chol = mm.cholesky()?;
        let a = chol.solve(&q);
        let mut out = [0.0; NGC];
        out.copy_from_slice(a.as_slice());
        Some((out, eval))
    }

    /// Advances the state by `dt` under constant per-motor joint torques.
    ///
    /// Velocity-Verlet: positions take the full second-order Taylor step, and
    /// velocities average the accelerations at both ends (velocity-dependent
    /// terms at the end use the Euler-predicted velocity). Contact and limit
    /// damping enter linearly implicitly so the stiff contact stays stable.
    pub fn step(&self, state: &SimState, tau: &[f64; NUM_JOINTS], dt: f64) -> Result<SimState> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::InputDomain(format!("dt {dt} outside (0, {MAX_DT}]")));
        }
        let diverged = || Error::SimulationDiverged { step: state.step };
        let p0 = state.generalized_position();
        let v0 = state.generalized_velocity();
        let (a0, _) = self.acceleration(&p0, &v0, tau, &state.foot_anchor, dt).ok_or_else(diverged)?;
        let mut p1 = [0.0; NGC];
        let mut vp = [0.0; NGC];
        for i in 0..NGC {
            p1[i] = p0[i] + dt * v0[i] + 0.5 * dt * dt * a0[i];
            vp[i] = v0[i] + dt * a0[i];
        }
        let (a1, contact) = self.acceleration(&p1, &vp, tau, &state.foot_anchor, dt).ok_or_else(diverged)?;
        let mut v1 = [0.0; NGC];
        for i in 0..NGC {
            v1[i] = v0[i] + 0.5 * dt * (a0[i] + a1[i]);
        }

        let mut next = state.clone();
        next.set_generalized(&p1, &v1);
        next.foot_force = contact.normal;
        for leg in 0..NUM_LEGS {
            let fn_ = contact.normal[leg];
            next.foot_anchor[leg] = if fn_ > 0.0 {
                let x = contact.foot_x[leg];
                let mut a = state.foot_anchor[leg].unwrap_or(x);
                let spring = self.contact.tangent_stiffness * (x - a);
                let cap = self.contact.friction * fn_;
                if spring.abs() > cap {
                    a = x - spring.signum() * cap / self.contact.tangent_stiffness;
                }
                Some(a)
            } else {
                None
            };
        }
        next.t = state.t + dt;
        next.step = state.step + 1;
        if !next.is_finite() {
            return Err(diverged());
        }
        Ok(next)
    }

    /// Total mechanical energy: kinetic, gravitational, and the elastic energy
    /// stored in the penalty springs (contact and joint limits).
    pub fn energy(&self, state: &SimState) -> f64 {
        let pos = state.generalized_position();
        let vel = state.generalized_velocity();
        let (mm, _, legs) = self.mass_matrix_and_bias(&pos, &vel);
        let v = Vector::from_column_slice(&vel);
        let kinetic = 0.5 * (v.transpose() * mm * v)[(0, 0)];

        let m = &self.model;
        let g = m.gravity;
        let trunk = self.base_point(&pos, &vel, self.trunk.com);
        let mut potential = self.trunk.mass * g * trunk.pos[1];
        let c = &self.contact;
        for (leg, kin) in legs.iter().enumerate() {
            potential += m.thigh.mass * g * kin.thigh_com.pos[1] + m.calf.mass * g * kin.calf_com.pos[1];
            let pen = m.foot_radius - kin.foot.pos[1];
            if pen > 0.0 {
                potential += 0.5 * c.normal_stiffness * pen * pen;
                if let Some(a) = state.foot_anchor[leg] {
                    potential += 0.5 * c.tangent_stiffness * (kin.foot.pos[0] - a).powi(2);
                }
            }
            if kin.knee.pos[1] < 0.0 {
                potential += 0.5 * c.normal_stiffness * kin.knee.pos[1].powi(2);
            }
        }
        for j in 0..NUM_JOINTS {
            let qj = state.q[j];
            let excess = if qj < m.joint_lower[j] {
                m.joint_lower[j] - qj
            } else if qj > m.joint_upper[j] {
                qj - m.joint_upper[j]
            } else {
                0.0
            };
            potential += 0.5 * c.limit_stiffness * excess * excess;
        }
        kinetic + potential
    }

    /// Trunk reference height at which the feet just touch the ground in `pose`.
    pub fn touchdown_height(&self, pose: &[f64; NUM_JOINTS]) -> f64 {
        let probe = SimState::at_pose(*pose, 0.0);
        let pts = super::kinematics::body_points(&self.model, &probe);
        let lowest = pts.legs.iter().map(|l| l.foot[1]).fold(f64::INFINITY, f64::min);
        self.model.foot_radius - lowest
    }
}
