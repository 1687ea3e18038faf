use super::model::{PdGains, SpringMode, SpringSpec, NUM_JOINTS};
use super::state::SimState;
use crate::error::{Error, Result};

/// Joint-space PD law, clamped to the motor limits.
pub fn pd_torque(
    q_ref: &[f64; NUM_JOINTS],
    state: &SimState,
    gains: &PdGains,
    limit: &[f64; NUM_JOINTS],
) -> Result<[f64; NUM_JOINTS]> {
    if q_ref.iter().any(|v| !v.is_finite()) {
        return Err(Error::InputDomain("non-finite joint reference".into()));
    }
    if !(gains.kp.is_finite() && gains.kd.is_finite()) {
        return Err(Error::InputDomain("non-finite PD gains".into()));
    }
    Ok(pd_torque_unchecked(q_ref, &state.q, &state.qd, gains.kp, gains.kd, limit))
}

#[inline]
pub(crate) fn pd_torque_unchecked(
    q_ref: &[f64; NUM_JOINTS],
    q: &[f64; NUM_JOINTS],
    qd: &[f64; NUM_JOINTS],
    kp: f64,
    kd: f64,
    limit: &[f64; NUM_JOINTS],
) -> [f64; NUM_JOINTS] {
    let mut tau = [0.0; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        let raw = kp * (q_ref[i] - q[i]) - kd * qd[i];
        tau[i] = raw.clamp(-limit[i], limit[i]);
    }
    tau
}

/// Parallel spring torque `k (q - q_rest) + c qd` on the engaged joints.
///
/// `q` and `qd` are the commanded reference and its rate in
/// [`SpringMode::Commanded`](super::model::SpringMode::Commanded), or the
/// measured joint state in `Measured` mode; the caller picks which to pass.
pub fn spring_torque(q: &[f64; NUM_JOINTS], qd: &[f64; NUM_JOINTS], spec: &SpringSpec) -> [f64; NUM_JOINTS] {
    let mut tau = [0.0; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        if spec.engaged[i] {
            tau[i] = spec.stiffness[i] * (q[i] - spec.rest[i]) + spec.damping[i] * qd[i];
        }
    }
    tau
}

/// Spring torque for the spec's mode, from the reference or the measured
/// joint state.
pub fn spring_torque_for(
    q_ref: &[f64; NUM_JOINTS],
    qd_ref: &[f64; NUM_JOINTS],
    state: &SimState,
    spec: &SpringSpec,
) -> [f64; NUM_JOINTS] {
    match spec.mode {
        SpringMode::Commanded => spring_torque(q_ref, qd_ref, spec),
        SpringMode::Measured => spring_torque(&state.q, &state.qd, spec).map(|t| -t),
    }
}
