use acrobat::sim::{pd_torque, ContactParams, PdGains, RobotModel, SimState, Simulator};

const DT: f64 = 0.001;

fn sim() -> Simulator {
    Simulator::new(RobotModel::default(), ContactParams::default()).unwrap()
}

fn frictionless_sim() -> Simulator {
    let contact = ContactParams { friction: 0.0, ..ContactParams::default() };
    Simulator::new(RobotModel::default(), contact).unwrap()
}

/// Launching the whole robot upward with zero joint torque keeps the joint
/// configuration fixed, so the trunk must follow the ballistic closed form.
#[test]
fn ballistic_apex_matches_closed_form() {
    let s = sim();
    let g = s.model().gravity;
    for v0 in [1.0, 2.0, 3.0] {
        let mut st = SimState::at_pose(s.model().homing, 1.0);
        st.hd = v0;
        let h0 = st.h;
        let mut apex = h0;
        while st.hd > -0.5 {
            st = s.step(&st, &[0.0; 6], DT).unwrap();
            apex = apex.max(st.h);
        }
        let expected = v0 * v0 / (2.0 * g);
        let gain = apex - h0;
        assert!((gain - expected).abs() < 0.01 * expected, "v0={v0}: gain {gain} vs {expected}");
    }
}

#[test]
fn free_air_energy_is_conserved() {
    let s = frictionless_sim();
    let mut st = SimState::at_pose(s.model().homing, 1.5);
    st.hd = 2.0;
    st.xd = 0.4;
    st.thetad = 0.8;
    st.qd = [1.5, -1.0, 0.8, -0.7, 1.2, -0.5];
    let e0 = s.energy(&st);
    let mut worst: f64 = 0.0;
    // Airborne for the whole half second.
    for _ in 0..500 {
        st = s.step(&st, &[0.0; 6], DT).unwrap();
        assert_eq!(st.foot_force, [0.0, 0.0]);
        worst = worst.max((s.energy(&st) - e0).abs());
    }
    let rate = worst / e0.abs() / 0.5;
    assert!(rate < 1e-3, "energy drift {rate} per second");
}

#[test]
fn standing_pose_settles_to_static_equilibrium() {
    let s = sim();
    let m = s.model().clone();
    let gains = PdGains::default();
    let mut st = SimState::at_pose(m.homing, s.touchdown_height(&m.homing));
    let hold = |st: &SimState| pd_torque(&m.homing, st, &gains, &m.torque_limit).unwrap();
    // The sway mode is lightly damped at these gains; give it time to die out.
    for _ in 0..15_000 {
        st = s.step(&st, &hold(&st), DT).unwrap();
    }
    let before = st.clone();
    for _ in 0..100 {
        st = s.step(&st, &hold(&st), DT).unwrap();
    }
    let a = before.generalized_position();
    let b = st.generalized_position();
    let drift = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-6, "drift {drift}");
    assert!(st.foot_force.iter().all(|&f| f > 0.0));
    let total: f64 = st.foot_force.iter().sum();
    let weight = m.total_mass() * m.gravity;
    assert!((total - weight).abs() < 0.01 * weight, "{total} vs {weight}");
    assert!(st.theta.abs() < 0.05 && (st.h - m.standing_height).abs() < 0.03);
}

#[test]
fn trajectories_are_bit_identical() {
    let s = sim();
    let run = || {
        let mut st = SimState::at_pose(s.model().homing, 0.35);
        let mut log = Vec::new();
        for k in 0..500 {
            let tau = [((k as f64) * 0.01).sin() * 20.0; 6];
            st = s.step(&st, &tau, DT).unwrap();
            log.push(st.clone());
        }
        log
    };
    assert_eq!(run(), run());
}

#[test]
fn contact_force_is_one_sided() {
    let s = sim();
    let m = s.model().clone();
    let mut st = SimState::at_pose(m.homing, 0.45);
    for k in 0..1500 {
        let tau = [if k % 300 < 150 { 15.0 } else { -15.0 }; 6];
        st = s.step(&st, &tau, DT).unwrap();
        let pts = acrobat::sim::body_points(&m, &st);
        for leg in 0..2 {
            assert!(st.foot_force[leg] >= 0.0);
            if pts.legs[leg].foot[1] > m.foot_radius {
                assert_eq!(st.foot_force[leg], 0.0);
            }
        }
    }
}
