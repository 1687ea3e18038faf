//! Behavior selector: take-off, flight and landing phases plus the action
//! conversion that feeds the PD loop.

use crate::sim::{PdGains, NUM_JOINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    TakeOff,
    Flight,
    Landing,
}

impl Phase {
    pub fn index(self) -> usize {
        match self {
            Phase::TakeOff => 0,
            Phase::Flight => 1,
            Phase::Landing => 2,
        }
    }
}

/// One guard evaluation. `settled` is only consulted for repeating tasks and
/// says the landing has held still long enough to re-arm.
pub fn advance_phase(phase: Phase, f_contact: f64, hd: f64, repeats: bool, settled: bool) -> Phase {
    match phase {
        Phase::TakeOff if f_contact == 0.0 => Phase::Flight,
        Phase::Flight if hd < 0.0 && f_contact > 0.0 => Phase::Landing,
        Phase::Landing if repeats && settled => Phase::TakeOff,
        p => p,
    }
}

/// Phase tracker with the pronking re-arm timer.
#[derive(Debug, Clone)]
pub struct PhaseMachine {
    pub phase: Phase,
    repeats: bool,
    window: f64,
    speed: f64,
    settled_for: f64,
}

impl PhaseMachine {
    pub fn new(repeats: bool, window: f64, speed: f64) -> Self {
        PhaseMachine { phase: Phase::TakeOff, repeats, window, speed, settled_for: 0.0 }
    }

    /// Advances by `dt` of elapsed time and returns the new phase.
    pub fn update(&mut self, f_contact: f64, hd: f64, dt: f64) -> Phase {
        if self.phase == Phase::Landing && f_contact > 0.0 && hd.abs() < self.speed {
            self.settled_for += dt;
        } else {
            self.settled_for = 0.0;
        }
        let settled = self.settled_for >= self.window - 1e-12;
        let next = advance_phase(self.phase, f_contact, hd, self.repeats, settled);
        if next != self.phase {
            self.settled_for = 0.0;
        }
        self.phase = next;
        next
    }
}

/// Linear map from `[-1, 1]` to `[lower, upper]`, clamping the action first.
pub fn scale_action(a: &[f64; NUM_JOINTS], lower: &[f64; NUM_JOINTS], upper: &[f64; NUM_JOINTS]) -> [f64; NUM_JOINTS] {
    let mut q = [0.0; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        let mid = 0.5 * (lower[i] + upper[i]);
        let half = 0.5 * (upper[i] - lower[i]);
        q[i] = mid + a[i].clamp(-1.0, 1.0) * half;
    }
    q
}

/// Inverse of [`scale_action`] (unclamped).
pub fn unscale_action(q: &[f64; NUM_JOINTS], lower: &[f64; NUM_JOINTS], upper: &[f64; NUM_JOINTS]) -> [f64; NUM_JOINTS] {
    let mut a = [0.0; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        let mid = 0.5 * (lower[i] + upper[i]);
        let half = 0.5 * (upper[i] - lower[i]);
        a[i] = (q[i] - mid) / half;
    }
    a
}

/// First-order low-pass `alpha * a + (1 - alpha) * prev`.
pub fn filter_action(a: &[f64; NUM_JOINTS], prev: &[f64; NUM_JOINTS], alpha: f64) -> [f64; NUM_JOINTS] {
    let mut out = [0.0; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        out[i] = alpha * a[i] + (1.0 - alpha) * prev[i];
    }
    out
}

/// Reference and gains the selector hands to the PD loop.
pub fn phase_action(
    phase: Phase,
    policy_ref: &[f64; NUM_JOINTS],
    homing: &[f64; NUM_JOINTS],
    gains: &PdGains,
) -> ([f64; NUM_JOINTS], PdGains) {
    match phase {
        Phase::TakeOff => (*policy_ref, gains.nominal()),
        Phase::Flight => (*homing, gains.nominal()),
        Phase::Landing => (*homing, gains.landing_gains()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_table() {
        use Phase::*;
        // (phase, F, hd, repeats, settled) -> expected
        let cases = [
            (TakeOff, 0.0, 0.5, false, false, Flight),
            (TakeOff, 0.0, -0.5, false, false, Flight),
            (TakeOff, 10.0, 0.5, false, false, TakeOff),
            (TakeOff, 1e-9, 2.0, false, false, TakeOff),
            (Flight, 500.0, -1.0, false, false, Landing),
            (Flight, 0.0, -1.0, false, false, Flight),
            (Flight, 500.0, 0.3, false, false, Flight),
            (Flight, 500.0, 0.0, false, false, Flight),
            (Landing, 0.0, 1.0, false, false, Landing),
            (Landing, 0.0, 1.0, false, true, Landing),
            (Landing, 300.0, 0.0, true, false, Landing),
            (Landing, 300.0, 0.0, true, true, TakeOff),
        ];
        for (phase, f, hd, rep, settled, want) in cases {
            assert_eq!(advance_phase(phase, f, hd, rep, settled), want, "{phase:?} F={f} hd={hd}");
        }
    }

    #[test]
    fn landing_never_jumps_to_flight() {
        for f in [0.0, 1.0] {
            for hd in [-1.0, 0.0, 1.0] {
                for rep in [false, true] {
                    for settled in [false, true] {
                        assert_ne!(advance_phase(Phase::Landing, f, hd, rep, settled), Phase::Flight);
                    }
                }
            }
        }
    }

    #[test]
    fn rearm_after_window() {
        let mut m = PhaseMachine::new(true, 0.1, 0.1);
        m.phase = Phase::Landing;
        for _ in 0..99 {
            assert_eq!(m.update(200.0, 0.01, 0.001), Phase::Landing);
        }
        assert_eq!(m.update(200.0, 0.01, 0.001), Phase::TakeOff);
        // Moving too fast resets the timer.
        let mut m = PhaseMachine::new(true, 0.1, 0.1);
        m.phase = Phase::Landing;
        for k in 0..300 {
            let hd = if k % 50 == 0 { 0.5 } else { 0.0 };
            assert_eq!(m.update(200.0, hd, 0.001), Phase::Landing);
        }
        // Single jumps never re-arm.
        let mut m = PhaseMachine::new(false, 0.1, 0.1);
        m.phase = Phase::Landing;
        for _ in 0..1000 {
            assert_eq!(m.update(200.0, 0.0, 0.001), Phase::Landing);
        }
    }

    #[test]
    fn scaling() {
        let lo = [-1.0; 6];
        let hi = [3.0; 6];
        assert_eq!(scale_action(&[0.0; 6], &lo, &hi), [1.0; 6]);
        assert_eq!(scale_action(&[1.0; 6], &lo, &hi), hi);
        assert_eq!(scale_action(&[-1.0; 6], &lo, &hi), lo);
        assert_eq!(scale_action(&[0.5; 6], &lo, &hi), [2.0; 6]);
        assert_eq!(scale_action(&[7.0; 6], &lo, &hi), hi);
        let q = [0.3, -0.2, 1.0, 2.5, -0.9, 0.0];
        let back = scale_action(&unscale_action(&q, &lo, &hi), &lo, &hi);
        for i in 0..6 {
            assert!((back[i] - q[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn filter_cases() {
        let a = [1.0; 6];
        assert_eq!(filter_action(&a, &[0.0; 6], 1.0), a);
        let out = filter_action(&a, &[0.0; 6], 0.3);
        assert!((out[0] - 0.3).abs() < 1e-15);
        // Held input converges geometrically: gap after n steps is (1 - alpha)^n.
        let mut prev = [0.0; 6];
        for n in 1..=30 {
            prev = filter_action(&a, &prev, 0.3);
            let gap = 1.0 - prev[2];
            assert!((gap - 0.7f64.powi(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn selector_outputs() {
        let gains = PdGains::default();
        let policy = [0.5; 6];
        let home = [0.1; 6];
        assert_eq!(phase_action(Phase::TakeOff, &policy, &home, &gains), (policy, gains.nominal()));
        assert_eq!(phase_action(Phase::Flight, &policy, &home, &gains).0, home);
        let (q, g) = phase_action(Phase::Landing, &policy, &home, &gains);
        assert_eq!(q, home);
        assert!(g.kp < gains.kp);
    }
}
