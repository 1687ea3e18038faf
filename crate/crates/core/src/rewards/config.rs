use super::Kernel;
use crate::error::{Error, Result};

/// Sparse stage-1 constants, jumping in place.
#[derive(Debug, Clone, PartialEq)]
pub struct JipStage1 {
    /// Height normalization cap.
    pub h_f: f64,
    pub theta: Kernel,
    pub d: Kernel,
    /// Distance normalization cap (not tabulated for this task).
    pub d_f: f64,
    pub c_h: f64,
    pub b: f64,
    pub q: f64,
    pub m: f64,
}

/// Sparse stage-1 constants, jumping forward.
#[derive(Debug, Clone, PartialEq)]
pub struct JfStage1 {
    pub h_f: f64,
    pub theta: Kernel,
    /// Distance normalization cap.
    pub d_f: f64,
    pub c_d: f64,
    pub c_h: f64,
    pub b: f64,
    pub q: f64,
    pub m: f64,
}

/// Dense stage-2 constants, jumping in place. Pronking and the back-flip
/// reuse the same shape for their dense part.
#[derive(Debug, Clone, PartialEq)]
pub struct JipStage2 {
    pub a_h: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub a_c: f64,
    pub f_min: f64,
    pub d: Kernel,
    pub s: Kernel,
    pub theta: Kernel,
    pub m: f64,
}

pub type DenseConfig = JipStage2;

/// Dense stage-2 constants, jumping forward.
#[derive(Debug, Clone, PartialEq)]
pub struct JfStage2 {
    pub a_h: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub a_c: f64,
    pub f_min: f64,
    pub k_d: f64,
    pub d_max: f64,
    pub s: Kernel,
    pub theta: Kernel,
    pub b: f64,
}

/// Pronking constants. None of these are tabulated; they are working
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PronkConfig {
    pub w_h: f64,
    pub w_d: f64,
    pub h_max: f64,
    pub d_max: f64,
    pub theta: Kernel,
    pub w_t: f64,
    pub w_s: f64,
    pub k: f64,
    pub w_avg: f64,
    pub w_max: f64,
    pub w_c: f64,
    pub b: f64,
    /// A jump counts towards c_j (and earns r_j) when its p_sj exceeds this.
    pub threshold: f64,
    pub w_j: f64,
    pub l_j: f64,
    /// g_s applied to the performance entropy in r_j.
    pub entropy: Kernel,
    /// g_p applied to the episode energy.
    pub energy: Kernel,
    pub dense: DenseConfig,
}

/// Back-flip constants (working defaults, not tabulated).
#[derive(Debug, Clone, PartialEq)]
pub struct BackflipConfig {
    pub w_h: f64,
    pub w_theta: f64,
    pub w_h_theta: f64,
    pub b: f64,
    pub w_bonus: f64,
    pub theta_max: f64,
    pub dense: DenseConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImitationConfig {
    pub w_a: f64,
    pub w_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub jip1: JipStage1,
    pub jf1: JfStage1,
    pub jip2: JipStage2,
    pub jf2: JfStage2,
    pub pronk: PronkConfig,
    pub backflip: BackflipConfig,
    pub imitation: ImitationConfig,
}

impl Default for RewardConfig {
    fn default() -> Self {
        let jip2 = JipStage2 {
            a_h: 0.01,
            h_min: 0.29,
            h_max: 1.3,
            a_c: 1.5e-4,
            f_min: 800.0,
            d: Kernel::new(6.5e-4, 40.0),
            s: Kernel::new(3e-3, 0.1),
            theta: Kernel::new(4.2e-3, 26.0),
            m: 0.25,
        };
        RewardConfig {
            jip1: JipStage1 {
                h_f: 0.9,
                theta: Kernel::new(0.3, 0.0225),
                d: Kernel::new(0.05, 0.05),
                d_f: 1.3,
                c_h: 0.7,
                b: 0.1,
                q: 0.08,
                m: 0.064,
            },
            jf1: JfStage1 {
                h_f: 0.3,
                theta: Kernel::new(0.25, 0.0225),
                d_f: 1.3,
                c_d: 0.5,
                c_h: 25.0,
                b: 0.1,
                q: 0.08,
                m: 0.096,
            },
            jf2: JfStage2 {
                a_h: 6.5e-3,
                h_min: 0.29,
                h_max: 1.1,
                a_c: 1.2e-4,
                f_min: 800.0,
                k_d: 1.52e-2,
                d_max: 1.3,
                s: Kernel::new(3e-3, 0.1),
                theta: Kernel::new(4.2e-3, 26.0),
                b: 0.025,
            },
            pronk: PronkConfig {
                w_h: 1.0,
                w_d: 0.0,
                h_max: 0.6,
                d_max: 1.0,
                theta: Kernel::new(0.3, 0.0225),
                w_t: 0.5,
                w_s: 0.2,
                k: 0.5,
                w_avg: 1.0,
                w_max: 0.5,
                w_c: 0.1,
                b: 0.2,
                threshold: 0.6,
                w_j: 0.05,
                l_j: 0.05,
                entropy: Kernel::new(0.05, 0.5),
                energy: Kernel::new(0.5, 0.002),
                dense: jip2.clone(),
            },
            backflip: BackflipConfig {
                w_h: 1.0,
                w_theta: 1.0,
                w_h_theta: 1.0,
                b: 0.2,
                w_bonus: 1.0,
                theta_max: 2.0 * std::f64::consts::PI,
                dense: JipStage2 { theta: Kernel::new(4.2e-3, 0.5), ..jip2.clone() },
            },
            jip2,
            imitation: ImitationConfig { w_a: 1.0, w_b: 5.0 },
        }
    }
}

impl RewardConfig {
    fn fields_mut(&mut self) -> Vec<(String, &mut f64)> {
        let mut out: Vec<(String, &mut f64)> = Vec::new();
        macro_rules! push {
            ($prefix:expr, $($name:literal => $field:expr),* $(,)?) => {
                $( out.push((format!("{}.{}", $prefix, $name), &mut $field)); )*
            };
        }
        let RewardConfig { jip1, jf1, jip2, jf2, pronk, backflip, imitation } = self;
        push!("jip1",
            "h_f" => jip1.h_f, "a_theta" => jip1.theta.a, "b_theta" => jip1.theta.b,
            "a_d" => jip1.d.a, "b_d" => jip1.d.b, "d_f" => jip1.d_f, "c_h" => jip1.c_h, "b" => jip1.b,
            "q" => jip1.q, "m" => jip1.m);
        push!("jf1",
            "h_f" => jf1.h_f, "a_theta" => jf1.theta.a, "b_theta" => jf1.theta.b,
            "d_f" => jf1.d_f, "c_d" => jf1.c_d, "c_h" => jf1.c_h, "b" => jf1.b,
            "q" => jf1.q, "m" => jf1.m);
        dense_fields(&mut out, "jip2", jip2);
        push!("jf2",
            "a_h" => jf2.a_h, "h_min" => jf2.h_min, "h_max" => jf2.h_max, "a_c" => jf2.a_c,
            "f_min" => jf2.f_min, "k_d" => jf2.k_d, "d_max" => jf2.d_max, "a_s" => jf2.s.a,
            "b_s" => jf2.s.b, "a_theta" => jf2.theta.a, "b_theta" => jf2.theta.b, "b" => jf2.b);
        let PronkConfig { dense: pronk_dense, .. } = pronk;
        push!("pronk",
            "w_h" => pronk.w_h, "w_d" => pronk.w_d, "h_max" => pronk.h_max, "d_max" => pronk.d_max,
            "a_theta" => pronk.theta.a, "b_theta" => pronk.theta.b, "w_t" => pronk.w_t,
            "w_s" => pronk.w_s, "k" => pronk.k, "w_avg" => pronk.w_avg, "w_max" => pronk.w_max,
            "w_c" => pronk.w_c, "b" => pronk.b, "threshold" => pronk.threshold, "w_j" => pronk.w_j,
            "l_j" => pronk.l_j, "a_entropy" => pronk.entropy.a, "b_entropy" => pronk.entropy.b,
            "a_p" => pronk.energy.a, "b_p" => pronk.energy.b);
        dense_fields(&mut out, "pronk.dense", pronk_dense);
        push!("backflip",
            "w_h" => backflip.w_h, "w_theta" => backflip.w_theta, "w_h_theta" => backflip.w_h_theta,
            "b" => backflip.b, "w_bonus" => backflip.w_bonus, "theta_max" => backflip.theta_max);
        dense_fields(&mut out, "backflip.dense", &mut backflip.dense);
        push!("imitation", "w_a" => imitation.w_a, "w_b" => imitation.w_b);
        out
    }

    /// Every constant as `(key, value)`, in a fixed order.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut copy = self.clone();
        copy.fields_mut().into_iter().map(|(k, v)| (k, *v)).collect()
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match self.fields_mut().into_iter().find(|(k, _)| k == key) {
            Some((_, slot)) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::config(format!("unknown reward key `{key}`"))),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries().into_iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// `key = value` lines; values use the shortest representation that
    /// parses back to the same bits.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v:?}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in self.entries() {
            if !v.is_finite() {
                return Err(Error::config(format!("reward {k} is not finite")));
            }
        }
        let kernels = [
            ("jip1.theta", self.jip1.theta),
            ("jip1.d", self.jip1.d),
            ("jf1.theta", self.jf1.theta),
            ("jip2.d", self.jip2.d),
            ("jip2.s", self.jip2.s),
            ("jip2.theta", self.jip2.theta),
            ("jf2.s", self.jf2.s),
            ("jf2.theta", self.jf2.theta),
            ("pronk.theta", self.pronk.theta),
            ("pronk.entropy", self.pronk.entropy),
            ("pronk.energy", self.pronk.energy),
            ("pronk.dense.d", self.pronk.dense.d),
            ("pronk.dense.s", self.pronk.dense.s),
            ("pronk.dense.theta", self.pronk.dense.theta),
            ("backflip.dense.s", self.backflip.dense.s),
            ("backflip.dense.theta", self.backflip.dense.theta),
        ];
        for (name, k) in kernels {
            k.validate(name)?;
        }
        let caps = [
            ("jip1.h_f", self.jip1.h_f),
            ("jip1.d_f", self.jip1.d_f),
            ("jf1.h_f", self.jf1.h_f),
            ("jf1.d_f", self.jf1.d_f),
            ("pronk.h_max", self.pronk.h_max),
            ("pronk.d_max", self.pronk.d_max),
            ("backflip.theta_max", self.backflip.theta_max),
        ];
        for (name, cap) in caps {
            if cap <= 0.0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

fn dense_fields<'a>(out: &mut Vec<(String, &'a mut f64)>, prefix: &str, d: &'a mut DenseConfig) {
    let JipStage2 { a_h, h_min, h_max, a_c, f_min, d: dk, s, theta, m } = d;
    let items: [(&str, &'a mut f64); 12] = [
        ("a_h", a_h),
        ("h_min", h_min),
        ("h_max", h_max),
        ("a_c", a_c),
        ("f_min", f_min),
        ("a_d", &mut dk.a),
        ("b_d", &mut dk.b),
        ("a_s", &mut s.a),
        ("b_s", &mut s.b),
        ("a_theta", &mut theta.a),
        ("b_theta", &mut theta.b),
        ("m", m),
    ];
    for (name, slot) in items {
        out.push((format!("{prefix}.{name}"), slot));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_bit_exact() {
        let cfg = RewardConfig::default();
        let mut back = RewardConfig::default();
        // Scramble, then restore from text.
        for (k, _) in cfg.entries() {
            back.set(&k, -1.0).unwrap();
        }
        for line in cfg.to_text().lines() {
            let (k, v) = line.split_once(" = ").unwrap();
            back.set(k, v.parse().unwrap()).unwrap();
        }
        assert_eq!(cfg, back);
    }

    #[test]
    fn keys_are_unique() {
        let keys: Vec<_> = RewardConfig::default().entries().into_iter().map(|(k, _)| k).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), keys.len());
    }

    #[test]
    fn unknown_key_is_config_error() {
        let mut cfg = RewardConfig::default();
        assert!(matches!(cfg.set("jip1.nope", 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn defaults_validate() {
        RewardConfig::default().validate().unwrap();
    }
}
