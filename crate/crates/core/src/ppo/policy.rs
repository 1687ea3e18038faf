use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::binfmt::{Reader, Writer};
use crate::error::{Error, Result};
use crate::nn::MlpShape;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Gaussian policy squashed by tanh, with a separate value network. The
/// observation normalizer is fixed when the policy is built.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPolicy {
    pub pi: MlpShape,
    pub pi_params: Vec<f64>,
    pub log_std: Vec<f64>,
    pub vf: MlpShape,
    pub vf_params: Vec<f64>,
    pub obs_mean: Vec<f64>,
    pub obs_inv_std: Vec<f64>,
}

/// One sampled action.
#[derive(Debug, Clone)]
pub struct Sample {
    /// Pre-squash Gaussian draw.
    pub u: Vec<f64>,
    pub action: Vec<f64>,
    /// Gaussian log-density of `u`. The tanh correction depends only on `u`,
    /// so it cancels in probability ratios and is left out.
    pub log_prob: f64,
    pub value: f64,
}

pub fn gaussian_log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    let mut lp = 0.0;
    for j in 0..u.len() {
        let z = (u[j] - mean[j]) * (-log_std[j]).exp();
        lp += -0.5 * z * z - log_std[j] - 0.5 * (2.0 * PI).ln();
    }
    lp
}

/// `log(1 - tanh(u)^2)` per component, summed; add to the Gaussian density
/// for the density of the squashed action.
pub fn squash_log_det(u: &[f64]) -> f64 {
    u.iter().map(|&x| 2.0 * (2f64.ln() - x - softplus(-2.0 * x))).sum()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

const MAGIC: &[u8; 8] = b"ACRBPPO\0";
const FORMAT: u32 = 1;

impl MlpPolicy {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], init_log_std: f64, rng: &mut impl Rng) -> Self {
        let pi = MlpShape::new(obs_dim, hidden, act_dim);
        let vf = MlpShape::new(obs_dim, hidden, 1);
        MlpPolicy {
            pi_params: pi.init(rng, 0.01),
            vf_params: vf.init(rng, 1.0),
            pi,
            vf,
            log_std: vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); act_dim],
            obs_mean: vec![0.0; obs_dim],
            obs_inv_std: vec![1.0; obs_dim],
        }
    }

    /// All parameters zero: mean action 0, value 0.
    pub fn zeros(obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Self {
        let pi = MlpShape::new(obs_dim, hidden, act_dim);
        let vf = MlpShape::new(obs_dim, hidden, 1);
        MlpPolicy {
            pi_params: vec![0.0; pi.num_params()],
            vf_params: vec![0.0; vf.num_params()],
            pi,
            vf,
            log_std: vec![0.0; act_dim],
            obs_mean: vec![0.0; obs_dim],
            obs_inv_std: vec![1.0; obs_dim],
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.pi.input()
    }

    pub fn act_dim(&self) -> usize {
        self.pi.output()
    }

    pub fn hidden(&self) -> &[usize] {
        &self.pi.sizes[1..self.pi.sizes.len() - 1]
    }

    pub fn set_normalizer(&mut self, mean: &[f64], inv_std: &[f64]) -> Result<()> {
        if mean.len() != self.obs_dim() || inv_std.len() != self.obs_dim() {
            return Err(Error::Dimension { what: "normalizer", expected: self.obs_dim(), got: mean.len() });
        }
        self.obs_mean = mean.to_vec();
        self.obs_inv_std = inv_std.to_vec();
        Ok(())
    }

    pub fn normalize(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim() {
            return Err(Error::Dimension { what: "observation", expected: self.obs_dim(), got: obs.len() });
        }
        Ok(obs.iter().zip(&self.obs_mean).zip(&self.obs_inv_std).map(|((o, m), s)| (o - m) * s).collect())
    }

    /// `(μ, log σ, V)` before squashing.
    pub fn forward(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let x = self.normalize(obs)?;
        let mean = self.pi.forward(&self.pi_params, &x);
        let v = self.vf.forward(&self.vf_params, &x)[0];
        Ok((mean, self.log_std.clone(), v))
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        let x = self.normalize(obs)?;
        Ok(self.vf.forward(&self.vf_params, &x)[0])
    }

    /// `tanh(μ)`, clamped to `[-1, 1]`.
    pub fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let x = self.normalize(obs)?;
        Ok(self.pi.forward(&self.pi_params, &x).iter().map(|m| m.tanh().clamp(-1.0, 1.0)).collect())
    }

    pub fn sample(&self, obs: &[f64], rng: &mut impl Rng) -> Result<Sample> {
        let (mean, log_std, value) = self.forward(obs)?;
        let u: Vec<f64> =
            mean.iter().zip(&log_std).map(|(m, s)| m + s.exp() * rng.sample::<f64, _>(StandardNormal)).collect();
        let log_prob = gaussian_log_prob(&u, &mean, &log_std);
        let action = u.iter().map(|x| x.tanh()).collect();
        Ok(Sample { u, action, log_prob, value })
    }

    pub fn num_params(&self) -> usize {
        self.pi_params.len() + self.log_std.len() + self.vf_params.len()
    }

    /// Trainable parameters: policy network, log σ, value network.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend_from_slice(&self.pi_params);
        p.extend_from_slice(&self.log_std);
        p.extend_from_slice(&self.vf_params);
        p
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        let (a, rest) = p.split_at(self.pi_params.len());
        let (b, c) = rest.split_at(self.log_std.len());
        self.pi_params.copy_from_slice(a);
        self.log_std.copy_from_slice(b);
        self.vf_params.copy_from_slice(c);
        for s in &mut self.log_std {
            *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flat_params().iter().all(|v| v.is_finite())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, FORMAT);
        w.u32(self.obs_dim() as u32);
        w.u32(self.act_dim() as u32);
        let hidden = self.hidden();
        w.u32(hidden.len() as u32);
        for h in hidden {
            w.u32(*h as u32);
        }
        w.f64s(&self.pi_params);
        w.f64s(&self.log_std);
        w.f64s(&self.vf_params);
        w.f64s(&self.obs_mean);
        w.f64s(&self.obs_inv_std);
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> std::result::Result<Self, String> {
        let (mut r, format) = Reader::open(data, MAGIC)?;
        if format != FORMAT {
            return Err(format!("unsupported format {format}"));
        }
        let obs = r.u32()? as usize;
        let act = r.u32()? as usize;
        let nh = r.u32()? as usize;
        let hidden: Vec<usize> = (0..nh).map(|_| r.u32().map(|v| v as usize)).collect::<std::result::Result<_, _>>()?;
        let mut p = MlpPolicy::zeros(obs, act, &hidden);
        p.pi_params = r.f64s(p.pi.num_params())?;
        p.log_std = r.f64s(act)?;
        p.vf_params = r.f64s(p.vf.num_params())?;
        p.obs_mean = r.f64s(obs)?;
        p.obs_inv_std = r.f64s(obs)?;
        r.finish()?;
        if !p.is_finite() || p.obs_mean.iter().chain(&p.obs_inv_std).any(|v| !v.is_finite()) {
            return Err("non-finite values".into());
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read(path)?;
        Self::from_bytes(&data).map_err(|msg| Error::PolicyFile { path: path.to_path_buf(), msg })
    }
}
