use std::fmt;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use super::stats::RunningStat;
use crate::binfmt::{Reader, Writer};
use crate::error::{Error, Result};
use crate::nn::MlpShape;
use crate::registry::Registry;
use crate::seeds::rng_for;

/// How a policy maps normalized observations to actions. Every
/// representation is a tanh network; the linear one has no hidden layer.
pub trait Representation: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn hidden(&self) -> &'static [usize];

    fn shape(&self, obs_dim: usize, act_dim: usize) -> MlpShape {
        MlpShape::new(obs_dim, self.hidden(), act_dim)
    }

    fn init_params(&self, obs_dim: usize, act_dim: usize, seed: u64) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Linear;

impl Representation for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn hidden(&self) -> &'static [usize] {
        &[]
    }
    fn init_params(&self, obs_dim: usize, act_dim: usize, _seed: u64) -> Vec<f64> {
        vec![0.0; self.shape(obs_dim, act_dim).num_params()]
    }
}

/// Tanh network with Glorot-initialized hidden layers and a small output
/// layer, so the initial policy stays near the zero action.
#[derive(Debug, Clone, Copy)]
pub struct Mlp {
    name: &'static str,
    hidden: &'static [usize],
}

impl Mlp {
    pub const H64: Mlp = Mlp { name: "mlp64", hidden: &[64] };
    pub const H32X32: Mlp = Mlp { name: "mlp32x32", hidden: &[32, 32] };
}

impl Representation for Mlp {
    fn name(&self) -> &'static str {
        self.name
    }
    fn hidden(&self) -> &'static [usize] {
        self.hidden
    }
    fn init_params(&self, obs_dim: usize, act_dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_for(seed, self.name, 0);
        self.shape(obs_dim, act_dim).init(&mut rng, 0.1)
    }
}

pub fn representation_registry() -> &'static Registry<dyn Representation> {
    static REG: OnceLock<Registry<dyn Representation>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn Representation> = Registry::new("representation");
        r.register("linear", || Arc::new(Linear));
        r.register("mlp64", || Arc::new(Mlp::H64));
        r.register("mlp32x32", || Arc::new(Mlp::H32X32));
        r
    })
}

pub fn representation_by_name(name: &str) -> Result<Arc<dyn Representation>> {
    representation_registry().get(name)
}

/// A policy trained by random search: network parameters plus the running
/// observation statistics used to normalize its input.
#[derive(Debug, Clone, PartialEq)]
pub struct EsPolicy {
    pub repr: String,
    pub shape: MlpShape,
    pub params: Vec<f64>,
    pub obs_stat: RunningStat,
    pub version: u64,
}

const MAGIC: &[u8; 8] = b"ACRBTES\0";
const FORMAT: u32 = 1;

impl EsPolicy {
    pub fn new(repr: &dyn Representation, obs_dim: usize, act_dim: usize, seed: u64) -> Self {
        EsPolicy {
            repr: repr.name().to_string(),
            shape: repr.shape(obs_dim, act_dim),
            params: repr.init_params(obs_dim, act_dim, seed),
            obs_stat: RunningStat::new(obs_dim),
            version: 0,
        }
    }

    /// The zero linear policy.
    pub fn linear(obs_dim: usize, act_dim: usize) -> Self {
        Self::new(&Linear, obs_dim, act_dim, 0)
    }

    pub fn obs_dim(&self) -> usize {
        self.shape.input()
    }

    pub fn act_dim(&self) -> usize {
        self.shape.output()
    }

    /// `W` (row-major, act × obs) and `b` of a linear policy.
    pub fn linear_parts(&self) -> Option<(&[f64], &[f64])> {
        if self.shape.layers() != 1 {
            return None;
        }
        Some(self.params.split_at(self.obs_dim() * self.act_dim()))
    }

    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let (mean, inv_std) = self.obs_stat.normalizer();
        self.act_with(&self.params, &mean, &inv_std, obs)
    }

    /// Action for `params` under a fixed normalizer, clamped to `[-1, 1]`.
    pub fn act_with(&self, params: &[f64], mean: &[f64], inv_std: &[f64], obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim() {
            return Err(Error::Dimension { what: "observation", expected: self.obs_dim(), got: obs.len() });
        }
        let x: Vec<f64> = obs.iter().zip(mean).zip(inv_std).map(|((o, m), s)| (o - m) * s).collect();
        let mut a = self.shape.forward(params, &x);
        for v in &mut a {
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, FORMAT);
        w.u32(self.obs_dim() as u32);
        w.u32(self.act_dim() as u32);
        w.str(&self.repr);
        let hidden = &self.shape.sizes[1..self.shape.sizes.len() - 1];
        w.u32(hidden.len() as u32);
        for h in hidden {
            w.u32(*h as u32);
        }
        w.u64(self.version);
        w.f64(self.obs_stat.count);
        w.f64s(&self.params);
        w.f64s(&self.obs_stat.mean);
        w.f64s(&self.obs_stat.variance());
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> std::result::Result<Self, String> {
        let (mut r, format) = Reader::open(data, MAGIC)?;
        if format != FORMAT {
            return Err(format!("unsupported format {format}"));
        }
        let obs = r.u32()? as usize;
        let act = r.u32()? as usize;
        let repr = r.str()?;
        let nh = r.u32()? as usize;
        let hidden: Vec<usize> = (0..nh).map(|_| r.u32().map(|v| v as usize)).collect::<std::result::Result<_, _>>()?;
        let version = r.u64()?;
        let count = r.f64()?;
        let shape = MlpShape::new(obs, &hidden, act);
        let params = r.f64s(shape.num_params())?;
        let mean = r.f64s(obs)?;
        let var = r.f64s(obs)?;
        r.finish()?;
        if params.iter().chain(&mean).chain(&var).any(|v| !v.is_finite()) {
            return Err("non-finite values".into());
        }
        let m2 = if count > 0.0 { var.iter().map(|v| v * count).collect() } else { vec![0.0; obs] };
        Ok(EsPolicy { repr, shape, params, obs_stat: RunningStat { count, mean, m2 }, version })
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
