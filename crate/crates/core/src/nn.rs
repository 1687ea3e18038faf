//! Fully connected tanh networks over a flat parameter vector.
//!
//! Layer `l` stores its weights row-major (`out × in`) followed by its bias.
//! A shape with no hidden layers is the affine map `W x + b`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpShape {
    /// `[input, hidden..., output]`.
    pub sizes: Vec<usize>,
}

/// Post-activation values of every layer for a batch, input first.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    pub n: usize,
    pub acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl MlpShape {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        MlpShape { sizes }
    }

    pub fn input(&self) -> usize {
        self.sizes[0]
    }

    pub fn output(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset of layer `l`'s weights in the flat vector.
    fn offset(&self, l: usize) -> usize {
        self.sizes.windows(2).take(l).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn check(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension { what: "network parameters", expected: self.num_params(), got: params.len() });
        }
        Ok(())
    }

    /// Glorot-uniform weights, zero biases; the output layer is scaled by
    /// `out_gain`.
    pub fn init(&self, rng: &mut impl Rng, out_gain: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if l + 1 == self.layers() {
                limit *= out_gain;
            }
            if limit == 0.0 {
                continue;
            }
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            let off = self.offset(l);
            for w in &mut p[off..off + fan_in * fan_out] {
                *w = dist.sample(rng);
            }
        }
        p
    }

    /// Forward pass for a single input.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input());
        let mut a = x.to_vec();
        for l in 0..self.layers() {
            let (fin, fout) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let (w, b) = params[off..off + fin * fout + fout].split_at(fin * fout);
            let last = l + 1 == self.layers();
            a = (0..fout)
                .map(|o| {
                    let z = b[o] + dot(&w[o * fin..(o + 1) * fin], &a);
                    if last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
        }
        a
    }

    /// Batched forward pass keeping every activation for [`Self::backward`].
    /// `xs` holds `n` inputs back to back.
    pub fn forward_batch(&self, params: &[f64], xs: &[f64], n: usize) -> Tape {
        debug_assert_eq!(xs.len(), n * self.input());
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(xs.to_vec());
        for l in 0..self.layers() {
            let (fin, fout) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let (w, b) = params[off..off + fin * fout + fout].split_at(fin * fout);
            let last = l + 1 == self.layers();
            let prev = &acts[l];
            let mut out = vec![0.0; n * fout];
            for i in 0..n {
                let a = &prev[i * fin..(i + 1) * fin];
                let row = &mut out[i * fout..(i + 1) * fout];
                for o in 0..fout {
                    let z = b[o] + dot(&w[o * fin..(o + 1) * fin], a);
                    row[o] = if last { z } else { z.tanh() };
                }
            }
            acts.push(out);
        }
        Tape { n, acts }
    }

    /// Accumulates into `grad` the parameter gradient of `Σ grad_out · output`.
    pub fn backward(&self, params: &[f64], tape: &Tape, grad_out: &[f64], grad: &mut [f64]) {
        let n = tape.n;
        debug_assert_eq!(grad_out.len(), n * self.output());
        debug_assert_eq!(grad.len(), self.num_params());
        let mut g = grad_out.to_vec();
        for l in (0..self.layers()).rev() {
            let (fin, fout) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let w = &params[off..off + fin * fout];
            let a_in = &tape.acts[l];
            {
                let (gw, gb) = grad[off..off + fin * fout + fout].split_at_mut(fin * fout);
                for i in 0..n {
                    let a = &a_in[i * fin..(i + 1) * fin];
                    for o in 0..fout {
                        let go = g[i * fout + o];
                        if go == 0.0 {
                            continue;
                        }
                        gb[o] += go;
                        axpy(go, a, &mut gw[o * fin..(o + 1) * fin]);
                    }
                }
            }
            if l == 0 {
                break;
            }
            let mut g_in = vec![0.0; n * fin];
            for i in 0..n {
                let row = &mut g_in[i * fin..(i + 1) * fin];
                for o in 0..fout {
                    let go = g[i * fout + o];
                    if go != 0.0 {
                        axpy(go, &w[o * fin..(o + 1) * fin], row);
                    }
                }
                // Through the tanh of the layer below.
                let a = &a_in[i * fin..(i + 1) * fin];
                for k in 0..fin {
                    row[k] *= 1.0 - a[k] * a[k];
                }
            }
            g = g_in;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
