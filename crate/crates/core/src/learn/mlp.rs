//! Fully connected tanh network with a linear output layer.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.biases[o];
            out.push(z);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Gradients shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Xavier-uniform hidden layers; the output layer starts at zero.
    pub fn new(dims: &[usize], seed: u64) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let weights = if i + 1 == n {
                    vec![0.0; fan_in * fan_out]
                } else {
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..fan_in * fan_out).map(|_| rng.gen_range(-a..a)).collect()
                };
                Layer {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights,
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.forward(&a, &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut a, &mut z);
        }
        a
    }

    /// Mean squared error over `mask`ed outputs and its gradient.
    ///
    /// The loss is averaged over samples and active outputs.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[Vec<f64>], mask: &[bool]) -> (f64, Gradients) {
        let mut g = Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        };
        let active = mask.iter().filter(|m| **m).count().max(1);
        let norm = 1.0 / (xs.len().max(1) * active) as f64;
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        for (x, y) in xs.iter().zip(ys) {
            acts.clear();
            acts.push(x.clone());
            for (i, l) in self.layers.iter().enumerate() {
                let mut z = Vec::new();
                l.forward(acts.last().expect("input pushed"), &mut z);
                if i < last {
                    z.iter_mut().for_each(|v| *v = v.tanh());
                }
                acts.push(z);
            }
            let out = acts.last().expect("output");
            let mut delta: Vec<f64> = out
                .iter()
                .zip(y)
                .zip(mask)
                .map(|((o, t), m)| {
                    if *m {
                        let e = o - t;
                        loss += e * e * norm;
                        2.0 * e * norm
                    } else {
                        0.0
                    }
                })
                .collect();
            for i in (0..self.layers.len()).rev() {
                let l = &self.layers[i];
                let a_in = &acts[i];
                for o in 0..l.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    g.biases[i][o] += d;
                    let row = &mut g.weights[i][o * l.inputs..(o + 1) * l.inputs];
                    for (gw, a) in row.iter_mut().zip(a_in) {
                        *gw += d * a;
                    }
                }
                if i > 0 {
                    let mut prev = vec![0.0; l.inputs];
                    for o in 0..l.outputs {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += d * w;
                        }
                    }
                    // tanh' = 1 - a^2 on the hidden activation feeding this layer
                    for (p, a) in prev.iter_mut().zip(a_in) {
                        *p *= 1.0 - a * a;
                    }
                    delta = prev;
                }
            }
        }
        (loss, g)
    }

    pub fn apply(&mut self, g: &Gradients, lr: f64) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.weights.iter_mut().zip(&g.weights[i]).for_each(|(w, d)| *w -= lr * d);
            l.biases.iter_mut().zip(&g.biases[i]).for_each(|(b, d)| *b -= lr * d);
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|v| {
                *v = it.next().expect("parameter vector too short");
            });
        }
    }

    pub fn flat_grad(g: &Gradients) -> Vec<f64> {
        g.weights
            .iter()
            .zip(&g.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for d in self.dims() {
            h.update((d as u64).to_le_bytes());
        }
        for p in self.params() {
            h.update(p.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
