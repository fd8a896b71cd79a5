//! Shallow categorical network: standardized inputs, two tanh hidden layers
//! and a softmax output, fitted by maximum likelihood (mini-batch Adam with
//! early stopping on a held-out slice of the training data).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn init<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(s + self.bias[o]);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub layers: Vec<Dense>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: [usize; 2],
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: [32, 32],
            learning_rate: 0.005,
            max_epochs: 150,
            batch_size: 32,
            patience: 12,
            validation_fraction: 0.15,
            weight_decay: 1e-4,
            seed: 17,
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl Mlp {
    pub fn input_dim(&self) -> usize {
        self.input_mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_mean.iter().zip(&self.input_scale))
            .map(|(v, (m, s))| {
                let z = (v - m) / s;
                // keeps tanh inputs finite for absurd but finite features
                z.clamp(-1e6, 1e6)
            })
            .collect()
    }

    /// Class probabilities; always non-negative and summing to one.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut a = self.standardize(x);
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut z);
            if i < last {
                a = z.iter().map(|v| v.tanh()).collect();
            } else {
                a = softmax(&z);
            }
        }
        a
    }

    /// Maximum-likelihood fit. `targets[i] < classes`.
    pub fn fit(inputs: &[Vec<f64>], targets: &[usize], classes: usize, cfg: &TrainConfig) -> Mlp {
        assert_eq!(inputs.len(), targets.len());
        assert!(!inputs.is_empty(), "empty training set");
        let dim = inputs[0].len();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        let n = inputs.len() as f64;
        let mean: Vec<f64> = (0..dim)
            .map(|j| inputs.iter().map(|x| x[j]).sum::<f64>() / n)
            .collect();
        let scale: Vec<f64> = (0..dim)
            .map(|j| {
                let var = inputs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
                var.sqrt().max(1e-6)
            })
            .collect();

        let sizes = [dim, cfg.hidden[0], cfg.hidden[1], classes];
        let mut net = Mlp {
            input_mean: mean,
            input_scale: scale,
            layers: sizes
                .windows(2)
                .map(|w| Dense::init(w[0], w[1], &mut rng))
                .collect(),
        };
        if classes <= 1 {
            return net;
        }

        let standardized: Vec<Vec<f64>> = inputs.iter().map(|x| net.standardize(x)).collect();
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut rng);
        let n_val = ((inputs.len() as f64) * cfg.validation_fraction).round() as usize;
        let n_val = if inputs.len() - n_val < 2 { 0 } else { n_val };
        let (val_idx, train_idx) = order.split_at(n_val);
        let mut train_idx = train_idx.to_vec();

        let mut adam = Adam::new(&net.layers);
        let mut best = net.layers.clone();
        let mut best_loss = f64::INFINITY;
        let mut stale = 0;
        for _epoch in 0..cfg.max_epochs {
            train_idx.shuffle(&mut rng);
            for batch in train_idx.chunks(cfg.batch_size.max(1)) {
                let mut grads = zero_like(&net.layers);
                for &i in batch {
                    backprop(&net.layers, &standardized[i], targets[i], &mut grads);
                }
                let scale = 1.0 / batch.len() as f64;
                for (g, layer) in grads.iter_mut().zip(&net.layers) {
                    for (gw, w) in g.weights.iter_mut().zip(&layer.weights) {
                        *gw = *gw * scale + cfg.weight_decay * w;
                    }
                    for gb in g.bias.iter_mut() {
                        *gb *= scale;
                    }
                }
                adam.step(&mut net.layers, &grads, cfg.learning_rate);
            }
            let monitor: &[usize] = if val_idx.is_empty() { &train_idx } else { val_idx };
            let loss = monitor
                .iter()
                .map(|&i| -forward_probs(&net.layers, &standardized[i])[targets[i]].max(1e-300).ln())
                .sum::<f64>()
                / monitor.len() as f64;
            if loss < best_loss - 1e-6 {
                best_loss = loss;
                best = net.layers.clone();
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
        net.layers = best;
        net
    }
}

fn forward_probs(layers: &[Dense], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let mut z = Vec::new();
    for (i, layer) in layers.iter().enumerate() {
        layer.forward(&a, &mut z);
        a = if i + 1 < layers.len() {
            z.iter().map(|v| v.tanh()).collect()
        } else {
            softmax(&z)
        };
    }
    a
}

fn zero_like(layers: &[Dense]) -> Vec<Dense> {
    layers
        .iter()
        .map(|l| Dense {
            inputs: l.inputs,
            outputs: l.outputs,
            weights: vec![0.0; l.weights.len()],
            bias: vec![0.0; l.bias.len()],
        })
        .collect()
}

/// Accumulates the cross-entropy gradient of one sample into `grads`.
fn backprop(layers: &[Dense], x: &[f64], target: usize, grads: &mut [Dense]) {
    let mut activations = vec![x.to_vec()];
    let mut z = Vec::new();
    for (i, layer) in layers.iter().enumerate() {
        layer.forward(activations.last().unwrap(), &mut z);
        let a = if i + 1 < layers.len() {
            z.iter().map(|v| v.tanh()).collect()
        } else {
            softmax(&z)
        };
        activations.push(a);
    }
    let mut delta = activations.last().unwrap().clone();
    delta[target] -= 1.0;
    for li in (0..layers.len()).rev() {
        let layer = &layers[li];
        let input = &activations[li];
        let g = &mut grads[li];
        for (o, &d) in delta.iter().enumerate().take(layer.outputs) {
            if d == 0.0 {
                continue;
            }
            let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (gw, v) in row.iter_mut().zip(input) {
                *gw += d * v;
            }
            g.bias[o] += d;
        }
        if li > 0 {
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate().take(layer.outputs) {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(layers: &[Dense]) -> Self {
        Self {
            m: zero_like(layers),
            v: zero_like(layers),
            t: 0,
        }
    }

    fn step(&mut self, layers: &mut [Dense], grads: &[Dense], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (li, layer) in layers.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[li], &mut self.v[li], &grads[li]);
            for k in 0..layer.weights.len() {
                update(&mut layer.weights[k], g.weights[k], &mut m.weights[k], &mut v.weights[k]);
            }
            for k in 0..layer.bias.len() {
                update(&mut layer.bias[k], g.bias[k], &mut m.bias[k], &mut v.bias[k]);
            }
        }
    }
}
