//! From-scratch multilayer perceptron: tanh hidden layers, softmax
//! cross-entropy head, exact analytic gradients over a flat parameter vector.
//!
//! Parameter layout per layer: weight matrix `W` (out×in, row-major), then
//! bias `b` (out). `flatten ∘ unflatten` is the identity bit-exactly.

use rand_distr::{Distribution, Normal};

use crate::batch::Minibatch;
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::param::ParamVector;
use crate::rng;

/// MLP architecture: layer widths from input to output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arch(pub Vec<usize>);

impl Arch {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::invalid("architecture needs ≥ 2 nonzero widths"));
        }
        Ok(Arch(widths))
    }

    pub fn input_dim(&self) -> usize {
        self.0[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.0.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.0
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// A network: architecture plus flat weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub arch: Arch,
    pub params: ParamVector,
}

impl Mlp {
    /// Zero-initialized network.
    pub fn zeros(arch: Arch) -> Self {
        let n = arch.n_params();
        Mlp {
            arch,
            params: ParamVector::zeros(n),
        }
    }

    /// Xavier-style random init from a named stream of the seed.
    pub fn init(arch: Arch, seed: u64) -> Self {
        let mut r = rng::stream(seed, "mlp-init");
        let mut params = Vec::with_capacity(arch.n_params());
        for w in arch.0.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let normal = Normal::new(0.0, scale).unwrap();
            for _ in 0..fan_in * fan_out {
                params.push(normal.sample(&mut r));
            }
            for _ in 0..fan_out {
                params.push(0.0);
            }
        }
        Mlp {
            arch,
            params: ParamVector::from_vec(params),
        }
    }

    pub fn flatten(&self) -> ParamVector {
        self.params.clone()
    }

    pub fn unflatten(arch: Arch, params: ParamVector) -> Result<Self> {
        params.check_len(arch.n_params())?;
        Ok(Mlp { arch, params })
    }

    pub fn set_params(&mut self, params: ParamVector) -> Result<()> {
        params.check_len(self.arch.n_params())?;
        self.params = params;
        Ok(())
    }

    /// Forward pass to pre-softmax logits.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        forward_logits(&self.arch, self.params.as_slice(), input)
    }

    /// Fraction of examples whose argmax logit equals the label.
    pub fn accuracy(&self, inputs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        let mut correct = 0usize;
        for (x, &y) in inputs.iter().zip(labels) {
            let logits = self.forward(x)?;
            let pred = argmax(&logits);
            if pred == y {
                correct += 1;
            }
        }
        Ok(correct as f64 / inputs.len() as f64)
    }

    /// Mean cross-entropy over a set.
    pub fn mean_loss(&self, inputs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in inputs.iter().zip(labels) {
            let logits = self.forward(x)?;
            total += cross_entropy(&logits, y);
        }
        Ok(total / inputs.len() as f64)
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::MIN, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let p = softmax(logits);
    -p[label].max(1e-300).ln()
}

fn forward_logits(arch: &Arch, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != arch.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            got: input.len(),
        });
    }
    let n_layers = arch.0.len() - 1;
    let mut act = input.to_vec();
    let mut offset = 0;
    for (l, w) in arch.0.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = &params[offset..offset + fan_in * fan_out];
        let biases = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        let mut next = vec![0.0; fan_out];
        for (o, n) in next.iter_mut().enumerate() {
            let row = &weights[o * fan_in..(o + 1) * fan_in];
            let z: f64 = row.iter().zip(&act).map(|(wi, a)| wi * a).sum::<f64>() + biases[o];
            *n = if l + 1 < n_layers { z.tanh() } else { z };
        }
        act = next;
    }
    Ok(act)
}

/// Objective over an MLP architecture: `eval` computes the mean cross-entropy
/// loss and its exact gradient at the given flat parameters.
pub struct MlpObjective {
    pub arch: Arch,
}

impl MlpObjective {
    pub fn new(arch: Arch) -> Self {
        MlpObjective { arch }
    }
}

impl Objective for MlpObjective {
    fn dim(&self) -> usize {
        self.arch.n_params()
    }

    fn eval(&self, params: &ParamVector, batch: &Minibatch) -> Result<(f64, ParamVector)> {
        params.check_len(self.arch.n_params())?;
        if batch.input_dim() != self.arch.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim(),
                got: batch.input_dim(),
            });
        }
        let p = params.as_slice();
        let n_layers = self.arch.0.len() - 1;
        let mut grad = vec![0.0; p.len()];
        let mut total_loss = 0.0;

        // Precompute per-layer parameter offsets.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.arch.0.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }

        for (x, &label) in batch.inputs.iter().zip(&batch.labels) {
            // Forward with cached activations (post-nonlinearity per layer).
            let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
            acts.push(x.clone());
            for (l, w) in self.arch.0.windows(2).enumerate() {
                let (fan_in, fan_out) = (w[0], w[1]);
                let base = offsets[l];
                let weights = &p[base..base + fan_in * fan_out];
                let biases = &p[base + fan_in * fan_out..base + fan_in * fan_out + fan_out];
                let prev = &acts[l];
                let mut next = vec![0.0; fan_out];
                for (o, n) in next.iter_mut().enumerate() {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    let z: f64 =
                        row.iter().zip(prev).map(|(wi, a)| wi * a).sum::<f64>() + biases[o];
                    *n = if l + 1 < n_layers { z.tanh() } else { z };
                }
                acts.push(next);
            }

            let logits = acts.last().unwrap();
            let probs = softmax(logits);
            total_loss += -probs[label].max(1e-300).ln();

            // Backward: delta at the logits is (p − onehot).
            let mut delta: Vec<f64> = probs;
            delta[label] -= 1.0;
            for l in (0..n_layers).rev() {
                let (fan_in, fan_out) = (self.arch.0[l], self.arch.0[l + 1]);
                let base = offsets[l];
                let weights = &p[base..base + fan_in * fan_out];
                let prev = &acts[l];
                // Accumulate weight and bias gradients.
                for o in 0..fan_out {
                    let g = delta[o];
                    let row = &mut grad[base + o * fan_in..base + (o + 1) * fan_in];
                    for (gi, a) in row.iter_mut().zip(prev) {
                        *gi += g * a;
                    }
                    grad[base + fan_in * fan_out + o] += g;
                }
                if l > 0 {
                    // Propagate through tanh of the previous layer.
                    let mut prev_delta = vec![0.0; fan_in];
                    for (o, &g) in delta.iter().enumerate() {
                        let row = &weights[o * fan_in..(o + 1) * fan_in];
                        for (pd, wi) in prev_delta.iter_mut().zip(row) {
                            *pd += g * wi;
                        }
                    }
                    for (pd, a) in prev_delta.iter_mut().zip(prev) {
                        *pd *= 1.0 - a * a;
                    }
                    delta = prev_delta;
                }
            }
        }

        let scale = 1.0 / batch.len() as f64;
        for g in &mut grad {
            *g *= scale;
        }
        Ok((total_loss * scale, ParamVector::from_vec(grad)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_batch(dim: usize, classes: usize, n: usize, seed: u64) -> Minibatch {
        let mut r = rng::stream(seed, "batch");
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let indices: Vec<usize> = (0..n).collect();
        Minibatch::new(inputs, labels, indices).unwrap()
    }

    #[test]
    fn flatten_unflatten_roundtrip_bit_exact() {
        let arch = Arch::new(vec![2, 5, 3]).unwrap();
        let net = Mlp::init(arch.clone(), 42);
        let flat = net.flatten();
        let back = Mlp::unflatten(arch, flat.clone()).unwrap();
        assert_eq!(back.params, flat);
        assert_eq!(back, net);
    }

    #[test]
    fn zero_net_balanced_two_class_loss_is_ln2() {
        let arch = Arch::new(vec![3, 4, 2]).unwrap();
        let net = Mlp::zeros(arch.clone());
        let batch = small_batch(3, 2, 8, 0);
        let obj = MlpObjective::new(arch);
        let (loss, _) = obj.eval(&net.params, &batch).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn duplicated_batch_same_loss_and_gradient() {
        let arch = Arch::new(vec![2, 6, 3]).unwrap();
        let net = Mlp::init(arch.clone(), 7);
        let batch = small_batch(2, 3, 5, 1);
        let doubled = Minibatch::new(
            [batch.inputs.clone(), batch.inputs.clone()].concat(),
            [batch.labels.clone(), batch.labels.clone()].concat(),
            (0..10).collect(),
        )
        .unwrap();
        let obj = MlpObjective::new(arch);
        let (l1, g1) = obj.eval(&net.params, &batch).unwrap();
        let (l2, g2) = obj.eval(&net.params, &doubled).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.as_slice().iter().zip(g2.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let arch = Arch::new(vec![2, 8, 8, 3]).unwrap();
        let net = Mlp::init(arch.clone(), 3);
        let batch = small_batch(2, 3, 6, 2);
        let obj = MlpObjective::new(arch.clone());
        let (_, grad) = obj.eval(&net.params, &batch).unwrap();

        let mut r = rng::stream(9, "fd-coords");
        let h = 1e-5;
        for _ in 0..100 {
            let i = r.gen_range(0..arch.n_params());
            let mut plus = net.params.clone();
            plus.0[i] += h;
            let mut minus = net.params.clone();
            minus.0[i] -= h;
            let (lp, _) = obj.eval(&plus, &batch).unwrap();
            let (lm, _) = obj.eval(&minus, &batch).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let g = grad.as_slice()[i];
            let denom = fd.abs().max(g.abs()).max(1e-8);
            assert!(
                (fd - g).abs() / denom <= 1e-5,
                "coord {i}: analytic {g} vs fd {fd}"
            );
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let arch = Arch::new(vec![2, 4, 2]).unwrap();
        let net = Mlp::init(arch.clone(), 0);
        let batch = small_batch(3, 2, 4, 5);
        let obj = MlpObjective::new(arch);
        assert!(obj.eval(&net.params, &batch).is_err());
    }
}
