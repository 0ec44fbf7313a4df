//! Parametric survival networks: a small dense net with either a scalar
//! proportional-hazards head or a discrete-time softmax head, trained by
//! explicit backpropagation. Hidden and output parameters are kept apart
//! so adaptation can re-fit the output layer while leaving the hidden
//! representation untouched.

pub mod loss;
pub mod train;
pub mod transfer;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Rectifier,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Rectifier => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative with respect to the pre-activation; the rectifier takes 0
    /// at the kink.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Rectifier => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh() * z.tanh(),
        }
    }
}

/// What the final linear layer feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    /// A single real-valued risk score for proportional-hazards losses.
    Risk,
    /// A softmax over discrete time bins.
    Discrete,
}

/// One dense layer; `w` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Layer {
    w: Vec<f64>,
    b: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
}

impl Layer {
    fn glorot<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim).map(|_| rng.gen_range(-limit..limit)).collect();
        Self { w, b: vec![0.0; out_dim], in_dim, out_dim }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                z += wi * xi;
            }
            out.push(z);
        }
    }

    fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// A dense survival network: `input -> hidden stack -> linear output`,
/// with the head interpreting the output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalNetwork {
    input_dim: usize,
    hidden: Vec<Layer>,
    output: Layer,
    activation: Activation,
    head: Head,
}

/// Per-subject forward pass record: pre-activations and activations of
/// every hidden layer plus the raw (pre-head) outputs.
pub(crate) struct ForwardCache {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    pub raw: Vec<f64>,
}

impl SurvivalNetwork {
    /// Fresh network with Glorot-uniform weights and zero biases, drawn
    /// deterministically from `seed`. `output_dim` must be 1 for the
    /// [`Head::Risk`] head and at least 2 for [`Head::Discrete`].
    pub fn new(
        input_dim: usize,
        hidden_dims: &[usize],
        output_dim: usize,
        activation: Activation,
        head: Head,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".into()));
        }
        match head {
            Head::Risk if output_dim != 1 => {
                return Err(Error::InvalidConfig("risk head needs exactly 1 output".into()))
            }
            Head::Discrete if output_dim < 2 => {
                return Err(Error::InvalidConfig("discrete head needs >= 2 outputs".into()))
            }
            _ => {}
        }
        if hidden_dims.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer of width 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hidden = Vec::with_capacity(hidden_dims.len());
        let mut in_dim = input_dim;
        for &h in hidden_dims {
            hidden.push(Layer::glorot(in_dim, h, &mut rng));
            in_dim = h;
        }
        let output = Layer::glorot(in_dim, output_dim, &mut rng);
        Ok(Self { input_dim, hidden, output, activation, head })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output.out_dim
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.out_dim).collect()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut act = Vec::with_capacity(self.hidden.len());
        let mut cur: Vec<f64> = x.to_vec();
        for layer in &self.hidden {
            let mut z = Vec::new();
            layer.forward(&cur, &mut z);
            let a: Vec<f64> = z.iter().map(|&v| self.activation.apply(v)).collect();
            pre.push(z);
            cur = a.clone();
            act.push(a);
        }
        let mut raw = Vec::new();
        self.output.forward(&cur, &mut raw);
        ForwardCache { pre, act, raw }
    }

    /// Raw (pre-head) outputs for `x`.
    pub fn raw_output(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::FeatureMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(self.forward_cached(x).raw)
    }

    /// Head-applied outputs: the risk score as a one-element vector, or
    /// softmax bin probabilities (which sum to 1 up to rounding).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let raw = self.raw_output(x)?;
        Ok(match self.head {
            Head::Risk => raw,
            Head::Discrete => softmax(&raw),
        })
    }

    /// Risk score for the proportional-hazards head.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self.head {
            Head::Risk => Ok(self.raw_output(x)?[0]),
            Head::Discrete => Err(Error::InvalidConfig(
                "score() is only defined for the risk head".into(),
            )),
        }
    }

    /// Total parameter count (hidden plus output).
    pub fn n_params(&self) -> usize {
        self.hidden.iter().map(Layer::n_params).sum::<usize>() + self.output.n_params()
    }

    /// Flat parameter vector: hidden layers in order (weights row-major,
    /// then biases), then the output layer. The output layer always
    /// occupies the trailing [`output_param_range`](Self::output_param_range).
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for layer in &self.hidden {
            v.extend_from_slice(&layer.w);
            v.extend_from_slice(&layer.b);
        }
        v.extend_from_slice(&self.output.w);
        v.extend_from_slice(&self.output.b);
        v
    }

    /// Indices of the output-layer parameters within [`params`](Self::params).
    pub fn output_param_range(&self) -> std::ops::Range<usize> {
        let total = self.n_params();
        total - self.output.n_params()..total
    }

    /// Overwrite all parameters from a flat vector laid out like
    /// [`params`](Self::params).
    pub fn set_params(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_params() {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                v.len()
            )));
        }
        let mut at = 0;
        for layer in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            let (wl, bl) = (layer.w.len(), layer.b.len());
            layer.w.copy_from_slice(&v[at..at + wl]);
            at += wl;
            layer.b.copy_from_slice(&v[at..at + bl]);
            at += bl;
        }
        Ok(())
    }

    /// Accumulate `d(loss)/d(params)` into `grad` (laid out like
    /// [`params`](Self::params)) for one subject, given `d_raw = dL/d(raw
    /// outputs)` and the subject's forward cache.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        cache: &ForwardCache,
        d_raw: &[f64],
        grad: &mut [f64],
    ) {
        // output layer
        let last_act: &[f64] = match cache.act.last() {
            Some(a) => a,
            None => x,
        };
        let out_range = self.output_param_range();
        let (gw, gb) = grad[out_range.clone()].split_at_mut(self.output.w.len());
        for o in 0..self.output.out_dim {
            let d = d_raw[o];
            for i in 0..self.output.in_dim {
                gw[o * self.output.in_dim + i] += d * last_act[i];
            }
            gb[o] += d;
        }
        // propagate into the hidden stack
        let mut delta: Vec<f64> = vec![0.0; self.output.in_dim];
        for o in 0..self.output.out_dim {
            let d = d_raw[o];
            let row = &self.output.w[o * self.output.in_dim..(o + 1) * self.output.in_dim];
            for i in 0..self.output.in_dim {
                delta[i] += d * row[i];
            }
        }
        let mut offset: usize = self.hidden.iter().map(Layer::n_params).sum();
        for l in (0..self.hidden.len()).rev() {
            let layer = &self.hidden[l];
            // gradient w.r.t. this layer's pre-activation
            for (di, &z) in delta.iter_mut().zip(&cache.pre[l]) {
                *di *= self.activation.derivative(z);
            }
            let input: &[f64] = if l == 0 { x } else { &cache.act[l - 1] };
            offset -= layer.n_params();
            let (gw, gb) = grad[offset..offset + layer.n_params()].split_at_mut(layer.w.len());
            for o in 0..layer.out_dim {
                let d = delta[o];
                for i in 0..layer.in_dim {
                    gw[o * layer.in_dim + i] += d * input[i];
                }
                gb[o] += d;
            }
            if l > 0 {
                let mut next = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for i in 0..layer.in_dim {
                        next[i] += d * row[i];
                    }
                }
                delta = next;
            }
        }
    }
}

/// Numerically shifted softmax.
pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeroed_risk_net_scores_zero() {
        let mut net =
            SurvivalNetwork::new(3, &[4], 1, Activation::Rectifier, Head::Risk, 1).unwrap();
        net.set_params(&vec![0.0; net.n_params()]).unwrap();
        assert_eq!(net.score(&[0.5, -1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn discrete_head_sums_to_one() {
        let net =
            SurvivalNetwork::new(4, &[8, 8], 5, Activation::Rectifier, Head::Discrete, 3).unwrap();
        let y = net.forward(&[0.2, -0.4, 1.5, 0.0]).unwrap();
        assert_eq!(y.len(), 5);
        assert!(y.iter().all(|&p| p >= 0.0));
        let total: f64 = y.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn params_round_trip() {
        let net =
            SurvivalNetwork::new(5, &[7, 3], 1, Activation::Tanh, Head::Risk, 9).unwrap();
        let p = net.params();
        assert_eq!(p.len(), net.n_params());
        assert_eq!(p.len(), (5 * 7 + 7) + (7 * 3 + 3) + (3 + 1));
        let mut other =
            SurvivalNetwork::new(5, &[7, 3], 1, Activation::Tanh, Head::Risk, 10).unwrap();
        assert_ne!(other.params(), p); // different seed, different weights
        other.set_params(&p).unwrap();
        assert_eq!(other, net);
    }

    #[test]
    fn same_seed_same_init() {
        let a = SurvivalNetwork::new(4, &[6], 1, Activation::Rectifier, Head::Risk, 42).unwrap();
        let b = SurvivalNetwork::new(4, &[6], 1, Activation::Rectifier, Head::Risk, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn head_shape_is_validated() {
        assert!(SurvivalNetwork::new(3, &[4], 2, Activation::Rectifier, Head::Risk, 0).is_err());
        assert!(SurvivalNetwork::new(3, &[4], 1, Activation::Rectifier, Head::Discrete, 0).is_err());
        assert!(SurvivalNetwork::new(0, &[4], 1, Activation::Rectifier, Head::Risk, 0).is_err());
    }

    #[test]
    fn probe_width_is_checked() {
        let net = SurvivalNetwork::new(3, &[], 1, Activation::Rectifier, Head::Risk, 0).unwrap();
        assert!(matches!(
            net.forward(&[1.0]).unwrap_err(),
            Error::FeatureMismatch { expected: 3, got: 1 }
        ));
    }

    #[test]
    fn linear_net_is_a_dot_product() {
        // no hidden layers: raw output is w.x + b
        let mut net = SurvivalNetwork::new(2, &[], 1, Activation::Rectifier, Head::Risk, 0).unwrap();
        net.set_params(&[2.0, -1.0, 0.5]).unwrap();
        let got = net.score(&[3.0, 4.0]).unwrap();
        assert!((got - (2.0 * 3.0 - 4.0 + 0.5)).abs() < 1e-15);
    }
}
