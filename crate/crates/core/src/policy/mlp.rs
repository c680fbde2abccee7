//! Dense tanh network with manual reverse-mode gradients.
//!
//! Weights are stored `in x out` so a batch `X` (rows are samples) maps to
//! `X.dot(W) + b`. Hidden layers use tanh, the output layer is linear.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, ApexError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Activations of one batched forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input, the last entry is the output.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Parameter gradients with the same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Shapes only, for checkpoint sidecars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub layer_sizes: Vec<usize>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. The last layer's weights are
    /// multiplied by `output_gain`.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], output_gain: f64, rng: &mut R) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(ApexError::Config(format!("invalid layer sizes {layer_sizes:?}")));
        }
        let layers = layer_sizes.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let gain = if l + 1 == layers { output_gain } else { 1.0 };
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                let u: f64 = rng.random();
                gain * limit * (2.0 * u - 1.0)
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// All-zero network, mostly useful in tests.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(ApexError::Config(format!("invalid layer sizes {layer_sizes:?}")));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect(),
            biases: layer_sizes[1..].iter().map(|&n| Array1::zeros(n)).collect(),
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn shape(&self) -> MlpShape {
        MlpShape {
            layer_sizes: self.layer_sizes.clone(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    /// Batched forward pass keeping every activation.
    pub fn forward_cached(&self, input: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        check_len("Mlp::forward input", self.input_dim(), input.ncols())?;
        let layers = self.weights.len();
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(input.to_owned());
        for l in 0..layers {
            let mut z = activations[l].dot(&self.weights[l]);
            z += &self.biases[l];
            if l + 1 < layers {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut cache = self.forward_cached(input)?;
        Ok(cache.activations.pop().unwrap())
    }

    /// Single-sample forward pass.
    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("Mlp::forward_one", self.input_dim(), input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        Ok(self.forward(x)?.into_raw_vec_and_offset().0)
    }

    /// Gradients of `sum(d_output * output)` with respect to every parameter,
    /// i.e. a vector-Jacobian product seeded with `d_output`.
    pub fn backward(&self, cache: &ForwardCache, d_output: &Array2<f64>) -> Result<MlpGrads> {
        let out = cache.output();
        if out.dim() != d_output.dim() {
            return Err(ApexError::Dimension {
                context: "Mlp::backward seed",
                expected: out.len(),
                actual: d_output.len(),
            });
        }
        let layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        let mut delta = d_output.clone();
        for l in (0..layers).rev() {
            let a_prev = &cache.activations[l];
            gw[l] = a_prev.t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                back.zip_mut_with(a_prev, |d, a| *d *= 1.0 - a * a);
                delta = back;
            }
        }
        Ok(MlpGrads { weights: gw, biases: gb })
    }

    /// Parameters as one flat vector (per layer: weights row-major, then bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("Mlp::set_flat", self.num_params(), flat.len())?;
        let mut i = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for x in w.iter_mut() {
                *x = flat[i];
                i += 1;
            }
            for x in b.iter_mut() {
                *x = flat[i];
                i += 1;
            }
        }
        Ok(())
    }

    pub fn from_flat(layer_sizes: &[usize], flat: &[f64]) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        net.set_flat(flat)?;
        Ok(net)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    /// One descent step on `params` given the loss gradient `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
