//! The Q-network: `L → 2L (ReLU) → 2L (ReLU) → L (linear)`, hand-written
//! backpropagation and a Nesterov-accelerated Adam optimizer.
//!
//! All parameters live in one flat buffer laid out as
//! `[W1 | b1 | W2 | b2 | W3 | b3]`, weights row-major with one row per output
//! unit. Gradients and optimizer moments reuse the same layout, so the
//! optimizer and the checkpoint code only ever see a flat slice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    bands: usize,
    hidden: usize,
}

impl Layout {
    fn new(bands: usize) -> Self {
        Self {
            bands,
            hidden: 2 * bands,
        }
    }

    fn w1(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.bands
    }
    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.w1().end;
        s..s + self.hidden
    }
    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.b1().end;
        s..s + self.hidden * self.hidden
    }
    fn b2(&self) -> std::ops::Range<usize> {
        let s = self.w2().end;
        s..s + self.hidden
    }
    fn w3(&self) -> std::ops::Range<usize> {
        let s = self.b2().end;
        s..s + self.bands * self.hidden
    }
    fn b3(&self) -> std::ops::Range<usize> {
        let s = self.w3().end;
        s..s + self.bands
    }
    fn len(&self) -> usize {
        self.b3().end
    }
}

/// Weights and biases of the three fully connected layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetworkParams {
    bands: usize,
    data: Vec<f64>,
}

/// Pre-activations and activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
}

impl ForwardCache {
    pub fn hidden1_preactivation(&self) -> &[f64] {
        &self.z1
    }

    pub fn hidden2_preactivation(&self) -> &[f64] {
        &self.z2
    }
}

fn affine(weights: &[f64], bias: &[f64], input: &[f64], out: &mut Vec<f64>) {
    let cols = input.len();
    out.clear();
    out.extend(bias.iter().enumerate().map(|(r, &b)| {
        let row = &weights[r * cols..(r + 1) * cols];
        b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
    }));
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

impl QNetworkParams {
    /// All-zero parameters for `bands` inputs/outputs.
    pub fn zeros(bands: usize) -> Self {
        Self {
            bands,
            data: vec![0.0; Layout::new(bands).len()],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(bands: usize, rng: &mut R) -> Result<Self> {
        if bands == 0 {
            return Err(Error::Config("network needs at least one band".into()));
        }
        let layout = Layout::new(bands);
        let mut p = Self::zeros(bands);
        let h = layout.hidden;
        for (range, fan_in, fan_out) in [(layout.w1(), bands, h), (layout.w2(), h, h), (layout.w3(), h, bands)] {
            let bound = glorot_bound(fan_in, fan_out);
            for w in &mut p.data[range] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(p)
    }

    /// Rebuilds parameters from a flat buffer in the canonical layout.
    pub fn from_flat(bands: usize, data: Vec<f64>) -> Result<Self> {
        let expected = Layout::new(bands).len();
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { bands, data })
    }

    fn layout(&self) -> Layout {
        Layout::new(self.bands)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn hidden(&self) -> usize {
        2 * self.bands
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[self.layout().w1()]
    }
    pub fn b1(&self) -> &[f64] {
        &self.data[self.layout().b1()]
    }
    pub fn w2(&self) -> &[f64] {
        &self.data[self.layout().w2()]
    }
    pub fn b2(&self) -> &[f64] {
        &self.data[self.layout().b2()]
    }
    pub fn w3(&self) -> &[f64] {
        &self.data[self.layout().w3()]
    }
    pub fn b3(&self) -> &[f64] {
        &self.data[self.layout().b3()]
    }
    pub fn b3_mut(&mut self) -> &mut [f64] {
        let r = self.layout().b3();
        &mut self.data[r]
    }

    /// `(rows, cols)` of W1, W2 and W3.
    pub fn weight_shapes(&self) -> [(usize, usize); 3] {
        let (l, h) = (self.bands, self.hidden());
        [(h, l), (h, h), (l, h)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Q-values for every action.
    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.forward(state).map(|(q, _)| q)
    }

    pub fn forward(&self, state: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if state.len() != self.bands {
            return Err(Error::ShapeMismatch {
                expected: self.bands,
                found: state.len(),
            });
        }
        let mut z1 = Vec::new();
        affine(self.w1(), self.b1(), state, &mut z1);
        let h1 = relu(&z1);
        let mut z2 = Vec::new();
        affine(self.w2(), self.b2(), &h1, &mut z2);
        let h2 = relu(&z2);
        let mut q = Vec::new();
        affine(self.w3(), self.b3(), &h2, &mut q);
        Ok((
            q,
            ForwardCache {
                input: state.to_vec(),
                z1,
                h1,
                z2,
                h2,
            },
        ))
    }

    /// Gradients of a loss with respect to all parameters, given `dloss_dq`.
    pub fn backward(&self, cache: &ForwardCache, dloss_dq: &[f64]) -> Result<QNetworkParams> {
        let mut grads = QNetworkParams::zeros(self.bands);
        self.backward_into(cache, dloss_dq, &mut grads)?;
        Ok(grads)
    }

    /// Like [`backward`](Self::backward) but adds into an existing gradient buffer.
    pub fn backward_into(&self, cache: &ForwardCache, dloss_dq: &[f64], grads: &mut QNetworkParams) -> Result<()> {
        let (l, h) = (self.bands, self.hidden());
        if dloss_dq.len() != l {
            return Err(Error::ShapeMismatch {
                expected: l,
                found: dloss_dq.len(),
            });
        }
        if cache.input.len() != l || cache.h1.len() != h || grads.bands != l {
            return Err(Error::ShapeMismatch {
                expected: l,
                found: cache.input.len(),
            });
        }
        let layout = self.layout();
        let g = &mut grads.data;

        // Output layer.
        let mut dh2 = vec![0.0; h];
        for (o, &d) in dloss_dq.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g[layout.b3().start + o] += d;
            let row = layout.w3().start + o * h;
            for j in 0..h {
                g[row + j] += d * cache.h2[j];
                dh2[j] += d * self.data[row + j];
            }
        }
        let dz2: Vec<f64> = dh2
            .iter()
            .zip(&cache.z2)
            .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
            .collect();

        // Second hidden layer.
        let mut dh1 = vec![0.0; h];
        for (o, &d) in dz2.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g[layout.b2().start + o] += d;
            let row = layout.w2().start + o * h;
            for j in 0..h {
                g[row + j] += d * cache.h1[j];
                dh1[j] += d * self.data[row + j];
            }
        }
        let dz1: Vec<f64> = dh1
            .iter()
            .zip(&cache.z1)
            .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
            .collect();

        // First hidden layer.
        for (o, &d) in dz1.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g[layout.b1().start + o] += d;
            let row = layout.w1().start + o * l;
            for j in 0..l {
                g[row + j] += d * cache.input[j];
            }
        }
        Ok(())
    }
}

/// `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Nesterov-accelerated Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nadam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl Nadam {
    pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;
    pub const DEFAULT_BETA1: f64 = 0.9;
    pub const DEFAULT_BETA2: f64 = 0.999;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(len: usize, learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon: Self::DEFAULT_EPSILON,
            step: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
        }
    }

    pub fn with_defaults(len: usize) -> Self {
        Self::new(
            len,
            Self::DEFAULT_LEARNING_RATE,
            Self::DEFAULT_BETA1,
            Self::DEFAULT_BETA2,
        )
    }

    /// Rebuilds a saved optimizer.
    pub fn from_parts(
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        step: u64,
        first_moment: Vec<f64>,
        second_moment: Vec<f64>,
    ) -> Result<Self> {
        if first_moment.len() != second_moment.len() {
            return Err(Error::ShapeMismatch {
                expected: first_moment.len(),
                found: second_moment.len(),
            });
        }
        Ok(Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step,
            first_moment,
            second_moment,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One update. Nothing is modified when a gradient is non-finite.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch {
                expected: self.first_moment.len(),
                found: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        self.step += 1;
        let t = self.step as f64;
        let (b1, b2) = (self.beta1, self.beta2);
        let momentum_correction = 1.0 - b1.powf(t + 1.0);
        let grad_correction = 1.0 - b1.powf(t);
        let second_correction = 1.0 - b2.powf(t);
        for (((theta, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = b1 * *m / momentum_correction + (1.0 - b1) * g / grad_correction;
            let v_hat = *v / second_correction;
            *theta -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
