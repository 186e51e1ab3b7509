//! Single-layer tanh recurrent network with two heads: a per-slot linear
//! embedding read-out and a terminal sigmoid that scores whether a sequence of
//! segments appears in its true chronological order.
//!
//! ```text
//! h_t = tanh(Wx x_t + Wh h_{t-1} + bh),  h_0 = 0
//! e_t = Ws x_t + Wo h_t + bo            (embedding, dimension D)
//! p   = sigmoid(wv . h_T + bv)          (order verdict)
//! ```
//!
//! Only the recurrent cell and the verdict head receive gradients from the order
//! loss; the read-out keeps its initial values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedder {
    pub input_dim: usize,
    pub hidden: usize,
    /// `hidden x input_dim`, row-major
    pub w_x: Vec<f64>,
    /// `hidden x hidden`
    pub w_h: Vec<f64>,
    pub b_h: Vec<f64>,
    pub w_v: Vec<f64>,
    pub b_v: f64,
    /// `input_dim x input_dim`
    pub w_s: Vec<f64>,
    /// `input_dim x hidden`
    pub w_o: Vec<f64>,
    pub b_o: Vec<f64>,
}

/// A labeled order-verification example: `label` is 1 for chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderSample {
    pub sequence: Vec<Vec<f64>>,
    pub label: f64,
}

/// `-[y ln p + (1 - y) ln(1 - p)]`, with `0 ln 0 = 0`.
pub fn binary_cross_entropy(p: f64, y: f64) -> f64 {
    let mut l = 0.0;
    if y > 0.0 {
        l -= y * p.ln();
    }
    if y < 1.0 {
        l -= (1.0 - y) * (1.0 - p).ln();
    }
    l
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// BCE of `sigmoid(z)` against `y`, stable for large `|z|`.
fn bce_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

fn uniform<R: Rng + ?Sized>(n: usize, limit: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

impl Embedder {
    /// All-zero network.
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Embedder {
            input_dim,
            hidden,
            w_x: vec![0.0; hidden * input_dim],
            w_h: vec![0.0; hidden * hidden],
            b_h: vec![0.0; hidden],
            w_v: vec![0.0; hidden],
            b_v: 0.0,
            w_s: vec![0.0; input_dim * input_dim],
            w_o: vec![0.0; input_dim * hidden],
            b_o: vec![0.0; input_dim],
        }
    }

    /// Xavier-uniform recurrent weights, identity skip read-out, and a context
    /// read-out scaled by `readout_scale`.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: usize, readout_scale: f64, rng: &mut R) -> Self {
        let mut e = Embedder::zeros(input_dim, hidden);
        let (d, h) = (input_dim as f64, hidden as f64);
        e.w_x = uniform(hidden * input_dim, (6.0 / (d + h)).sqrt(), rng);
        e.w_h = uniform(hidden * hidden, (6.0 / (2.0 * h)).sqrt() * 0.5, rng);
        e.w_v = uniform(hidden, (6.0 / (h + 1.0)).sqrt(), rng);
        e.w_o = uniform(input_dim * hidden, readout_scale * (6.0 / (d + h)).sqrt(), rng);
        for i in 0..input_dim {
            e.w_s[i * input_dim + i] = 1.0;
        }
        e
    }

    fn step(&self, x: &[f64], prev: &[f64], out: &mut [f64]) {
        let (d, h) = (self.input_dim, self.hidden);
        for i in 0..h {
            let mut a = self.b_h[i];
            let wx = &self.w_x[i * d..(i + 1) * d];
            for (w, v) in wx.iter().zip(x) {
                a += w * v;
            }
            let wh = &self.w_h[i * h..(i + 1) * h];
            for (w, v) in wh.iter().zip(prev) {
                a += w * v;
            }
            out[i] = a.tanh();
        }
    }

    /// Hidden states `h_1..h_T`.
    pub fn hidden_states(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut states = Vec::with_capacity(xs.len());
        let mut prev = vec![0.0; self.hidden];
        for x in xs {
            let mut h = vec![0.0; self.hidden];
            self.step(x, &prev, &mut h);
            prev.clone_from(&h);
            states.push(h);
        }
        states
    }

    /// Per-slot embeddings. Slot `t` depends only on inputs `1..=t`.
    pub fn embed(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (d, h) = (self.input_dim, self.hidden);
        let mut prev = vec![0.0; h];
        let mut cur = vec![0.0; h];
        xs.iter()
            .map(|x| {
                self.step(x, &prev, &mut cur);
                std::mem::swap(&mut prev, &mut cur);
                (0..d)
                    .map(|j| {
                        let mut e = self.b_o[j];
                        for (w, v) in self.w_s[j * d..(j + 1) * d].iter().zip(x) {
                            e += w * v;
                        }
                        for (w, v) in self.w_o[j * h..(j + 1) * h].iter().zip(&prev) {
                            e += w * v;
                        }
                        e
                    })
                    .collect()
            })
            .collect()
    }

    fn logit(&self, last: Option<&Vec<f64>>) -> f64 {
        self.b_v
            + last.map_or(0.0, |h| self.w_v.iter().zip(h).map(|(a, b)| a * b).sum())
    }

    /// Probability that `xs` is in chronological order.
    pub fn order_probability(&self, xs: &[Vec<f64>]) -> f64 {
        sigmoid(self.logit(self.hidden_states(xs).last()))
    }

    /// Number of parameters trained by the order loss.
    pub fn num_trainable(&self) -> usize {
        self.w_x.len() + self.w_h.len() + self.b_h.len() + self.w_v.len() + 1
    }

    /// Trainable parameters flattened as `[w_x, w_h, b_h, w_v, b_v]`.
    pub fn trainable(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_trainable());
        v.extend(&self.w_x);
        v.extend(&self.w_h);
        v.extend(&self.b_h);
        v.extend(&self.w_v);
        v.push(self.b_v);
        v
    }

    pub fn set_trainable(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.num_trainable());
        let mut rest = v;
        for dst in [&mut self.w_x, &mut self.w_h, &mut self.b_h, &mut self.w_v] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        self.b_v = rest[0];
    }

    /// Mean binary cross-entropy over `data` and its gradient with respect to
    /// [`Embedder::trainable`], by backpropagation through time.
    pub fn loss_and_gradient(&self, data: &[OrderSample]) -> (f64, Vec<f64>) {
        let (d, h) = (self.input_dim, self.hidden);
        let (nx, nh) = (h * d, h * h);
        let mut grad = vec![0.0; self.num_trainable()];
        let mut loss = 0.0;
        let mut dh = vec![0.0; h];
        let mut da = vec![0.0; h];
        for s in data {
            let states = self.hidden_states(&s.sequence);
            let z = self.logit(states.last());
            loss += bce_logit(z, s.label);
            let dz = sigmoid(z) - s.label;
            let Some(last) = states.last() else {
                *grad.last_mut().unwrap() += dz;
                continue;
            };
            {
                let gv = &mut grad[nx + nh + h..nx + nh + 2 * h];
                for i in 0..h {
                    gv[i] += dz * last[i];
                    dh[i] = dz * self.w_v[i];
                }
            }
            *grad.last_mut().unwrap() += dz;
            for t in (0..states.len()).rev() {
                let ht = &states[t];
                for i in 0..h {
                    da[i] = dh[i] * (1.0 - ht[i] * ht[i]);
                }
                let x = &s.sequence[t];
                for i in 0..h {
                    let g = &mut grad[i * d..(i + 1) * d];
                    for (gj, xj) in g.iter_mut().zip(x) {
                        *gj += da[i] * xj;
                    }
                }
                if t > 0 {
                    let hp = &states[t - 1];
                    for i in 0..h {
                        let g = &mut grad[nx + i * h..nx + (i + 1) * h];
                        for (gj, hj) in g.iter_mut().zip(hp) {
                            *gj += da[i] * hj;
                        }
                    }
                }
                for i in 0..h {
                    grad[nx + nh + i] += da[i];
                }
                for j in 0..h {
                    dh[j] = (0..h).map(|i| self.w_h[i * h + j] * da[i]).sum();
                }
            }
        }
        let n = data.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    /// Gradient descent on the order-verification loss with global-norm clipping.
    /// Returns the mean loss after the last update.
    pub fn train_order_verifier(
        &mut self,
        data: &[OrderSample],
        learning_rate: f64,
        epochs: usize,
        clip_norm: f64,
    ) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("order dataset is empty".into()));
        }
        for _ in 0..epochs {
            let (loss, mut grad) = self.loss_and_gradient(data);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "order-verifier loss diverged ({loss}); lower the learning rate (now {learning_rate})"
                )));
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > clip_norm {
                grad.iter_mut().for_each(|g| *g *= clip_norm / norm);
            }
            let mut w = self.trainable();
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= learning_rate * gi;
            }
            self.set_trainable(&w);
        }
        let loss = self.mean_loss(data);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "order-verifier loss diverged ({loss}); lower the learning rate (now {learning_rate})"
            )));
        }
        Ok(loss)
    }

    pub fn mean_loss(&self, data: &[OrderSample]) -> f64 {
        let total: f64 = data
            .iter()
            .map(|s| bce_logit(self.logit(self.hidden_states(&s.sequence).last()), s.label))
            .sum();
        total / data.len().max(1) as f64
    }
}
