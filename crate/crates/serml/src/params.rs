//! Parameter storage: named row-major tensors, gradient buffers, and the
//! Adam optimizer that updates them.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense row-major matrix of `f64`. Vectors are `rows × 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut() -> f64) -> Self {
        Mat {
            rows,
            cols,
            data: (0..rows * cols).map(|_| f()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `W·x` for `x` of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .map(|(w, xi)| w * xi)
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn frob_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Handle to a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    mat: Mat,
}

/// Ordered collection of named parameter tensors. Registration order is
/// deterministic and defines the [`ParamId`] space, so a store rebuilt from
/// a checkpoint maps onto the same ids.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ParamStore {
    tensors: Vec<NamedTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, mat: Mat) -> ParamId {
        assert!(
            self.tensors.iter().all(|t| t.name != name),
            "duplicate parameter name {name}"
        );
        self.tensors.push(NamedTensor {
            name: name.to_string(),
            mat,
        });
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.tensors[id.0].mat
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.tensors[id.0].mat
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.tensors[id.0].name
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    /// Shape/name compatibility check used when adopting checkpointed tensors.
    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| {
                a.name == b.name && a.mat.rows == b.mat.rows && a.mat.cols == b.mat.cols
            })
    }
}

/// Per-tensor gradient buffers, parallel to a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Gradients {
    bufs: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients {
            bufs: store.tensors.iter().map(|t| vec![0.0; t.mat.len()]).collect(),
        }
    }

    pub fn reset(&mut self) {
        for b in &mut self.bufs {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn buf(&self, id: ParamId) -> &[f64] {
        &self.bufs[id.0]
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, offset: usize, grad: &[f64]) {
        let dst = &mut self.bufs[id.0][offset..offset + grad.len()];
        for (d, g) in dst.iter_mut().zip(grad) {
            *d += g;
        }
    }
}

/// Adaptive-moment gradient descent with bias correction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        Adam {
            m: store.tensors.iter().map(|t| vec![0.0; t.mat.len()]).collect(),
            v: store.tensors.iter().map(|t| vec![0.0; t.mat.len()]).collect(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (idx, tensor) in store.tensors.iter_mut().enumerate() {
            let g = &grads.bufs[idx];
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for (i, p) in tensor.mat.data.iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Plain SGD step, used by numeric descent-property checks.
pub fn sgd_step(store: &mut ParamStore, grads: &Gradients, lr: f64) {
    for (idx, tensor) in store.tensors.iter_mut().enumerate() {
        for (p, g) in tensor.mat.data.iter_mut().zip(&grads.bufs[idx]) {
            *p -= lr * g;
        }
    }
}

pub fn uniform_init<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> impl FnMut() -> f64 + '_ {
    move || rng.gen_range(lo..hi)
}

pub fn gaussian_init<R: Rng>(rng: &mut R, mean: f64, std: f64) -> impl FnMut() -> f64 + '_ {
    // Box-Muller; two uniforms per sample, second draw discarded.
    move || {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        mean + std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
