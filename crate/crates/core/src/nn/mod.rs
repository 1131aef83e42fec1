//! Small fixed-topology network stack with hand-written backward passes.
//!
//! Everything runs per sample on `f64`; minibatches are formed by summing
//! per-sample gradients in a fixed order, which keeps training bit-reproducible.

mod gradcheck;
mod layer;
mod loss;
mod network;
mod optim;

pub use gradcheck::{grad_check, relative_error};
pub use layer::LayerSpec;
pub use loss::{cross_entropy, mse_loss, softmax};
pub use network::{Cache, Network};
pub use optim::{sgd_step, Optimizer, OptimizerKind};

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Named set of parameter tensors that is trained or frozen as a unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub tensors: Vec<Tensor>,
    pub trainable: bool,
}

impl ParamGroup {
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.tensors.iter().map(|t| Tensor::zeros(&t.shape)).collect()
    }
}

/// Adds `src` into `dst` tensor by tensor.
pub fn accumulate(dst: &mut [Tensor], src: &[Tensor]) {
    for (d, s) in dst.iter_mut().zip(src) {
        d.add_assign(s);
    }
}
