use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init, join, Parameterized, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    None,
}

/// Fully connected layer, `act(W·x + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    pre: Tensor,
}

impl DenseCache {
    /// `W·x + b` before the activation.
    pub fn pre_activation(&self) -> &Tensor {
        &self.pre
    }
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape("DenseLayer::new", weights.rows(), bias.len()));
        }
        Ok(DenseLayer {
            weights,
            bias: Tensor::row_vector(bias),
            activation,
        })
    }

    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        DenseLayer {
            weights: init::glorot_uniform(out_dim, in_dim, rng),
            bias: Tensor::zeros(1, out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim() {
            return Err(Error::shape(
                "dense_forward",
                format!("input of length {}", self.in_dim()),
                input.len(),
            ));
        }
        let out = (0..self.out_dim())
            .map(|o| {
                let z = super::tensor::dot(self.weights.row(o), input) + self.bias.as_slice()[o];
                self.activate(z)
            })
            .collect();
        Ok(out)
    }

    /// Row-wise forward over a `T × in` matrix.
    pub fn forward_seq(&self, x: &Tensor) -> Result<(Tensor, DenseCache)> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape(
                "dense_forward",
                format!("{} input columns", self.in_dim()),
                x.cols(),
            ));
        }
        let mut pre = x.matmul_t(&self.weights);
        for r in 0..pre.rows() {
            for (v, b) in pre.row_mut(r).iter_mut().zip(self.bias.as_slice()) {
                *v += b;
            }
        }
        let mut out = pre.clone();
        if self.activation == Activation::Relu {
            out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok((out, DenseCache { input: x.clone(), pre }))
    }

    /// Accumulates parameter gradients into `grads` and returns `∂loss/∂input`.
    pub fn backward_seq(&self, cache: &DenseCache, dout: &Tensor, grads: &mut DenseLayer) -> Tensor {
        let mut dpre = dout.clone();
        if self.activation == Activation::Relu {
            for (d, &p) in dpre.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
                if p <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        dpre.t_matmul_into(&cache.input, &mut grads.weights);
        for r in 0..dpre.rows() {
            for (g, d) in grads.bias.as_mut_slice().iter_mut().zip(dpre.row(r)) {
                *g += d;
            }
        }
        dpre.matmul(&self.weights)
    }

    #[inline]
    fn activate(&self, z: f64) -> f64 {
        match self.activation {
            Activation::Relu => z.max(0.0),
            Activation::None => z,
        }
    }
}

impl Parameterized for DenseLayer {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "weights"), &self.weights);
        f(join(prefix, "bias"), &self.bias);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "weights"), &mut self.weights);
        f(join(prefix, "bias"), &mut self.bias);
    }
}
