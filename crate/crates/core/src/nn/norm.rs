use serde::{Deserialize, Serialize};

use super::{join, Parameterized, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row layer normalization with learned gain and shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
}

#[derive(Debug, Clone)]
pub struct NormCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        let mut gamma = Tensor::zeros(1, dim);
        gamma.fill(1.0);
        LayerNorm {
            gamma,
            beta: Tensor::zeros(1, dim),
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, NormCache) {
        let d = x.cols();
        let mut xhat = Tensor::zeros(x.rows(), d);
        let mut out = Tensor::zeros(x.rows(), d);
        let mut inv_std = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(inv);
            for c in 0..d {
                let h = (row[c] - mean) * inv;
                xhat.set(r, c, h);
                out.set(r, c, self.gamma.as_slice()[c] * h + self.beta.as_slice()[c]);
            }
        }
        (out, NormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &NormCache, dy: &Tensor, grads: &mut LayerNorm) -> Tensor {
        let d = dy.cols();
        let mut dx = Tensor::zeros(dy.rows(), d);
        let gamma = self.gamma.as_slice();
        for r in 0..dy.rows() {
            let dyr = dy.row(r);
            let xh = cache.xhat.row(r);
            let mut mean_dxhat = 0.0;
            let mut mean_dxhat_xhat = 0.0;
            for c in 0..d {
                let dxhat = dyr[c] * gamma[c];
                mean_dxhat += dxhat;
                mean_dxhat_xhat += dxhat * xh[c];
                grads.gamma.as_mut_slice()[c] += dyr[c] * xh[c];
                grads.beta.as_mut_slice()[c] += dyr[c];
            }
            mean_dxhat /= d as f64;
            mean_dxhat_xhat /= d as f64;
            let inv = cache.inv_std[r];
            for c in 0..d {
                let dxhat = dyr[c] * gamma[c];
                dx.set(r, c, inv * (dxhat - mean_dxhat - xh[c] * mean_dxhat_xhat));
            }
        }
        dx
    }
}

impl Parameterized for LayerNorm {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "gamma"), &self.gamma);
        f(join(prefix, "beta"), &self.beta);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "gamma"), &mut self.gamma);
        f(join(prefix, "beta"), &mut self.beta);
    }
}
