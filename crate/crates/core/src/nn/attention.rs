//! Post-norm transformer encoder layer: multi-head self-attention, then a
//! position-wise feed-forward network, each wrapped in a residual connection
//! followed by layer normalization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::DenseCache;
use super::norm::NormCache;
use super::{init, join, Activation, DenseLayer, LayerNorm, Parameterized, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionLayer {
    d_model: usize,
    n_heads: usize,
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub ln1: LayerNorm,
    pub ff1: DenseLayer,
    pub ff2: DenseLayer,
    pub ln2: LayerNorm,
}

/// Output of the attention sublayer alone (before residual and norm).
#[derive(Debug, Clone)]
pub struct Attended {
    pub output: Tensor,
    /// One `T × T` row-stochastic matrix per head; masked keys get weight 0.
    pub weights: Vec<Tensor>,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    weights: Vec<Tensor>,
    z: Tensor,
    ln1: NormCache,
    ff1: DenseCache,
    ff2: DenseCache,
    ln2: NormCache,
}

impl AttentionCache {
    /// Feed-forward ReLU inputs, one row per position.
    pub fn ff_pre_activation(&self) -> &Tensor {
        self.ff1.pre_activation()
    }
}

impl AttentionLayer {
    pub fn init<R: Rng + ?Sized>(d_model: usize, n_heads: usize, d_ff: usize, rng: &mut R) -> Result<Self> {
        validate_dims(d_model, n_heads)?;
        Ok(AttentionLayer {
            d_model,
            n_heads,
            wq: init::glorot_uniform(d_model, d_model, rng),
            wk: init::glorot_uniform(d_model, d_model, rng),
            wv: init::glorot_uniform(d_model, d_model, rng),
            wo: init::glorot_uniform(d_model, d_model, rng),
            ln1: LayerNorm::new(d_model),
            ff1: DenseLayer::init(d_model, d_ff, Activation::Relu, rng),
            ff2: DenseLayer::init(d_ff, d_model, Activation::None, rng),
            ln2: LayerNorm::new(d_model),
        })
    }

    /// Builds a layer from explicit projections; the feed-forward network is
    /// supplied as two dense layers (`d_model → d_ff → d_model`).
    pub fn from_parts(n_heads: usize, projections: [Tensor; 4], ff1: DenseLayer, ff2: DenseLayer) -> Result<Self> {
        let [wq, wk, wv, wo] = projections;
        let d_model = wq.rows();
        validate_dims(d_model, n_heads)?;
        for w in [&wq, &wk, &wv, &wo] {
            if w.shape() != (d_model, d_model) {
                return Err(Error::shape(
                    "AttentionLayer",
                    format!("{d_model}x{d_model} projection"),
                    format!("{}x{}", w.rows(), w.cols()),
                ));
            }
        }
        if ff1.in_dim() != d_model || ff2.out_dim() != d_model || ff1.out_dim() != ff2.in_dim() {
            return Err(Error::shape(
                "AttentionLayer",
                format!("feed-forward {d_model} -> h -> {d_model}"),
                format!(
                    "{} -> {} | {} -> {}",
                    ff1.in_dim(),
                    ff1.out_dim(),
                    ff2.in_dim(),
                    ff2.out_dim()
                ),
            ));
        }
        Ok(AttentionLayer {
            d_model,
            n_heads,
            wq,
            wk,
            wv,
            wo,
            ln1: LayerNorm::new(d_model),
            ff1,
            ff2,
            ln2: LayerNorm::new(d_model),
        })
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    fn check_input(&self, x: &Tensor, pad_mask: &[bool]) -> Result<()> {
        if x.rows() == 0 {
            return Err(Error::Empty("attention_forward"));
        }
        if x.cols() != self.d_model {
            return Err(Error::shape("attention_forward", self.d_model, x.cols()));
        }
        if pad_mask.len() != x.rows() {
            return Err(Error::shape("attention_forward pad mask", x.rows(), pad_mask.len()));
        }
        if pad_mask.iter().all(|&p| p) {
            return Err(Error::AllPadded);
        }
        Ok(())
    }

    /// Scaled dot-product multi-head self-attention followed by the output
    /// projection. `pad_mask[j] == true` excludes position `j` as a key.
    pub fn attend(&self, x: &Tensor, pad_mask: &[bool]) -> Result<Attended> {
        self.check_input(x, pad_mask)?;
        let q = x.matmul_t(&self.wq);
        let k = x.matmul_t(&self.wk);
        let v = x.matmul_t(&self.wv);
        let (z, weights) = self.mix(&q, &k, &v, pad_mask);
        Ok(Attended {
            output: z.matmul_t(&self.wo),
            weights,
        })
    }

    fn mix(&self, q: &Tensor, k: &Tensor, v: &Tensor, pad_mask: &[bool]) -> (Tensor, Vec<Tensor>) {
        let t = q.rows();
        let dh = self.d_head();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut z = Tensor::zeros(t, self.d_model);
        let mut all_weights = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let cols = h * dh..(h + 1) * dh;
            let mut w = Tensor::zeros(t, t);
            for i in 0..t {
                let qi = &q.row(i)[cols.clone()];
                let mut max = f64::NEG_INFINITY;
                for j in 0..t {
                    if pad_mask[j] {
                        continue;
                    }
                    let s = super::tensor::dot(qi, &k.row(j)[cols.clone()]) * scale;
                    w.set(i, j, s);
                    max = max.max(s);
                }
                let mut sum = 0.0;
                for j in 0..t {
                    if !pad_mask[j] {
                        let e = (w.get(i, j) - max).exp();
                        w.set(i, j, e);
                        sum += e;
                    }
                }
                for j in 0..t {
                    if !pad_mask[j] {
                        let a = w.get(i, j) / sum;
                        w.set(i, j, a);
                        let vj = &v.row(j)[cols.clone()];
                        for (zc, vc) in z.row_mut(i)[cols.clone()].iter_mut().zip(vj) {
                            *zc += a * vc;
                        }
                    }
                }
            }
            all_weights.push(w);
        }
        (z, all_weights)
    }

    pub fn forward(&self, x: &Tensor, pad_mask: &[bool]) -> Result<Tensor> {
        self.forward_cached(x, pad_mask).map(|(y, _)| y)
    }

    pub fn forward_cached(&self, x: &Tensor, pad_mask: &[bool]) -> Result<(Tensor, AttentionCache)> {
        self.check_input(x, pad_mask)?;
        let q = x.matmul_t(&self.wq);
        let k = x.matmul_t(&self.wk);
        let v = x.matmul_t(&self.wv);
        let (z, weights) = self.mix(&q, &k, &v, pad_mask);
        let mut r1 = z.matmul_t(&self.wo);
        r1.add_assign(x);
        let (h1, ln1) = self.ln1.forward(&r1);
        let (f1, ff1) = self.ff1.forward_seq(&h1)?;
        let (mut r2, ff2) = self.ff2.forward_seq(&f1)?;
        r2.add_assign(&h1);
        let (y, ln2) = self.ln2.forward(&r2);
        Ok((
            y,
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                weights,
                z,
                ln1,
                ff1,
                ff2,
                ln2,
            },
        ))
    }

    /// Accumulates parameter gradients into `grads`; returns `∂loss/∂x`.
    pub fn backward(&self, cache: &AttentionCache, dy: &Tensor, grads: &mut AttentionLayer) -> Tensor {
        let t = dy.rows();
        let dh = self.d_head();
        let scale = 1.0 / (dh as f64).sqrt();

        // feed-forward sublayer
        let dr2 = self.ln2.backward(&cache.ln2, dy, &mut grads.ln2);
        let df1 = self.ff2.backward_seq(&cache.ff2, &dr2, &mut grads.ff2);
        let mut dh1 = self.ff1.backward_seq(&cache.ff1, &df1, &mut grads.ff1);
        dh1.add_assign(&dr2);

        // attention sublayer
        let dr1 = self.ln1.backward(&cache.ln1, &dh1, &mut grads.ln1);
        let mut dx = dr1.clone();
        dr1.t_matmul_into(&cache.z, &mut grads.wo);
        let dz = dr1.matmul(&self.wo);

        let mut dq = Tensor::zeros(t, self.d_model);
        let mut dk = Tensor::zeros(t, self.d_model);
        let mut dv = Tensor::zeros(t, self.d_model);
        for (h, a) in cache.weights.iter().enumerate() {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..t {
                let dzi = &dz.row(i)[cols.clone()];
                // dA[i][j] = dz_i · v_j, only where A is supported
                let da: Vec<f64> = (0..t)
                    .map(|j| {
                        if a.get(i, j) == 0.0 {
                            0.0
                        } else {
                            super::tensor::dot(dzi, &cache.v.row(j)[cols.clone()])
                        }
                    })
                    .collect();
                let weighted: f64 = (0..t).map(|j| a.get(i, j) * da[j]).sum();
                for j in 0..t {
                    let aij = a.get(i, j);
                    if aij == 0.0 {
                        continue;
                    }
                    for (dvc, dzc) in dv.row_mut(j)[cols.clone()].iter_mut().zip(dzi) {
                        *dvc += aij * dzc;
                    }
                    let ds = aij * (da[j] - weighted) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for c in cols.clone() {
                        let qv = cache.q.get(i, c);
                        let kv = cache.k.get(j, c);
                        dq.row_mut(i)[c] += ds * kv;
                        dk.row_mut(j)[c] += ds * qv;
                    }
                }
            }
        }
        dq.t_matmul_into(&cache.x, &mut grads.wq);
        dk.t_matmul_into(&cache.x, &mut grads.wk);
        dv.t_matmul_into(&cache.x, &mut grads.wv);
        dx.add_assign(&dq.matmul(&self.wq));
        dx.add_assign(&dk.matmul(&self.wk));
        dx.add_assign(&dv.matmul(&self.wv));
        dx
    }
}

fn validate_dims(d_model: usize, n_heads: usize) -> Result<()> {
    if n_heads == 0 || d_model == 0 || !d_model.is_multiple_of(n_heads) {
        return Err(Error::Config(format!(
            "d_model {d_model} must be a positive multiple of n_heads {n_heads}"
        )));
    }
    Ok(())
}

impl Parameterized for AttentionLayer {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "wq"), &self.wq);
        f(join(prefix, "wk"), &self.wk);
        f(join(prefix, "wv"), &self.wv);
        f(join(prefix, "wo"), &self.wo);
        self.ln1.visit_params(&join(prefix, "ln1"), f);
        self.ff1.visit_params(&join(prefix, "ff1"), f);
        self.ff2.visit_params(&join(prefix, "ff2"), f);
        self.ln2.visit_params(&join(prefix, "ln2"), f);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "wq"), &mut self.wq);
        f(join(prefix, "wk"), &mut self.wk);
        f(join(prefix, "wv"), &mut self.wv);
        f(join(prefix, "wo"), &mut self.wo);
        self.ln1.visit_params_mut(&join(prefix, "ln1"), f);
        self.ff1.visit_params_mut(&join(prefix, "ff1"), f);
        self.ff2.visit_params_mut(&join(prefix, "ff2"), f);
        self.ln2.visit_params_mut(&join(prefix, "ln2"), f);
    }
}
