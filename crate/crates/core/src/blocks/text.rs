use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, TokenSequence};
use crate::error::{Error, Result};
use crate::nn::{
    init, join, Activation, AttentionCache, AttentionLayer, DenseCache, DenseLayer, Parameterized, Tensor,
};

pub const EMBEDDING_STD: f64 = 1.0;
pub const POSITION_STD: f64 = 0.1;

/// Transformer text encoder with a class head on the `CLS` position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub embedding: Tensor,
    pub positions: Tensor,
    pub layers: Vec<AttentionLayer>,
    pub head: DenseLayer,
}

#[derive(Debug, Clone)]
pub struct TextCache {
    ids: Vec<u32>,
    layers: Vec<AttentionCache>,
    cls: Vec<f64>,
    head: DenseCache,
}

impl TextCache {
    pub fn cls(&self) -> &[f64] {
        &self.cls
    }
}

impl TextBlock {
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, vocab_len: usize, n_classes: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let layers = (0..cfg.n_layers)
            .map(|_| AttentionLayer::init(cfg.d_model, cfg.n_heads, cfg.d_ff, rng))
            .collect::<Result<_>>()?;
        Ok(TextBlock {
            embedding: init::normal(vocab_len, cfg.d_model, EMBEDDING_STD, rng),
            positions: init::normal(cfg.max_len, cfg.d_model, POSITION_STD, rng),
            layers,
            head: DenseLayer::init(cfg.d_model, n_classes, Activation::None, rng),
        })
    }

    pub fn d_model(&self) -> usize {
        self.embedding.cols()
    }

    pub fn max_len(&self) -> usize {
        self.positions.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.head.out_dim()
    }

    fn check(&self, seq: &TokenSequence) -> Result<()> {
        if seq.ids.len() != self.max_len() || seq.pad_mask.len() != self.max_len() {
            return Err(Error::shape("text_block_forward", self.max_len(), seq.ids.len()));
        }
        if let Some(&bad) = seq.ids.iter().find(|&&id| id as usize >= self.embedding.rows()) {
            return Err(Error::shape(
                "text_block_forward token id",
                format!("< {}", self.embedding.rows()),
                bad,
            ));
        }
        Ok(())
    }

    /// Runs the encoder and returns the pooled `CLS` vector with its cache.
    ///
    /// Trailing padding is dropped before attention; padded keys are masked
    /// anyway, so this does not change any unpadded output.
    fn encode(&self, seq: &TokenSequence) -> Result<(Vec<f64>, Vec<u32>, Vec<AttentionCache>)> {
        self.check(seq)?;
        let t = seq.effective_len();
        if t == 0 {
            return Err(Error::AllPadded);
        }
        let mask = &seq.pad_mask[..t];
        let d = self.d_model();
        let mut x = Tensor::zeros(t, d);
        for (pos, &id) in seq.ids[..t].iter().enumerate() {
            let emb = self.embedding.row(id as usize);
            let p = self.positions.row(pos);
            for (c, dst) in x.row_mut(pos).iter_mut().enumerate() {
                *dst = emb[c] + p[c];
            }
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, cache) = layer.forward_cached(&x, mask)?;
            caches.push(cache);
            x = y;
        }
        Ok((x.row(0).to_vec(), seq.ids[..t].to_vec(), caches))
    }

    /// Pooled `CLS` representation (length `d_model`).
    pub fn embed(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        self.encode(seq).map(|(cls, _, _)| cls)
    }

    pub fn forward(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        let cls = self.embed(seq)?;
        self.head.forward(&cls)
    }

    pub fn forward_cached(&self, seq: &TokenSequence) -> Result<(Vec<f64>, TextCache)> {
        let (cls, ids, layers) = self.encode(seq)?;
        let (logits, head) = self.head.forward_seq(&Tensor::row_vector(cls.clone()))?;
        Ok((logits.into_vec(), TextCache { ids, layers, cls, head }))
    }

    pub fn backward(&self, cache: &TextCache, dlogits: &[f64], grads: &mut TextBlock) {
        let dcls = self
            .head
            .backward_seq(&cache.head, &Tensor::row_vector(dlogits.to_vec()), &mut grads.head);
        self.backward_from_cls(cache, dcls.as_slice(), grads);
    }

    /// Backpropagates a gradient on the pooled `CLS` vector into the encoder
    /// (head untouched).
    pub fn backward_from_cls(&self, cache: &TextCache, dcls: &[f64], grads: &mut TextBlock) {
        let t = cache.ids.len();
        let mut dx = Tensor::zeros(t, self.d_model());
        dx.row_mut(0).copy_from_slice(dcls);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            dx = layer.backward(&cache.layers[i], &dx, &mut grads.layers[i]);
        }
        for (pos, &id) in cache.ids.iter().enumerate() {
            let src = dx.row(pos);
            for (g, d) in grads.embedding.row_mut(id as usize).iter_mut().zip(src) {
                *g += d;
            }
            for (g, d) in grads.positions.row_mut(pos).iter_mut().zip(src) {
                *g += d;
            }
        }
    }
}

impl Parameterized for TextBlock {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "embedding"), &self.embedding);
        f(join(prefix, "positions"), &self.positions);
        for (i, l) in self.layers.iter().enumerate() {
            l.visit_params(&join(prefix, &format!("layers.{i}")), f);
        }
        self.head.visit_params(&join(prefix, "head"), f);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "embedding"), &mut self.embedding);
        f(join(prefix, "positions"), &mut self.positions);
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_params_mut(&join(prefix, &format!("layers.{i}")), f);
        }
        self.head.visit_params_mut(&join(prefix, "head"), f);
    }
}
