use rand::Rng;
use serde::{Deserialize, Serialize};

use super::combine::{Combine, CombineCache};
use super::meta::{MetaBlock, MetaCache};
use super::text::{TextBlock, TextCache};
use super::train::Trainable;
use super::TokenSequence;
use crate::error::{Error, Result};
use crate::nn::{join, softmax_cross_entropy, Activation, DenseLayer, Parameterized, Tape, Tensor};

/// Tokens and metadata features of one message.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInput {
    pub tokens: TokenSequence,
    pub features: Vec<f64>,
}

/// Text block and metadata block joined by a combine strategy, trained as
/// one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockNetwork {
    pub text: TextBlock,
    pub meta: MetaBlock,
    pub combine: Combine,
}

#[derive(Debug, Clone)]
pub struct NetworkCache {
    text: TextCache,
    meta: MetaCache,
    combine: CombineCache,
}

impl BlockNetwork {
    pub fn new(text: TextBlock, meta: MetaBlock, combine: Combine) -> Result<Self> {
        if text.n_classes() != meta.layer2.out_dim() {
            return Err(Error::shape("BlockNetwork", text.n_classes(), meta.layer2.out_dim()));
        }
        Ok(BlockNetwork { text, meta, combine })
    }

    pub fn feature_dim(&self) -> usize {
        self.meta.feature_dim()
    }

    /// Per-block outputs, text first.
    pub fn block_outputs(&self, input: &EncodedInput) -> Result<[Vec<f64>; 2]> {
        Ok([self.text.forward(&input.tokens)?, self.meta.forward(&input.features)?])
    }

    pub fn forward(&self, input: &EncodedInput) -> Result<Vec<f64>> {
        self.combine.forward(&self.block_outputs(input)?)
    }

    pub fn forward_tape(&self, input: &EncodedInput, tape: &mut Tape<NetworkCache>) -> Result<Vec<f64>> {
        let (t, text) = self.text.forward_cached(&input.tokens)?;
        let (m, meta) = self.meta.forward_cached(&input.features)?;
        let (y, combine) = self.combine.forward_cached(&[t, m])?;
        tape.record(NetworkCache { text, meta, combine });
        Ok(y)
    }

    /// Consumes the recorded forward pass.
    pub fn backward_tape(
        &self,
        tape: &mut Tape<NetworkCache>,
        dlogits: &[f64],
        grads: &mut BlockNetwork,
    ) -> Result<()> {
        let cache = tape.take()?;
        let douts = self.combine.backward(&cache.combine, dlogits, &mut grads.combine);
        self.text.backward(&cache.text, &douts[0], &mut grads.text);
        self.meta.backward(&cache.meta, &douts[1], &mut grads.meta);
        Ok(())
    }
}

impl Parameterized for BlockNetwork {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.text.visit_params(&join(prefix, "text"), f);
        self.meta.visit_params(&join(prefix, "meta"), f);
        self.combine.visit_params(&join(prefix, "combine"), f);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.text.visit_params_mut(&join(prefix, "text"), f);
        self.meta.visit_params_mut(&join(prefix, "meta"), f);
        self.combine.visit_params_mut(&join(prefix, "combine"), f);
    }
}

impl Trainable for BlockNetwork {
    type Input = EncodedInput;

    fn n_classes(&self) -> usize {
        self.text.n_classes()
    }

    fn logits(&self, input: &EncodedInput) -> Result<Vec<f64>> {
        self.forward(input)
    }

    fn accumulate_gradient(&self, input: &EncodedInput, label: usize, grads: &mut Self) -> Result<f64> {
        let mut tape = Tape::new();
        let logits = self.forward_tape(input, &mut tape)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, label)?;
        self.backward_tape(&mut tape, &dlogits, grads)?;
        Ok(loss)
    }
}

impl Trainable for TextBlock {
    type Input = EncodedInput;

    fn n_classes(&self) -> usize {
        TextBlock::n_classes(self)
    }

    fn logits(&self, input: &EncodedInput) -> Result<Vec<f64>> {
        self.forward(&input.tokens)
    }

    fn accumulate_gradient(&self, input: &EncodedInput, label: usize, grads: &mut Self) -> Result<f64> {
        let (logits, cache) = self.forward_cached(&input.tokens)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, label)?;
        self.backward(&cache, &dlogits, grads);
        Ok(loss)
    }
}

impl Trainable for DenseLayer {
    type Input = Vec<f64>;

    fn n_classes(&self) -> usize {
        self.out_dim()
    }

    fn logits(&self, input: &Vec<f64>) -> Result<Vec<f64>> {
        self.forward(input)
    }

    fn accumulate_gradient(&self, input: &Vec<f64>, label: usize, grads: &mut Self) -> Result<f64> {
        let (logits, cache) = self.forward_seq(&Tensor::row_vector(input.clone()))?;
        let (loss, dlogits) = softmax_cross_entropy(logits.as_slice(), label)?;
        self.backward_seq(&cache, &Tensor::row_vector(dlogits), grads);
        Ok(loss)
    }
}

/// Linear head over the pooled text representation concatenated with the
/// raw metadata features. A head exactly `d_model` wide ignores the
/// features. With `encoder_frozen` the encoder receives no gradient at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcatClassifier {
    pub encoder: TextBlock,
    pub head: DenseLayer,
    pub encoder_frozen: bool,
}

impl ConcatClassifier {
    pub fn init<R: Rng + ?Sized>(encoder: TextBlock, feature_dim: usize, encoder_frozen: bool, rng: &mut R) -> Self {
        let n_classes = encoder.n_classes();
        let head = DenseLayer::init(encoder.d_model() + feature_dim, n_classes, Activation::None, rng);
        ConcatClassifier {
            encoder,
            head,
            encoder_frozen,
        }
    }

    pub fn uses_features(&self) -> bool {
        self.head.in_dim() > self.encoder.d_model()
    }

    fn joined(&self, cls: &[f64], features: &[f64]) -> Vec<f64> {
        let features = if self.uses_features() { features } else { &[] };
        cls.iter().chain(features).copied().collect()
    }
}

impl Parameterized for ConcatClassifier {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.encoder.visit_params(&join(prefix, "encoder"), f);
        self.head.visit_params(&join(prefix, "head"), f);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.encoder.visit_params_mut(&join(prefix, "encoder"), f);
        self.head.visit_params_mut(&join(prefix, "head"), f);
    }
}

impl Trainable for ConcatClassifier {
    type Input = EncodedInput;

    fn n_classes(&self) -> usize {
        self.head.out_dim()
    }

    fn logits(&self, input: &EncodedInput) -> Result<Vec<f64>> {
        let cls = self.encoder.embed(&input.tokens)?;
        self.head.forward(&self.joined(&cls, &input.features))
    }

    fn accumulate_gradient(&self, input: &EncodedInput, label: usize, grads: &mut Self) -> Result<f64> {
        let (_, text_cache) = self.encoder.forward_cached(&input.tokens)?;
        let x = Tensor::row_vector(self.joined(text_cache.cls(), &input.features));
        let (logits, head_cache) = self.head.forward_seq(&x)?;
        let (loss, dlogits) = softmax_cross_entropy(logits.as_slice(), label)?;
        let dx = self
            .head
            .backward_seq(&head_cache, &Tensor::row_vector(dlogits), &mut grads.head);
        if !self.encoder_frozen {
            let d = self.encoder.d_model();
            self.encoder
                .backward_from_cls(&text_cache, &dx.as_slice()[..d], &mut grads.encoder);
        }
        Ok(loss)
    }
}
