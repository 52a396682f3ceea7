use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::init::{derive_seed, seeded_rng};
use crate::nn::{
    add_scaled, argmax, scale_params, softmax_cross_entropy, zeros_like, OptimizerConfig, OptimizerState, Parameterized,
};

/// A model trainable by minibatch cross-entropy.
pub trait Trainable: Parameterized + Clone {
    type Input;

    fn n_classes(&self) -> usize;

    fn logits(&self, input: &Self::Input) -> Result<Vec<f64>>;

    /// Adds d loss / d params for one example into `grads` and returns the loss.
    fn accumulate_gradient(&self, input: &Self::Input, label: usize, grads: &mut Self) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example<I> {
    pub input: I,
    pub label: usize,
}

impl<I> Example<I> {
    pub fn new(input: I, label: usize) -> Self {
        Example { input, label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            seed: 0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept: best validation accuracy, ties
    /// broken by lower validation loss, then by the earlier epoch.
    pub best_epoch: Option<usize>,
    pub steps: u64,
}

impl History {
    pub fn best_val_accuracy(&self) -> Option<f64> {
        let best = self.best_epoch?;
        self.epochs.iter().find(|r| r.epoch == best)?.val_accuracy
    }
}

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Mean cross-entropy and its gradient over a batch.
pub fn batch_gradient<M: Trainable>(model: &M, batch: &[&Example<M::Input>]) -> Result<(f64, M)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch_gradient"));
    }
    let mut grads = zeros_like(model);
    let mut total = 0.0;
    for ex in batch {
        check_label(ex.label, model.n_classes())?;
        total += model.accumulate_gradient(&ex.input, ex.label, &mut grads)?;
    }
    let n = batch.len() as f64;
    scale_params(&mut grads, 1.0 / n);
    Ok((total / n, grads))
}

/// Cross-entropy loss of one example, for finite-difference checks.
pub fn example_loss<M: Trainable>(model: &M, ex: &Example<M::Input>) -> Result<f64> {
    check_label(ex.label, model.n_classes())?;
    softmax_cross_entropy(&model.logits(&ex.input)?, ex.label).map(|(l, _)| l)
}

pub fn predict_index<M: Trainable>(model: &M, input: &M::Input) -> Result<usize> {
    Ok(argmax(&model.logits(input)?))
}

pub fn accuracy<M: Trainable>(model: &M, examples: &[Example<M::Input>]) -> Result<f64> {
    score(model, examples).map(|(acc, _)| acc)
}

/// Accuracy and mean cross-entropy.
pub fn score<M: Trainable>(model: &M, examples: &[Example<M::Input>]) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Err(Error::Empty("accuracy"));
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for ex in examples {
        check_label(ex.label, model.n_classes())?;
        let logits = model.logits(&ex.input)?;
        if argmax(&logits) == ex.label {
            correct += 1;
        }
        loss += softmax_cross_entropy(&logits, ex.label)?.0;
    }
    let n = examples.len() as f64;
    Ok((correct as f64 / n, loss / n))
}

/// Minibatch training with a seeded shuffle each epoch. After every epoch
/// the validation accuracy is measured and the best parameters are kept;
/// with no validation data the final parameters are kept.
pub fn train<M: Trainable>(
    model: &mut M,
    train: &[Example<M::Input>],
    val: &[Example<M::Input>],
    config: &TrainConfig,
) -> Result<History> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("train"));
    }
    for ex in train.iter().chain(val) {
        check_label(ex.label, model.n_classes())?;
    }
    let mut optimizer = OptimizerState::new(config.optimizer.clone());
    let mut rng = seeded_rng(derive_seed(config.seed, "batch-order"));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    let mut best: Option<((f64, f64), M)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Example<M::Input>> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = batch_gradient(model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            optimizer.step(model, &grads)?;
            epoch_loss += loss * batch.len() as f64;
        }
        let val_score = if val.is_empty() { None } else { Some(score(model, val)?) };
        log::debug!(
            "epoch {epoch}: train loss {:.4}, val (accuracy, loss) {:?}",
            epoch_loss / train.len() as f64,
            val_score
        );
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_accuracy: val_score.map(|s| s.0),
            val_loss: val_score.map(|s| s.1),
        });
        if let Some((acc, loss)) = val_score {
            let improves = best
                .as_ref()
                .is_none_or(|((b_acc, b_loss), _)| acc > *b_acc || (acc == *b_acc && loss < *b_loss));
            if improves {
                best = Some(((acc, loss), model.clone()));
                history.best_epoch = Some(epoch);
            }
        }
    }
    history.steps = optimizer.step_count();
    match best {
        Some((_, params)) => *model = params,
        None if config.epochs > 0 => history.best_epoch = Some(config.epochs),
        None => {}
    }
    Ok(history)
}

/// Plain SGD step on a single example. Used by gradient-direction tests.
pub fn sgd_step<M: Trainable>(model: &mut M, ex: &Example<M::Input>, lr: f64) -> Result<f64> {
    let (loss, grads) = batch_gradient(model, &[ex])?;
    add_scaled(model, &grads, -lr);
    Ok(loss)
}
