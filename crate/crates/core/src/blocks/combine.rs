use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{join, softmax, Activation, DenseCache, DenseLayer, Parameterized, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineKind {
    Average,
    WeightedConcat,
}

impl CombineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CombineKind::Average => "average",
            CombineKind::WeightedConcat => "weighted_concat",
        }
    }
}

impl fmt::Display for CombineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CombineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(CombineKind::Average),
            "weighted_concat" => Ok(CombineKind::WeightedConcat),
            other => Err(Error::Config(format!("unknown combine strategy {other:?}"))),
        }
    }
}

/// What the average strategy averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageOf {
    /// Element-wise mean of the raw block outputs.
    #[default]
    Logits,
    /// Mean of per-block softmax distributions, returned as log-probabilities
    /// so a downstream softmax recovers the mean exactly.
    Probabilities,
}

/// Merges per-block class scores into one logit vector. Block order is
/// fixed: text first, metadata second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Combine {
    Average {
        #[serde(default)]
        of: AverageOf,
    },
    WeightedConcat {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hidden: Option<DenseLayer>,
        head: DenseLayer,
    },
}

#[derive(Debug, Clone)]
pub enum CombineCache {
    Average {
        n: usize,
        probs: Option<(Vec<Vec<f64>>, Vec<f64>)>,
    },
    WeightedConcat {
        widths: Vec<usize>,
        hidden: Option<DenseCache>,
        head: DenseCache,
    },
}

impl Combine {
    pub fn average() -> Self {
        Combine::Average { of: AverageOf::Logits }
    }

    /// `hidden` adds a ReLU layer of that width before the linear head.
    pub fn weighted_concat<R: Rng + ?Sized>(
        n_blocks: usize,
        n_classes: usize,
        hidden: Option<usize>,
        rng: &mut R,
    ) -> Self {
        let width = n_blocks * n_classes;
        match hidden {
            Some(h) => Combine::WeightedConcat {
                hidden: Some(DenseLayer::init(width, h, Activation::Relu, rng)),
                head: DenseLayer::init(h, n_classes, Activation::None, rng),
            },
            None => Combine::WeightedConcat {
                hidden: None,
                head: DenseLayer::init(width, n_classes, Activation::None, rng),
            },
        }
    }

    pub fn init<R: Rng + ?Sized>(
        kind: CombineKind,
        n_blocks: usize,
        n_classes: usize,
        hidden: Option<usize>,
        average_of: AverageOf,
        rng: &mut R,
    ) -> Self {
        match kind {
            CombineKind::Average => Combine::Average { of: average_of },
            CombineKind::WeightedConcat => Combine::weighted_concat(n_blocks, n_classes, hidden, rng),
        }
    }

    pub fn kind(&self) -> CombineKind {
        match self {
            Combine::Average { .. } => CombineKind::Average,
            Combine::WeightedConcat { .. } => CombineKind::WeightedConcat,
        }
    }

    pub fn forward(&self, outputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.forward_cached(outputs).map(|(y, _)| y)
    }

    pub fn forward_cached(&self, outputs: &[Vec<f64>]) -> Result<(Vec<f64>, CombineCache)> {
        if outputs.is_empty() {
            return Err(Error::Empty("combine"));
        }
        match self {
            Combine::Average { of } => {
                let c = outputs[0].len();
                if let Some(bad) = outputs.iter().find(|o| o.len() != c) {
                    return Err(Error::shape("combine average", c, bad.len()));
                }
                let n = outputs.len();
                match of {
                    AverageOf::Logits => {
                        let mut y = vec![0.0; c];
                        for o in outputs {
                            for (acc, v) in y.iter_mut().zip(o) {
                                *acc += v;
                            }
                        }
                        y.iter_mut().for_each(|v| *v /= n as f64);
                        Ok((y, CombineCache::Average { n, probs: None }))
                    }
                    AverageOf::Probabilities => {
                        let probs: Vec<Vec<f64>> = outputs.iter().map(|o| softmax(o)).collect::<Result<_>>()?;
                        let mut mean = vec![0.0; c];
                        for p in &probs {
                            for (acc, v) in mean.iter_mut().zip(p) {
                                *acc += v / n as f64;
                            }
                        }
                        mean.iter_mut().for_each(|v| *v = v.max(f64::MIN_POSITIVE));
                        let y = mean.iter().map(|v| v.ln()).collect();
                        Ok((
                            y,
                            CombineCache::Average {
                                n,
                                probs: Some((probs, mean)),
                            },
                        ))
                    }
                }
            }
            Combine::WeightedConcat { hidden, head } => {
                let widths: Vec<usize> = outputs.iter().map(Vec::len).collect();
                let concat: Vec<f64> = outputs.iter().flatten().copied().collect();
                let expected = hidden.as_ref().map_or(head.in_dim(), DenseLayer::in_dim);
                if concat.len() != expected {
                    return Err(Error::shape("combine weighted_concat", expected, concat.len()));
                }
                let x = Tensor::row_vector(concat);
                let (x, hidden_cache) = match hidden {
                    Some(layer) => {
                        let (h, cache) = layer.forward_seq(&x)?;
                        (h, Some(cache))
                    }
                    None => (x, None),
                };
                let (y, head_cache) = head.forward_seq(&x)?;
                Ok((
                    y.into_vec(),
                    CombineCache::WeightedConcat {
                        widths,
                        hidden: hidden_cache,
                        head: head_cache,
                    },
                ))
            }
        }
    }

    /// Returns the gradient for each block output, in input order.
    pub fn backward(&self, cache: &CombineCache, dout: &[f64], grads: &mut Combine) -> Vec<Vec<f64>> {
        match (self, cache, grads) {
            (Combine::Average { .. }, CombineCache::Average { n, probs }, _) => match probs {
                None => vec![dout.iter().map(|d| d / *n as f64).collect(); *n],
                Some((probs, mean)) => {
                    let dp: Vec<f64> = dout.iter().zip(mean).map(|(d, m)| d / m / *n as f64).collect();
                    probs
                        .iter()
                        .map(|s| {
                            let inner: f64 = s.iter().zip(&dp).map(|(a, b)| a * b).sum();
                            s.iter().zip(&dp).map(|(si, di)| si * (di - inner)).collect()
                        })
                        .collect()
                }
            },
            (
                Combine::WeightedConcat { hidden, head },
                CombineCache::WeightedConcat {
                    widths,
                    hidden: hidden_cache,
                    head: head_cache,
                },
                Combine::WeightedConcat {
                    hidden: g_hidden,
                    head: g_head,
                },
            ) => {
                let mut dx = head.backward_seq(head_cache, &Tensor::row_vector(dout.to_vec()), g_head);
                if let (Some(layer), Some(c), Some(g)) = (hidden, hidden_cache, g_hidden.as_mut()) {
                    dx = layer.backward_seq(c, &dx, g);
                }
                let flat = dx.into_vec();
                let mut offset = 0;
                widths
                    .iter()
                    .map(|&w| {
                        let part = flat[offset..offset + w].to_vec();
                        offset += w;
                        part
                    })
                    .collect()
            }
            _ => unreachable!("combine cache and gradient must come from the same strategy"),
        }
    }
}

impl Parameterized for Combine {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        if let Combine::WeightedConcat { hidden, head } = self {
            if let Some(h) = hidden {
                h.visit_params(&join(prefix, "hidden"), f);
            }
            head.visit_params(&join(prefix, "head"), f);
        }
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        if let Combine::WeightedConcat { hidden, head } = self {
            if let Some(h) = hidden {
                h.visit_params_mut(&join(prefix, "hidden"), f);
            }
            head.visit_params_mut(&join(prefix, "head"), f);
        }
    }
}
