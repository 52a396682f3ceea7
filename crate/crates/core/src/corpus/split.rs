use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::init::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            val_fraction: 0.1,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let s = SplitSpec {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fr.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::Config(format!("split fractions must be positive: {fr:?}")));
        }
        let sum: f64 = fr.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes: floors for train and val, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // the epsilon absorbs representation error in fractions like 4687/7272
        let floor = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let train = floor(self.train_fraction).min(n);
        let val = floor(self.val_fraction).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Seeded shuffle, then contiguous slices. All three splits share the
/// parent's label set.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::Empty("split"));
    }
    let (n_train, n_val, n_test) = spec.sizes(ds.len());
    for (name, n) in [("train", n_train), ("validation", n_val), ("test", n_test)] {
        if n == 0 {
            return Err(Error::EmptySplit(name));
        }
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut seeded_rng(spec.seed));

    let part = |range: std::ops::Range<usize>, name: &str| {
        let messages = order[range].iter().map(|&i| ds.messages[i].clone()).collect();
        let mut provenance = ds.provenance.clone();
        provenance.steps.push(format!(
            "split({name}, fractions={}/{}/{}, seed={})",
            spec.train_fraction, spec.val_fraction, spec.test_fraction, spec.seed
        ));
        Dataset::with_label_set(messages, ds.label_set.clone(), provenance)
    };
    Ok(Splits {
        train: part(0..n_train, "train"),
        val: part(n_train..n_train + n_val, "val"),
        test: part(n_train + n_val..n_train + n_val + n_test, "test"),
    })
}
