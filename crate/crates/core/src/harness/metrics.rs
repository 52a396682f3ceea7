use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// `None` when the class was never predicted.
    pub precision: Option<f64>,
    /// `None` when the class never occurs in the gold labels.
    pub recall: Option<f64>,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
}

pub fn evaluate(predictions: &[usize], gold: &[usize], n_classes: usize) -> Result<Evaluation> {
    if predictions.len() != gold.len() {
        return Err(Error::shape("evaluate", gold.len(), predictions.len()));
    }
    if gold.is_empty() {
        return Err(Error::Empty("evaluate"));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &g) in predictions.iter().zip(gold) {
        for label in [p, g] {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: n_classes,
                });
            }
        }
        confusion[g][p] += 1;
    }
    let correct = (0..n_classes).map(|c| confusion[c][c]).sum();
    let per_class = (0..n_classes)
        .map(|c| {
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let ratio = |n: usize| (n > 0).then(|| confusion[c][c] as f64 / n as f64);
            ClassMetrics {
                precision: ratio(predicted),
                recall: ratio(support),
                support,
            }
        })
        .collect();
    Ok(Evaluation {
        accuracy: correct as f64 / gold.len() as f64,
        correct,
        total: gold.len(),
        confusion,
        per_class,
    })
}
