use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before taking the log. NaN is
/// passed through so divergence stays visible.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty("softmax"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    Ok(out)
}

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::LabelOutOfRange {
        label,
        classes: probs.len(),
    })?;
    if p.is_nan() {
        return Ok(f64::NAN);
    }
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Loss and `∂loss/∂logits = softmax(logits) − onehot(label)` in one pass.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let mut probs = softmax(logits)?;
    let loss = cross_entropy(&probs, label)?;
    probs[label] -= 1.0;
    Ok((loss, probs))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
