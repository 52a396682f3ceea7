use std::collections::BTreeMap;

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrepareReport {
    /// Classes with no nonempty-text message inside their cap.
    pub dropped_classes: Vec<String>,
    pub empty_text_removed: usize,
}

/// Per class: take the first `per_class_cap` messages in corpus order, drop
/// empty texts, keep the `keep_n_longest` longest (unicode characters; ties
/// go to the earlier message). Survivors keep their original relative order.
pub fn prepare_subset(ds: &Dataset, per_class_cap: usize, keep_n_longest: usize) -> Result<(Dataset, PrepareReport)> {
    if per_class_cap < keep_n_longest {
        return Err(Error::Config(format!(
            "per_class_cap {per_class_cap} is smaller than keep_n_longest {keep_n_longest}"
        )));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, m) in ds.messages.iter().enumerate() {
        let slot = by_class.entry(m.label.as_str()).or_default();
        if slot.len() < per_class_cap {
            slot.push(i);
        }
    }

    let mut report = PrepareReport::default();
    let mut keep = vec![false; ds.len()];
    for (label, idxs) in by_class {
        let mut nonempty: Vec<usize> = idxs.into_iter().filter(|&i| !ds.messages[i].text.is_empty()).collect();
        let capped = ds
            .messages
            .iter()
            .filter(|m| m.label == label)
            .count()
            .min(per_class_cap);
        report.empty_text_removed += capped - nonempty.len();
        if nonempty.is_empty() {
            report.dropped_classes.push(label.to_string());
            continue;
        }
        // stable: equal lengths stay in corpus order
        nonempty.sort_by_key(|&i| std::cmp::Reverse(ds.messages[i].char_len()));
        for &i in nonempty.iter().take(keep_n_longest) {
            keep[i] = true;
        }
    }

    let messages = ds
        .messages
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(m, _)| m.clone())
        .collect();
    let mut provenance = ds.provenance.clone();
    provenance.steps.push(format!(
        "prepare_subset(per_class_cap={per_class_cap}, keep_n_longest={keep_n_longest})"
    ));
    Ok((Dataset::new(messages, provenance), report))
}
