use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::Message;

/// Where a dataset came from and what was done to it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub messages: Vec<Message>,
    /// Distinct labels in lexicographic order.
    pub label_set: Vec<String>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(messages: Vec<Message>, provenance: Provenance) -> Self {
        let label_set = messages
            .iter()
            .map(|m| m.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Dataset {
            messages,
            label_set,
            provenance,
        }
    }

    /// Keeps an externally fixed label set (e.g. shared across splits).
    pub fn with_label_set(messages: Vec<Message>, label_set: Vec<String>, provenance: Provenance) -> Self {
        Dataset {
            messages,
            label_set,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_set.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for m in &self.messages {
            *counts.entry(m.label.clone()).or_insert(0) += 1;
        }
        counts
    }
}
