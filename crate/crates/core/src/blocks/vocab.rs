use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SPECIALS: [&str; 3] = ["[PAD]", "[UNK]", "[CLS]"];

/// Lowercased alphanumeric runs.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    max_size: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    max_size: usize,
    tokens: Vec<String>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        let index = r
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab {
            tokens: r.tokens,
            index,
            max_size: r.max_size,
        }
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            max_size: v.max_size,
            tokens: v.tokens,
        }
    }
}

/// Token ids of one text: `CLS` first, padded or truncated to a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// `true` marks a padding position.
    pub pad_mask: Vec<bool>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// One past the last non-padding position.
    pub fn effective_len(&self) -> usize {
        self.pad_mask.iter().rposition(|&p| !p).map_or(0, |i| i + 1)
    }
}

impl Vocab {
    /// Keeps the `max_size − 3` most frequent words (ties lexicographic)
    /// after the three reserved specials.
    pub fn build(train: &Dataset, max_size: usize) -> Result<Self> {
        Self::from_texts(train.messages.iter().map(|m| m.text.as_str()), max_size)
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, max_size: usize) -> Result<Self> {
        if max_size < SPECIALS.len() {
            return Err(Error::Config(format!(
                "vocab_size {max_size} leaves no room for special tokens"
            )));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for w in words(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by_key(|e| std::cmp::Reverse(e.1));
        let tokens: Vec<String> = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().take(max_size - SPECIALS.len()).map(|(w, _)| w))
            .collect();
        Ok(VocabRepr { max_size, tokens }.into())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokenize(&self, text: &str, max_len: usize) -> TokenSequence {
        let mut ids = Vec::with_capacity(max_len);
        if max_len > 0 {
            ids.push(CLS);
        }
        for w in words(text) {
            if ids.len() == max_len {
                break;
            }
            ids.push(self.id(&w).unwrap_or(UNK));
        }
        let n_real = ids.len();
        ids.resize(max_len, PAD);
        let pad_mask = (0..max_len).map(|i| i >= n_real).collect();
        TokenSequence { ids, pad_mask }
    }
}
