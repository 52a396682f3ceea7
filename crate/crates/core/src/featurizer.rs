//! Meta-data featurization: a fitted vocabulary/statistics state that maps a
//! message's sender, affiliation, timestamp, enumerated and numeric fields
//! to one dense vector of fixed length.
//!
//! Vector layout, in order:
//!
//! | slice            | slots             | encoding                              |
//! |------------------|-------------------|---------------------------------------|
//! | `senders`        | `top_senders`     | one-hot over the most frequent senders |
//! | `affiliations`   | `top_affiliations`| one-hot over the most frequent affiliations |
//! | `sender_freq`    | 1                 | training frequency of the sender      |
//! | `day`            | 7                 | one-hot weekday, Monday first (UTC)   |
//! | `working_hours`  | 1                 | 1 inside the configured working window |
//! | `rush`           | `rush_bins`       | one-hot equal-width time-of-day bin   |
//! | `enum:<field>`   | options of field  | one-hot, fields in name order         |
//! | `numeric:<field>`| 1 each            | z-scored value, fields in name order  |

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Message};
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const FEATURIZER_FORMAT: &str = "metablocks-featurizer/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturizerConfig {
    pub top_senders: usize,
    pub top_affiliations: usize,
    pub rush_bins: usize,
    pub work_start_hour: u32,
    pub work_end_hour: u32,
    pub weekday_only: bool,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            top_senders: 120,
            top_affiliations: 120,
            rush_bins: 50,
            work_start_hour: 9,
            work_end_hour: 18,
            weekday_only: true,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rush_bins == 0 || self.work_start_hour > 23 || self.work_end_hour > 24 {
            return Err(Error::Config(format!("invalid featurizer settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkHours {
    pub start_hour: u32,
    pub end_hour: u32,
    pub weekday_only: bool,
}

impl WorkHours {
    pub fn contains(&self, weekday: u32, hour: u32) -> bool {
        if self.weekday_only && weekday >= 5 {
            return false;
        }
        if self.start_hour <= self.end_hour {
            (self.start_hour..self.end_hour).contains(&hour)
        } else {
            hour >= self.start_hour || hour < self.end_hour
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerModel {
    pub format: String,
    pub sender_slots: usize,
    pub affiliation_slots: usize,
    /// Most frequent senders, count descending then id ascending.
    pub top_senders: Vec<String>,
    pub top_affiliations: Vec<String>,
    pub sender_freq: BTreeMap<String, f64>,
    /// Lower edges of the time-of-day bins, in seconds.
    pub rush_bins: Vec<f64>,
    pub enum_vocabs: BTreeMap<String, Vec<String>>,
    pub numeric_stats: BTreeMap<String, NumericStats>,
    pub work_hours: WorkHours,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceKind {
    OneHot,
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutSlice {
    pub name: String,
    pub range: Range<usize>,
    pub kind: SliceKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    pub slices: Vec<LayoutSlice>,
}

impl FeatureLayout {
    pub fn total(&self) -> usize {
        self.slices.last().map_or(0, |s| s.range.end)
    }

    pub fn get(&self, name: &str) -> Option<&LayoutSlice> {
        self.slices.iter().find(|s| s.name == name)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.slices.iter().map(|s| s.range.len()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn slice(&self, s: &LayoutSlice) -> &[f64] {
        &self.values[s.range.clone()]
    }
}

/// Dedicated `affiliation` field, else the domain of an email-shaped sender.
pub fn affiliation_of(m: &Message) -> Option<String> {
    if let Some(a) = &m.affiliation {
        return Some(a.clone());
    }
    let sender = m.sender.as_deref()?;
    let (_, domain) = sender.rsplit_once('@')?;
    (!domain.is_empty()).then(|| domain.to_string())
}

fn top_k(counts: &BTreeMap<String, usize>, k: usize) -> Vec<String> {
    let mut items: Vec<(&String, &usize)> = counts.iter().collect();
    // BTreeMap iteration is id-ascending; the stable sort keeps that for ties
    items.sort_by(|a, b| b.1.cmp(a.1));
    items.into_iter().take(k).map(|(s, _)| s.clone()).collect()
}

pub fn fit(train: &Dataset, config: &FeaturizerConfig) -> Result<FeaturizerModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("featurizer fit"));
    }
    let n = train.len() as f64;
    let mut senders: BTreeMap<String, usize> = BTreeMap::new();
    let mut affiliations: BTreeMap<String, usize> = BTreeMap::new();
    let mut enum_options: BTreeMap<String, std::collections::BTreeSet<String>> = BTreeMap::new();
    let mut numeric_values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for m in &train.messages {
        if let Some(s) = &m.sender {
            *senders.entry(s.clone()).or_default() += 1;
        }
        if let Some(a) = affiliation_of(m) {
            *affiliations.entry(a).or_default() += 1;
        }
        for (k, v) in &m.enums {
            enum_options.entry(k.clone()).or_default().insert(v.clone());
        }
        for (k, &v) in &m.numerics {
            numeric_values.entry(k.clone()).or_default().push(v);
        }
    }

    let sender_freq = senders.iter().map(|(s, &c)| (s.clone(), c as f64 / n)).collect();
    let rush_bins = (0..config.rush_bins)
        .map(|i| SECONDS_PER_DAY * i as f64 / config.rush_bins as f64)
        .collect();
    let enum_vocabs = enum_options
        .into_iter()
        .map(|(k, opts)| (k, opts.into_iter().collect()))
        .collect();
    let numeric_stats = numeric_values
        .into_iter()
        .map(|(k, xs)| {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
            let std = if var > 0.0 { var.sqrt() } else { 1.0 };
            (k, NumericStats { mean, std })
        })
        .collect();

    Ok(FeaturizerModel {
        format: FEATURIZER_FORMAT.to_string(),
        sender_slots: config.top_senders,
        affiliation_slots: config.top_affiliations,
        top_senders: top_k(&senders, config.top_senders),
        top_affiliations: top_k(&affiliations, config.top_affiliations),
        sender_freq,
        rush_bins,
        enum_vocabs,
        numeric_stats,
        work_hours: WorkHours {
            start_hour: config.work_start_hour,
            end_hour: config.work_end_hour,
            weekday_only: config.weekday_only,
        },
    })
}

impl FeaturizerModel {
    pub fn layout(&self) -> FeatureLayout {
        let mut slices = Vec::new();
        let mut at = 0;
        let mut push = |name: String, len: usize, kind: SliceKind| {
            slices.push(LayoutSlice {
                name,
                range: at..at + len,
                kind,
            });
            at += len;
        };
        push("senders".into(), self.sender_slots, SliceKind::OneHot);
        push("affiliations".into(), self.affiliation_slots, SliceKind::OneHot);
        push("sender_freq".into(), 1, SliceKind::Scalar);
        push("day".into(), 7, SliceKind::OneHot);
        push("working_hours".into(), 1, SliceKind::OneHot);
        push("rush".into(), self.rush_bins.len(), SliceKind::OneHot);
        for (field, opts) in &self.enum_vocabs {
            push(format!("enum:{field}"), opts.len(), SliceKind::OneHot);
        }
        for field in self.numeric_stats.keys() {
            push(format!("numeric:{field}"), 1, SliceKind::Scalar);
        }
        FeatureLayout { slices }
    }

    pub fn feature_dim(&self) -> usize {
        self.sender_slots
            + self.affiliation_slots
            + 1
            + 7
            + 1
            + self.rush_bins.len()
            + self.enum_vocabs.values().map(Vec::len).sum::<usize>()
            + self.numeric_stats.len()
    }

    /// Index of the time-of-day bin containing `seconds` (since midnight).
    pub fn rush_bin(&self, seconds: f64) -> usize {
        self.rush_bins
            .partition_point(|&edge| edge <= seconds)
            .saturating_sub(1)
    }

    pub fn transform(&self, m: &Message) -> FeatureVector {
        let mut v = vec![0.0; self.feature_dim()];
        let mut at = 0;

        if let Some(s) = &m.sender {
            if let Some(i) = self.top_senders.iter().position(|t| t == s) {
                v[at + i] = 1.0;
            }
        }
        at += self.sender_slots;

        if let Some(a) = affiliation_of(m) {
            if let Some(i) = self.top_affiliations.iter().position(|t| *t == a) {
                v[at + i] = 1.0;
            }
        }
        at += self.affiliation_slots;

        v[at] = m
            .sender
            .as_ref()
            .and_then(|s| self.sender_freq.get(s))
            .copied()
            .unwrap_or(0.0);
        at += 1;

        if let Some(ts) = m.timestamp {
            let weekday = ts.weekday().num_days_from_monday();
            v[at + weekday as usize] = 1.0;
            if self.work_hours.contains(weekday, ts.hour()) {
                v[at + 7] = 1.0;
            }
            let secs = f64::from(ts.num_seconds_from_midnight());
            v[at + 8 + self.rush_bin(secs)] = 1.0;
        }
        at += 7 + 1 + self.rush_bins.len();

        for (field, opts) in &self.enum_vocabs {
            if let Some(value) = m.enums.get(field) {
                if let Ok(i) = opts.binary_search(value) {
                    v[at + i] = 1.0;
                }
            }
            at += opts.len();
        }
        for (field, stats) in &self.numeric_stats {
            if let Some(x) = m.numerics.get(field) {
                v[at] = (x - stats.mean) / stats.std;
            }
            at += 1;
        }
        debug_assert_eq!(at, v.len());
        FeatureVector { values: v }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: FeaturizerModel = serde_json::from_str(s)?;
        if model.format != FEATURIZER_FORMAT {
            return Err(Error::Featurizer(format!("unsupported format `{}`", model.format)));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
