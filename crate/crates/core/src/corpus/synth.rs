//! Deterministic synthetic corpora with a known text/meta-data information
//! split.
//!
//! Every class `c` is assigned a text *topic* (a keyword pool) and a
//! meta-data *profile* (a sender group plus an arrival-time window).
//!
//! * `MetadataOnly`: classes come in pairs `(2k, 2k+1)` that share topic `k`,
//!   and profile is `c % 2`. Text identifies the pair and meta-data
//!   identifies the member, so a text-only classifier is capped at 1/2 on
//!   every pair (Bayes accuracy 0.5), while text and meta-data together
//!   identify the class exactly. An odd trailing class gets its own topic.
//! * `Conflict`: topic and profile both equal the class, but a fixed fraction
//!   of each class carries another class's keywords. Labels always follow
//!   the meta-data.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Message, Provenance};
use crate::error::{Error, Result};
use crate::nn::init::{derive_seed, seeded_rng, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    MetadataOnly,
    Conflict,
}

impl std::str::FromStr for SynthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metadata_only" => Ok(SynthMode::MetadataOnly),
            "conflict" => Ok(SynthMode::Conflict),
            other => Err(Error::Config(format!(
                "unknown synthetic mode `{other}` (expected metadata_only or conflict)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_per_class: usize,
    pub n_classes: usize,
    pub mode: SynthMode,
    /// Share of each class carrying another class's keywords (conflict mode).
    pub conflict_fraction: f64,
    /// 0 gives balanced classes; class `c` gets
    /// `n_per_class · (1 − imbalance · c / (n_classes − 1))` messages.
    pub imbalance: f64,
}

impl SynthConfig {
    pub fn new(seed: u64, n_per_class: usize, n_classes: usize, mode: SynthMode) -> Self {
        SynthConfig {
            seed,
            n_per_class,
            n_classes,
            mode,
            conflict_fraction: if mode == SynthMode::Conflict { 0.3 } else { 0.0 },
            imbalance: 0.0,
        }
    }

    pub fn class_name(c: usize) -> String {
        format!("class_{c:02}")
    }

    /// Topic whose keywords class `c` normally uses.
    pub fn topic_of(&self, c: usize) -> usize {
        match self.mode {
            SynthMode::MetadataOnly => c / 2,
            SynthMode::Conflict => c,
        }
    }

    /// Meta-data profile of class `c`.
    pub fn profile_of(&self, c: usize) -> usize {
        match self.mode {
            SynthMode::MetadataOnly => c % 2,
            SynthMode::Conflict => c,
        }
    }

    fn n_profiles(&self) -> usize {
        match self.mode {
            SynthMode::MetadataOnly => 2,
            SynthMode::Conflict => self.n_classes,
        }
    }

    pub fn class_size(&self, c: usize) -> usize {
        if self.n_classes < 2 || self.imbalance == 0.0 {
            return self.n_per_class;
        }
        let shrink = self.imbalance * c as f64 / (self.n_classes - 1) as f64;
        ((self.n_per_class as f64 * (1.0 - shrink)).round() as usize).max(1)
    }
}

const FILLER: &[&str] = &[
    "the", "a", "and", "to", "of", "in", "for", "on", "with", "this", "that", "it", "is", "was", "we", "you", "they",
    "our", "your", "please", "note", "today", "again", "about", "from", "just", "really", "very", "some", "more",
    "here", "there", "will", "would", "could", "also", "still", "then", "when", "after",
];

const STEMS: &[&str] = &["ledger", "harvest", "voyage", "canvas", "orbit", "meadow"];

const ORGS: &[&str] = &[
    "northwind",
    "contoso",
    "fabrikam",
    "initech",
    "globex",
    "umbrella",
    "hooli",
    "vandelay",
];

const SENDERS_PER_PROFILE: usize = 6;

pub const SYNTH_EPOCH_DAYS: i64 = 365;

fn keyword(topic: usize, j: usize) -> String {
    format!("{}{topic}", STEMS[j % STEMS.len()])
}

fn sender(profile: usize, k: usize) -> String {
    let org = ORGS[profile % ORGS.len()];
    let generation = profile / ORGS.len();
    if generation == 0 {
        format!("p{profile}u{k}@{org}.example")
    } else {
        format!("p{profile}u{k}@{org}{generation}.example")
    }
}

fn text_for(topic: usize, rng: &mut SeededRng) -> String {
    let n_words = rng.random_range(8..=14);
    let n_keywords = rng.random_range(2..=3);
    let mut words: Vec<String> = (0..n_keywords)
        .map(|_| keyword(topic, rng.random_range(0..STEMS.len())))
        .collect();
    while words.len() < n_words {
        words.push(FILLER.choose(rng).expect("nonempty").to_string());
    }
    words.shuffle(rng);
    let mut text = words.join(" ");
    text.push('.');
    text
}

fn timestamp_for(profile: usize, n_profiles: usize, rng: &mut SeededRng) -> DateTime<Utc> {
    // 2010-01-04 is a Monday
    let base = Utc.with_ymd_and_hms(2010, 1, 4, 0, 0, 0).single().expect("valid date");
    let day = rng.random_range(0..SYNTH_EPOCH_DAYS);
    let window_start_h = (6 + profile * (24 / n_profiles.max(1))) % 24;
    let secs = (window_start_h * 3600) as i64 + rng.random_range(0..3 * 3600);
    base + Duration::days(day) + Duration::seconds(secs)
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n_classes < 2 {
        return Err(Error::Config("synthetic corpus needs at least 2 classes".into()));
    }
    if !(0.0..=1.0).contains(&cfg.conflict_fraction) || !(0.0..1.0).contains(&cfg.imbalance) {
        return Err(Error::Config(format!(
            "conflict_fraction must be in [0,1] and imbalance in [0,1): {cfg:?}"
        )));
    }
    let mut rng = seeded_rng(derive_seed(cfg.seed, "synth"));
    let n_profiles = cfg.n_profiles();
    let mut messages = Vec::new();
    for c in 0..cfg.n_classes {
        let n = cfg.class_size(c);
        let n_conflict = match cfg.mode {
            SynthMode::Conflict => (cfg.conflict_fraction * n as f64).round() as usize,
            SynthMode::MetadataOnly => 0,
        };
        let profile = cfg.profile_of(c);
        for i in 0..n {
            let topic = if i < n_conflict {
                let other = rng.random_range(0..cfg.n_classes - 1);
                cfg.topic_of(if other >= c { other + 1 } else { other })
            } else {
                cfg.topic_of(c)
            };
            let mut m = Message::new(String::new(), text_for(topic, &mut rng), SynthConfig::class_name(c));
            m.sender = Some(sender(profile, rng.random_range(0..SENDERS_PER_PROFILE)));
            m.timestamp = Some(timestamp_for(profile, n_profiles, &mut rng));
            m.enums.insert(
                "channel".into(),
                ["email", "mobile", "web"]
                    .choose(&mut rng)
                    .expect("nonempty")
                    .to_string(),
            );
            m.numerics
                .insert("attachments".into(), f64::from(rng.random_range(0..=3u8)));
            messages.push(m);
        }
    }
    messages.shuffle(&mut rng);
    for (i, m) in messages.iter_mut().enumerate() {
        m.id = format!("syn-{i:06}");
    }
    let provenance = Provenance {
        source: None,
        steps: vec![format!("generate_synthetic({cfg:?})")],
    };
    Ok(Dataset::new(messages, provenance))
}
