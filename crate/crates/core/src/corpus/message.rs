use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One corpus record. Optional meta-data fields are `None` when absent,
/// never empty strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affiliation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub enums: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub numerics: BTreeMap<String, f64>,
    pub label: String,
}

impl Message {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: impl Into<String>) -> Self {
        Message {
            id: id.into(),
            text: text.into(),
            sender: None,
            affiliation: None,
            timestamp: None,
            enums: BTreeMap::new(),
            numerics: BTreeMap::new(),
            label: label.into(),
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMessage {
    pub message: Message,
    /// Recoverable problems, e.g. an unparseable timestamp that was dropped.
    pub warnings: Vec<String>,
}

/// Parses one JSONL record. `line` is 1-based and used for diagnostics and
/// as the fallback id.
pub fn parse_message(record: &str, line: usize) -> Result<ParsedMessage> {
    let reject = |reason: String| Error::Record { line, reason };
    let value: Value = serde_json::from_str(record).map_err(|e| reject(format!("malformed JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(reject("record is not a JSON object".into()));
    };

    let label = match obj.get("label") {
        Some(v) => scalar_string(v).ok_or_else(|| reject("`label` must be a string".into()))?,
        None => return Err(reject("missing `label`".into())),
    };
    if label.is_empty() {
        return Err(reject("empty `label`".into()));
    }
    let text = match obj.get("text") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => return Err(reject("missing `text`".into())),
        Some(_) => return Err(reject("`text` must be a string".into())),
    };

    let mut warnings = Vec::new();
    let id = obj
        .get("id")
        .and_then(scalar_string)
        .unwrap_or_else(|| format!("line-{line}"));
    let sender = optional_string(obj.get("sender"));
    let affiliation = optional_string(obj.get("affiliation"));
    let timestamp = match optional_string(obj.get("timestamp")) {
        None => None,
        Some(raw) => match parse_timestamp(&raw) {
            Some(ts) => Some(ts),
            None => {
                warnings.push(format!("line {line}: unparseable timestamp `{raw}` ignored"));
                None
            }
        },
    };

    let mut enums = BTreeMap::new();
    if let Some(v) = obj.get("enums") {
        let Value::Object(map) = v else {
            return Err(reject("`enums` must be an object".into()));
        };
        for (k, v) in map {
            match scalar_string(v) {
                Some(s) => {
                    enums.insert(k.clone(), s);
                }
                None if v.is_null() => {}
                None => warnings.push(format!("line {line}: enum `{k}` is not a scalar; ignored")),
            }
        }
    }

    let mut numerics = BTreeMap::new();
    if let Some(v) = obj.get("numerics") {
        let Value::Object(map) = v else {
            return Err(reject("`numerics` must be an object".into()));
        };
        for (k, v) in map {
            let parsed = match v {
                Value::Number(n) => n.as_f64(),
                Value::String(s) => s.trim().parse::<f64>().ok(),
                Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
                _ => None,
            };
            match parsed {
                Some(x) if x.is_finite() => {
                    numerics.insert(k.clone(), x);
                }
                _ if v.is_null() => {}
                _ => warnings.push(format!("line {line}: numeric `{k}` is not a finite number; ignored")),
            }
        }
    }

    Ok(ParsedMessage {
        message: Message {
            id,
            text,
            sender,
            affiliation,
            timestamp,
            enums,
            numerics,
            label,
        },
        warnings,
    })
}

/// ISO-8601 date-time. Offsets are normalized to UTC; a missing offset is
/// read as UTC.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Some(ts.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn optional_string(v: Option<&Value>) -> Option<String> {
    v.and_then(scalar_string).filter(|s| !s.is_empty())
}
