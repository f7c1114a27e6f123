//! Canonical serialization and digest of an environment's database state.
//!
//! The wire form (as served from `GET /state`) is a JSON object mapping table
//! name to an object mapping primary key to a record object:
//!
//! ```json
//! {"listings": {"1": {"name": "...", "price_cents": 120000}}, "users": {...}}
//! ```
//!
//! The canonical text is one line per record, `table<TAB>key<TAB>record`,
//! ordered by table name and then primary key (integer keys numerically and
//! before text keys). Record fields are emitted as compact JSON with keys
//! sorted. The digest is SHA-256 over the UTF-8 text, lowercase hex.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrimaryKey {
    Int(i64),
    Text(String),
}

impl PrimaryKey {
    pub fn parse(raw: &str) -> Self {
        match raw.parse::<i64>() {
            Ok(n) if n.to_string() == raw => PrimaryKey::Int(n),
            _ => PrimaryKey::Text(raw.to_string()),
        }
    }
}

impl std::fmt::Display for PrimaryKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrimaryKey::Int(n) => write!(f, "{n}"),
            PrimaryKey::Text(s) => f.write_str(s),
        }
    }
}

impl Ord for PrimaryKey {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (PrimaryKey::Int(a), PrimaryKey::Int(b)) => a.cmp(b),
            (PrimaryKey::Int(_), PrimaryKey::Text(_)) => Ordering::Less,
            (PrimaryKey::Text(_), PrimaryKey::Int(_)) => Ordering::Greater,
            (PrimaryKey::Text(a), PrimaryKey::Text(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for PrimaryKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub type Record = BTreeMap<String, Value>;

/// Full database state as tables of keyed records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateDump {
    pub tables: BTreeMap<String, BTreeMap<String, Record>>,
}

impl StateDump {
    pub fn insert(&mut self, table: &str, key: impl ToString, record: Record) {
        self.tables
            .entry(table.to_string())
            .or_default()
            .insert(key.to_string(), record);
    }

    /// Canonical newline-separated text.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (table, rows) in &self.tables {
            let mut keyed: Vec<(PrimaryKey, &Record)> = rows
                .iter()
                .map(|(k, r)| (PrimaryKey::parse(k), r))
                .collect();
            keyed.sort_by(|a, b| a.0.cmp(&b.0));
            for (key, record) in keyed {
                out.push_str(table);
                out.push('\t');
                out.push_str(&key.to_string());
                out.push('\t');
                out.push_str(&canonical_json(&Value::Object(
                    record.clone().into_iter().collect(),
                )));
                out.push('\n');
            }
        }
        out
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.canonical_text().as_bytes())
    }
}

/// Compact JSON with object keys sorted at every depth.
pub fn canonical_json(value: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(map) => {
                let ordered: BTreeMap<&String, Value> =
                    map.iter().map(|(k, v)| (k, sorted(v))).collect();
                Value::Object(ordered.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            Value::Array(items) => Value::Array(items.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    sorted(value).to_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
