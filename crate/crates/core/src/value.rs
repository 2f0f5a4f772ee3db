//! Stream items, capability values and the fixed routing hash.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// FNV-1a, 64 bit. Used for key-hash routing and for deriving location codes,
/// so plans and reports are reproducible across implementations.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}

/// Partitioning key of a stream item.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Key {
    Int(u64),
    Text(String),
}

impl Key {
    /// Routing hash: FNV-1a over the little-endian bytes of an integer key or
    /// the UTF-8 bytes of a text key.
    pub fn route_hash(&self) -> u64 {
        match self {
            Key::Int(v) => fnv1a64(&v.to_le_bytes()),
            Key::Text(s) => fnv1a64(s.as_bytes()),
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Int(v) => write!(f, "{v}"),
            Key::Text(s) => f.write_str(s),
        }
    }
}

/// Payload of a stream item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Datum {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Datum {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Datum::Int(v) => Some(*v as f64),
            Datum::Float(v) => Some(*v),
            Datum::Text(_) => None,
        }
    }

    /// Total order used when sorting sink outputs. Floats compare by
    /// `total_cmp`; variants order Int < Float < Text.
    pub fn total_cmp(&self, other: &Datum) -> Ordering {
        use Datum::*;
        match (self, other) {
            (Int(a), Int(b)) => a.cmp(b),
            (Float(a), Float(b)) => a.total_cmp(b),
            (Text(a), Text(b)) => a.cmp(b),
            (Int(_), _) => Ordering::Less,
            (_, Int(_)) => Ordering::Greater,
            (Float(_), _) => Ordering::Less,
            (_, Float(_)) => Ordering::Greater,
        }
    }
}

impl From<i64> for Datum {
    fn from(v: i64) -> Self {
        Datum::Int(v)
    }
}

impl From<&str> for Datum {
    fn from(v: &str) -> Self {
        Datum::Text(v.to_string())
    }
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datum::Int(v) => write!(f, "{v}"),
            // `{:?}` keeps a trailing `.0`, so integers and floats stay distinguishable
            Datum::Float(v) => write!(f, "{v:?}"),
            Datum::Text(s) => f.write_str(s),
        }
    }
}

/// One element flowing through the dataflow.
#[derive(Clone, Debug, PartialEq)]
pub struct DataItem {
    pub key: Key,
    pub value: Datum,
    /// Location code of the source that produced the item (see [`location_code`]).
    pub origin: u32,
}

/// Stable 32-bit code for a location name.
pub fn location_code(location: &str) -> u32 {
    let h = fnv1a64(location.as_bytes());
    (h ^ (h >> 32)) as u32
}

/// Value of a host capability or the right-hand side of a predicate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged, try_from = "serde_json::Value")]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl Value {
    /// Interprets a bare literal: `yes`/`true` and `no`/`false` are booleans,
    /// decimal integers are integers, anything else is a string.
    pub fn from_literal(text: &str) -> Value {
        match text {
            "yes" | "true" => Value::Bool(true),
            "no" | "false" => Value::Bool(false),
            _ => text.parse::<i64>().map(Value::Int).unwrap_or_else(|_| Value::Str(text.to_string())),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }
}

impl TryFrom<serde_json::Value> for Value {
    type Error = String;

    fn try_from(raw: serde_json::Value) -> Result<Self, Self::Error> {
        match raw {
            serde_json::Value::Bool(b) => Ok(Value::Bool(b)),
            serde_json::Value::Number(n) => {
                n.as_i64().map(Value::Int).ok_or_else(|| format!("capability value {n} is not an integer"))
            }
            serde_json::Value::String(s) => Ok(Value::from_literal(&s)),
            other => Err(format!("unsupported capability value {other}")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(true) => f.write_str("yes"),
            Value::Bool(false) => f.write_str("no"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}
