use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Capacity of an inter-zone link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub enum Bandwidth {
    Unlimited,
    Mbps(f64),
}

impl Bandwidth {
    /// Serialization time of `bytes` in nanoseconds.
    pub fn transmit_ns(self, bytes: u64) -> u64 {
        match self {
            Bandwidth::Unlimited => 0,
            Bandwidth::Mbps(m) => (bytes as f64 * 8_000.0 / m).round() as u64,
        }
    }
}

impl FromStr for Bandwidth {
    type Err = String;

    /// `unlimited`, a number of Mbit/s, or a number with an `mbit`/`gbit` suffix.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "unlimited" | "inf" | "none") {
            return Ok(Bandwidth::Unlimited);
        }
        let (num, scale) = if let Some(n) = t.strip_suffix("gbit") {
            (n, 1000.0)
        } else if let Some(n) = t.strip_suffix("mbit") {
            (n, 1.0)
        } else {
            (t.as_str(), 1.0)
        };
        match num.trim().parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(Bandwidth::Mbps(v * scale)),
            _ => Err(format!("invalid bandwidth `{s}` (expected `unlimited` or a positive Mbit/s value)")),
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Unlimited => f.write_str("unlimited"),
            Bandwidth::Mbps(m) => write!(f, "{m}"),
        }
    }
}

impl TryFrom<serde_json::Value> for Bandwidth {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, Self::Error> {
        match v {
            serde_json::Value::String(s) => s.parse(),
            serde_json::Value::Number(n) => n.to_string().parse(),
            other => Err(format!("invalid bandwidth {other}")),
        }
    }
}

impl From<Bandwidth> for serde_json::Value {
    fn from(b: Bandwidth) -> Self {
        match b {
            Bandwidth::Unlimited => serde_json::Value::from("unlimited"),
            Bandwidth::Mbps(m) => serde_json::Value::from(m),
        }
    }
}

/// Shaping of one tree edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub bandwidth: Bandwidth,
    pub latency_ms: f64,
}

/// Inter-zone network shaping. Every tree edge gets `bandwidth` and
/// `latency_ms` in each direction unless overridden; overrides are keyed by
/// the child zone of the edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCondition {
    pub bandwidth: Bandwidth,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, LinkSpec>,
}

impl Default for NetworkCondition {
    fn default() -> Self {
        NetworkCondition::new(Bandwidth::Unlimited, 0.0)
    }
}

impl NetworkCondition {
    pub fn new(bandwidth: Bandwidth, latency_ms: f64) -> Self {
        NetworkCondition { bandwidth, latency_ms, overrides: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let check = |l: &LinkSpec| {
            if !(l.latency_ms.is_finite() && l.latency_ms >= 0.0) {
                return Err(format!("latency must be a non-negative number of ms, got {}", l.latency_ms));
            }
            match l.bandwidth {
                Bandwidth::Mbps(m) if !(m.is_finite() && m > 0.0) => Err(format!("bandwidth must be positive, got {m}")),
                _ => Ok(()),
            }
        };
        check(&LinkSpec { bandwidth: self.bandwidth, latency_ms: self.latency_ms })?;
        self.overrides.values().try_for_each(check)
    }

    /// Shaping of the edge between `child` and its parent.
    pub fn link(&self, child: &str) -> LinkSpec {
        self.overrides
            .get(child)
            .copied()
            .unwrap_or(LinkSpec { bandwidth: self.bandwidth, latency_ms: self.latency_ms })
    }
}

pub(crate) fn ms_to_ns(ms: f64) -> u64 {
    (ms * 1e6).round() as u64
}
