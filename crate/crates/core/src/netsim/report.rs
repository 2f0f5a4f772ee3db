use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::NetworkCondition;
use crate::planner::{BoundaryMode, Strategy};
use crate::value::DataItem;

/// One item collected by a sink.
#[derive(Clone, Debug, PartialEq)]
pub struct SinkRecord {
    pub sink: usize,
    pub item: DataItem,
}

/// Sink outputs in canonical order: sink id, key, value, origin.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SinkOutput {
    records: Vec<SinkRecord>,
}

impl SinkOutput {
    pub fn new(mut records: Vec<SinkRecord>) -> Self {
        records.sort_by(|a, b| {
            a.sink
                .cmp(&b.sink)
                .then_with(|| a.item.key.cmp(&b.item.key))
                .then_with(|| a.item.value.total_cmp(&b.item.value))
                .then_with(|| a.item.origin.cmp(&b.item.origin))
        });
        SinkOutput { records }
    }

    pub fn records(&self) -> &[SinkRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header `sink,key,value,origin`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sink", "key", "value", "origin"]).expect("in-memory write");
        for r in &self.records {
            w.write_record([r.sink.to_string(), r.item.key.to_string(), r.item.value.to_string(), r.item.origin.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    /// SHA-256 of [`SinkOutput::to_csv`], hex encoded.
    pub fn digest(&self) -> String {
        crate::topology::hex(&Sha256::digest(self.to_csv().as_bytes()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    pub bytes: u64,
    pub messages: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorStats {
    pub id: usize,
    pub label: String,
    pub instances: usize,
    pub items_in: u64,
    pub items_out: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueStats {
    pub id: String,
    pub appended_messages: u64,
    pub appended_items: u64,
    pub committed_items: u64,
    pub residue_items: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub strategy: Strategy,
    pub boundary: BoundaryMode,
    pub locations: Vec<String>,
    pub network: NetworkCondition,
    pub makespan_ns: u64,
    pub makespan_s: f64,
    /// Data events processed; update bookkeeping is not counted.
    pub events: u64,
    /// Per directed tree edge, keyed `from->to`.
    pub links: BTreeMap<String, LinkStats>,
    pub operators: Vec<OperatorStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queues: Vec<QueueStats>,
    pub sink_items: u64,
    pub sink_digest: String,
}

impl SimReport {
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn operator(&self, label: &str) -> Option<&OperatorStats> {
        self.operators.iter().find(|o| o.label == label)
    }
}

/// Processed-item counters at one instant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub at_ns: u64,
    pub tag: String,
    /// Items completed by `at_ns`, per operator label.
    pub operators: BTreeMap<String, u64>,
    /// Items completed per instance, keyed `label@host/core` (`label@location` for sources).
    pub instances: BTreeMap<String, u64>,
}
