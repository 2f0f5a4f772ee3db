//! The execution graph: operator instances pinned to host cores and the
//! channels between them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::LogicalGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Layer-aware: each FlowUnit runs only in the zones of its layer that
    /// cover a job location.
    #[serde(rename = "flowunits")]
    FlowUnits,
    /// Location-unaware: every operator on every core of every host.
    Baseline,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::FlowUnits => "flowunits",
            Strategy::Baseline => "baseline",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flowunits" => Ok(Strategy::FlowUnits),
            "baseline" => Ok(Strategy::Baseline),
            other => Err(format!("unknown strategy `{other}` (expected flowunits or baseline)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// FlowUnits exchange data over direct network channels.
    #[default]
    Direct,
    /// Every cross-unit edge goes through a durable queue in the consumer's zone.
    Queued,
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryMode::Direct => "direct",
            BoundaryMode::Queued => "queued",
        })
    }
}

impl std::str::FromStr for BoundaryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(BoundaryMode::Direct),
            "queued" => Ok(BoundaryMode::Queued),
            other => Err(format!("unknown boundary mode `{other}` (expected direct or queued)")),
        }
    }
}

/// A maximal connected group of same-layer operators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowUnit {
    pub id: usize,
    pub layer: String,
    pub members: Vec<usize>,
}

impl FlowUnit {
    pub fn label(&self) -> String {
        format!("u{}", self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitInstance {
    pub unit: usize,
    pub zone: String,
}

/// `(operator id, instance index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceRef(pub usize, pub usize);

impl InstanceRef {
    pub fn operator(self) -> usize {
        self.0
    }

    pub fn index(self) -> usize {
        self.1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorInstance {
    pub operator: usize,
    pub index: usize,
    pub host: String,
    pub core: u32,
    pub zone: String,
    /// Location a source instance generates data for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl OperatorInstance {
    pub fn reference(&self) -> InstanceRef {
        InstanceRef(self.operator, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Routing {
    /// Spread over the downstream group; each key sticks to the member it was
    /// first sent to, so per-key order survives.
    RoundRobin,
    /// `fnv1a64(key) mod group size`.
    KeyHash,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub from: InstanceRef,
    pub to: InstanceRef,
    pub routing: Routing,
    /// Zone hops from the producer's zone to the consumer's zone.
    pub path: Vec<String>,
    /// Queue this channel appends to (queued boundaries only); the consumer
    /// end is the queue partition read by `to`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue: Option<String>,
}

/// A durable queue on one cross-unit edge, located in the consumer's zone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueBinding {
    pub id: String,
    pub producer_unit: usize,
    pub consumer_unit: usize,
    pub from_operator: usize,
    pub to_operator: usize,
    pub zone: String,
    /// Producer instances appending to the queue.
    pub appenders: Vec<InstanceRef>,
    /// One partition per consumer instance, in instance order.
    pub partitions: Vec<InstanceRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionGraph {
    /// Fingerprint of the topology the plan was made for.
    pub topology: String,
    pub strategy: Strategy,
    pub boundary: BoundaryMode,
    pub locations: Vec<String>,
    pub graph: LogicalGraph,
    pub units: Vec<FlowUnit>,
    pub unit_instances: Vec<UnitInstance>,
    /// Sorted by operator id, then instance index.
    pub instances: Vec<OperatorInstance>,
    /// Sorted by `(from, to)`.
    pub channels: Vec<Channel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queues: Vec<QueueBinding>,
}

impl ExecutionGraph {
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialization cannot fail")
    }

    pub fn from_json(doc: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(doc)
    }

    pub fn instance(&self, r: InstanceRef) -> Option<&OperatorInstance> {
        self.instances
            .binary_search_by(|i| (i.operator, i.index).cmp(&(r.0, r.1)))
            .ok()
            .map(|pos| &self.instances[pos])
    }

    pub fn instances_of(&self, operator: usize) -> impl Iterator<Item = &OperatorInstance> + '_ {
        self.instances.iter().filter(move |i| i.operator == operator)
    }

    pub fn instance_count(&self, operator: usize) -> usize {
        self.instances_of(operator).count()
    }

    pub fn unit_of(&self, operator: usize) -> Option<&FlowUnit> {
        self.units.iter().find(|u| u.members.contains(&operator))
    }

    /// Resolves a unit reference: `u<id>`, a bare id, or the name of any member operator.
    pub fn find_unit(&self, reference: &str) -> Option<&FlowUnit> {
        let by_id = reference.strip_prefix('u').unwrap_or(reference).parse::<usize>().ok();
        if let Some(id) = by_id {
            if let Some(u) = self.units.iter().find(|u| u.id == id) {
                return Some(u);
            }
        }
        let op = self.graph.find(reference)?;
        self.unit_of(op.id)
    }
}
