//! Partitioning into FlowUnits, per-zone instantiation, constraint-aware
//! placement and channel wiring, for both the layer-aware strategy and the
//! location-unaware baseline.

mod exec;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exec::{
    BoundaryMode, Channel, ExecutionGraph, FlowUnit, InstanceRef, OperatorInstance, QueueBinding, Routing, Strategy,
    UnitInstance,
};

use crate::graph::{GraphError, LogicalGraph, OperatorKind};
use crate::netsim::CostModel;
use crate::topology::{TopologyError, ZoneTopology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("job has no locations")]
    NoLocations,
    #[error("unknown location {0}")]
    UnknownLocation(String),
    #[error("operator {operator} is tagged with layer `{layer}`, which the topology does not define")]
    UnknownLayer { operator: String, layer: String },
    #[error("invalid layer flow: unit u{from} (`{from_layer}`) feeds unit u{to} (`{to_layer}`), which is not closer to the root")]
    InvalidLayerFlow { from: usize, to: usize, from_layer: String, to_layer: String },
    #[error("invalid layer flow: unit u{from} (`{from_layer}`) skips layers to reach u{to} (`{to_layer}`)")]
    LayerSkip { from: usize, to: usize, from_layer: String, to_layer: String },
    #[error("unit u{0} has no zone covering the job locations")]
    EmptyInstantiation(usize),
    #[error("infeasible placement: operator {operator} has no eligible host in zone {zone}")]
    Infeasible { operator: String, zone: String },
    #[error("zone {0} has no hosts")]
    NoHost(String),
    #[error("operator {operator} in zone {zone} has no consumer instance for {consumer} on its path to the root")]
    NoConsumer { operator: String, zone: String, consumer: String },
    #[error("queued boundaries need the flowunits strategy")]
    QueuedBaseline,
    #[error("source {operator} is pinned to {location}, which is not a job location")]
    SourceLocation { operator: String, location: String },
}

/// Workload size and seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub events_per_location: u64,
    pub seed: u64,
}

impl Default for Workload {
    fn default() -> Self {
        Workload { events_per_location: 25_000, seed: 42 }
    }
}

/// Everything needed to plan and run a job.
#[derive(Clone, Debug)]
pub struct JobSpec {
    pub graph: LogicalGraph,
    pub locations: BTreeSet<String>,
    pub strategy: Strategy,
    pub boundary: BoundaryMode,
    pub workload: Workload,
    pub cost: CostModel,
}

impl JobSpec {
    pub fn new<I, S>(graph: LogicalGraph, locations: I, strategy: Strategy) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        JobSpec {
            graph,
            locations: locations.into_iter().map(Into::into).collect(),
            strategy,
            boundary: BoundaryMode::Direct,
            workload: Workload::default(),
            cost: CostModel::default(),
        }
    }

    pub fn with_boundary(mut self, boundary: BoundaryMode) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_workload(mut self, events_per_location: u64, seed: u64) -> Self {
        self.workload = Workload { events_per_location, seed };
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn validate(&self, topology: &ZoneTopology) -> Result<(), PlanError> {
        if self.locations.is_empty() {
            return Err(PlanError::NoLocations);
        }
        let known = topology.locations();
        if let Some(l) = self.locations.iter().find(|l| !known.contains(*l)) {
            return Err(PlanError::UnknownLocation(l.clone()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlanOptions {
    /// Reject cross-unit edges that skip a layer.
    pub adjacent_only: bool,
}

/// Groups operators into maximal same-layer connected components. Unit ids
/// follow the topological order of each unit's first member.
pub fn partition_into_flowunits(graph: &LogicalGraph) -> Vec<FlowUnit> {
    let n = graph.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(u, v) in graph.edges() {
        if graph.operator(u).layer == graph.operator(v).layer {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let order = graph.topological_order().expect("finalized graphs are acyclic");
    let mut unit_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut units: Vec<FlowUnit> = Vec::new();
    for op in order {
        let root = find(&mut parent, op);
        let id = *unit_of_root.entry(root).or_insert_with(|| {
            units.push(FlowUnit { id: units.len(), layer: graph.operator(op).layer.to_string(), members: Vec::new() });
            units.len() - 1
        });
        units[id].members.push(op);
    }
    for u in &mut units {
        u.members.sort_unstable();
    }
    units
}

/// Unit-level DAG.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitGraph {
    pub units: Vec<FlowUnit>,
    pub edges: Vec<(usize, usize)>,
    unit_of: Vec<usize>,
}

impl UnitGraph {
    pub fn unit_of(&self, operator: usize) -> usize {
        self.unit_of[operator]
    }
}

/// Checks that every cross-unit edge moves strictly towards the root.
pub fn validate_unit_graph(
    units: Vec<FlowUnit>,
    graph: &LogicalGraph,
    topology: &ZoneTopology,
    options: PlanOptions,
) -> Result<UnitGraph, PlanError> {
    let mut unit_of = vec![0; graph.len()];
    for u in &units {
        for &m in &u.members {
            unit_of[m] = u.id;
        }
    }
    for op in graph.operators() {
        if topology.layer_depth(op.layer.as_str()).is_none() {
            return Err(PlanError::UnknownLayer { operator: op.label(), layer: op.layer.to_string() });
        }
    }
    let mut edges = BTreeSet::new();
    for &(a, b) in graph.edges() {
        let (ua, ub) = (unit_of[a], unit_of[b]);
        if ua == ub {
            continue;
        }
        let (la, lb) = (&units[ua].layer, &units[ub].layer);
        let da = topology.layer_depth(la).expect("checked above");
        let db = topology.layer_depth(lb).expect("checked above");
        if db >= da {
            return Err(PlanError::InvalidLayerFlow { from: ua, to: ub, from_layer: la.clone(), to_layer: lb.clone() });
        }
        if options.adjacent_only && da - db != 1 {
            return Err(PlanError::LayerSkip { from: ua, to: ub, from_layer: la.clone(), to_layer: lb.clone() });
        }
        edges.insert((ua, ub));
    }
    Ok(UnitGraph { units, edges: edges.into_iter().collect(), unit_of })
}

/// A unit is instantiated in every zone of its layer whose coverage meets the job locations.
pub fn instantiate_units(
    units: &[FlowUnit],
    topology: &ZoneTopology,
    locations: &BTreeSet<String>,
) -> Result<Vec<UnitInstance>, PlanError> {
    let mut out = Vec::new();
    for u in units {
        let before = out.len();
        for z in topology.zones_in_layer(&u.layer) {
            if !topology.coverage(&z.id)?.is_disjoint(locations) {
                out.push(UnitInstance { unit: u.id, zone: z.id.clone() });
            }
        }
        if out.len() == before {
            return Err(PlanError::EmptyInstantiation(u.id));
        }
    }
    Ok(out)
}

/// Per-core instances of the non-source members of one unit instance, in
/// `(host, core)` order. Indices are left at zero; `plan` assigns them.
pub fn place(
    instance: &UnitInstance,
    unit: &FlowUnit,
    topology: &ZoneTopology,
    graph: &LogicalGraph,
) -> Result<Vec<OperatorInstance>, PlanError> {
    if topology.hosts_in(&instance.zone).next().is_none() {
        return Err(PlanError::NoHost(instance.zone.clone()));
    }
    let mut out = Vec::new();
    for &m in &unit.members {
        let op = graph.operator(m);
        if op.kind == OperatorKind::Source {
            continue;
        }
        let before = out.len();
        for h in topology.hosts_in(&instance.zone).filter(|h| h.satisfies(&op.constraint)) {
            out.extend((0..h.cores).map(|core| OperatorInstance {
                operator: m,
                index: 0,
                host: h.id.clone(),
                core,
                zone: instance.zone.clone(),
                location: None,
            }));
        }
        if out.len() == before {
            return Err(PlanError::Infeasible { operator: op.label(), zone: instance.zone.clone() });
        }
    }
    Ok(out)
}

/// Plans `job` on `topology` with default options.
pub fn plan(job: &JobSpec, topology: &ZoneTopology) -> Result<ExecutionGraph, PlanError> {
    plan_with(job, topology, PlanOptions::default())
}

pub fn plan_with(job: &JobSpec, topology: &ZoneTopology, options: PlanOptions) -> Result<ExecutionGraph, PlanError> {
    job.validate(topology)?;
    let graph = &job.graph;
    if job.boundary == BoundaryMode::Queued && job.strategy == Strategy::Baseline {
        return Err(PlanError::QueuedBaseline);
    }
    let mut instances = source_instances(job, topology)?;
    let (units, unit_instances) = match job.strategy {
        Strategy::FlowUnits => {
            let ug = validate_unit_graph(partition_into_flowunits(graph), graph, topology, options)?;
            let uis = instantiate_units(&ug.units, topology, &job.locations)?;
            for ui in &uis {
                instances.extend(place(ui, &ug.units[ui.unit], topology, graph)?);
            }
            (ug.units, uis)
        }
        Strategy::Baseline => {
            for op in graph.operators().iter().filter(|o| o.kind != OperatorKind::Source) {
                let before = instances.len();
                for h in topology.hosts().iter().filter(|h| h.satisfies(&op.constraint)) {
                    instances.extend((0..h.cores).map(|core| OperatorInstance {
                        operator: op.id,
                        index: 0,
                        host: h.id.clone(),
                        core,
                        zone: h.zone.clone(),
                        location: None,
                    }));
                }
                if instances.len() == before {
                    return Err(PlanError::Infeasible { operator: op.label(), zone: "*".into() });
                }
            }
            (partition_into_flowunits(graph), Vec::new())
        }
    };
    let instances = index_instances(instances);
    let channels = wire(graph, topology, &instances, job.strategy)?;
    let plan = ExecutionGraph {
        topology: topology.fingerprint(),
        strategy: job.strategy,
        boundary: BoundaryMode::Direct,
        locations: job.locations.iter().cloned().collect(),
        graph: graph.clone(),
        units,
        unit_instances,
        instances,
        channels,
        queues: Vec::new(),
    };
    Ok(match job.boundary {
        BoundaryMode::Direct => plan,
        BoundaryMode::Queued => crate::dynamic::bind_queues(plan),
    })
}

/// Each source gets one instance per bound location, pinned to core 0 of the
/// lowest-id host in the leaf zone of that location.
fn source_instances(job: &JobSpec, topology: &ZoneTopology) -> Result<Vec<OperatorInstance>, PlanError> {
    let mut out = Vec::new();
    for &s in job.graph.sources() {
        let op = job.graph.operator(s);
        let bound: Vec<String> = match op.source().and_then(|spec| spec.location()) {
            Some(l) if job.locations.contains(l) => vec![l.to_string()],
            Some(l) => return Err(PlanError::SourceLocation { operator: op.label(), location: l.to_string() }),
            None => job.locations.iter().cloned().collect(),
        };
        for loc in bound {
            let leaf = topology.leaf_for_location(&loc).ok_or_else(|| PlanError::UnknownLocation(loc.clone()))?;
            let host = topology.hosts_in(&leaf.id).next().ok_or_else(|| PlanError::NoHost(leaf.id.clone()))?;
            out.push(OperatorInstance {
                operator: s,
                index: 0,
                host: host.id.clone(),
                core: 0,
                zone: leaf.id.clone(),
                location: Some(loc),
            });
        }
    }
    Ok(out)
}

/// Sorts instances canonically and assigns per-operator indices: sources by
/// location, everything else by `(host, core)`.
pub(crate) fn index_instances(mut instances: Vec<OperatorInstance>) -> Vec<OperatorInstance> {
    instances.sort_by(|a, b| {
        (a.operator, &a.location, &a.host, a.core).cmp(&(b.operator, &b.location, &b.host, b.core))
    });
    let mut next = BTreeMap::new();
    for inst in &mut instances {
        let n = next.entry(inst.operator).or_insert(0);
        inst.index = *n;
        *n += 1;
    }
    instances
}

fn wire(
    graph: &LogicalGraph,
    topology: &ZoneTopology,
    instances: &[OperatorInstance],
    strategy: Strategy,
) -> Result<Vec<Channel>, PlanError> {
    let mut by_op: BTreeMap<usize, Vec<&OperatorInstance>> = BTreeMap::new();
    for i in instances {
        by_op.entry(i.operator).or_default().push(i);
    }
    let mut channels = Vec::new();
    for &(u, v) in graph.edges() {
        let routing = if graph.operator(u).kind == OperatorKind::KeyBy { Routing::KeyHash } else { Routing::RoundRobin };
        let consumers = &by_op[&v];
        for p in &by_op[&u] {
            let targets: Vec<&&OperatorInstance> = match strategy {
                Strategy::Baseline => consumers.iter().collect(),
                Strategy::FlowUnits => {
                    let zone = topology
                        .ancestors_inclusive(&p.zone)?
                        .into_iter()
                        .find(|z| consumers.iter().any(|c| c.zone == z.id))
                        .ok_or_else(|| PlanError::NoConsumer {
                            operator: graph.operator(u).label(),
                            zone: p.zone.clone(),
                            consumer: graph.operator(v).label(),
                        })?;
                    consumers.iter().filter(|c| c.zone == zone.id).collect()
                }
            };
            for c in targets {
                channels.push(Channel {
                    from: p.reference(),
                    to: c.reference(),
                    routing,
                    path: topology.tree_path(&p.zone, &c.zone)?,
                    queue: None,
                });
            }
        }
    }
    channels.sort_by_key(|c| (c.from, c.to));
    Ok(channels)
}
