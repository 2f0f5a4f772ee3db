//! Queue-decoupled FlowUnit boundaries and live updates: adding or removing a
//! location and replacing a unit's operator chain.

mod queue;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use queue::{DurableQueue, QueueRecord};

use crate::graph::{GraphError, LogicalGraph, LogicalOperator, OperatorKind, Params};
use crate::planner::{
    index_instances, BoundaryMode, Channel, ExecutionGraph, FlowUnit, InstanceRef, OperatorInstance, PlanError,
    QueueBinding, Routing, Strategy, UnitInstance,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpdateError {
    #[error("updates need queued boundaries")]
    NotQueued,
    #[error("update at {at_ns} ns is before the current time {now_ns} ns")]
    InThePast { at_ns: u64, now_ns: u64 },
    #[error("update time must be a finite, non-negative number of ms")]
    BadTime,
    #[error("no unit `{0}` in the plan")]
    UnknownUnit(String),
    #[error("unit u{0} has no input queue")]
    NoInputQueue(usize),
    #[error("replacement chain for u{unit} has {got} operators, expected {expected}")]
    ChainLength { unit: usize, expected: usize, got: usize },
    #[error("replacement for {operator} changes its kind to {kind}")]
    ChainKind { operator: String, kind: OperatorKind },
    #[error("replacement for {operator} is invalid: {reason}")]
    ChainParams { operator: String, reason: String },
    #[error("location {0} is already part of the job")]
    AlreadyActive(String),
    #[error("location {0} is not part of the job")]
    NotActive(String),
    #[error("location {0} was removed earlier and cannot be re-added")]
    Readded(String),
    #[error("instance {0} already finished and cannot take new inputs")]
    ConsumerFinished(String),
    #[error("plans differ in {0}")]
    Incompatible(&'static str),
    #[error("delta does not apply: {0}")]
    DeltaMismatch(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Parameter overrides for one operator of a replacement chain. Absent
/// fields keep the current value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplacementOp {
    /// If given, must equal the current kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<OperatorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateKind {
    AddLocation {
        location: String,
    },
    RemoveLocation {
        location: String,
    },
    ReplaceUnit {
        /// `u<id>`, a unit id, or the name of a member operator.
        unit: String,
        #[serde(default)]
        downtime_ms: f64,
        /// One entry per member operator in id order; absent means the same chain.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chain: Option<Vec<ReplacementOp>>,
    },
}

/// An update applied at virtual time `at_ms`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateCommand {
    pub at_ms: f64,
    #[serde(flatten)]
    pub kind: UpdateKind,
}

impl UpdateCommand {
    pub fn add_location(at_ms: f64, location: &str) -> Self {
        UpdateCommand { at_ms, kind: UpdateKind::AddLocation { location: location.to_string() } }
    }

    pub fn remove_location(at_ms: f64, location: &str) -> Self {
        UpdateCommand { at_ms, kind: UpdateKind::RemoveLocation { location: location.to_string() } }
    }

    pub fn replace_unit(at_ms: f64, unit: &str, downtime_ms: f64) -> Self {
        UpdateCommand { at_ms, kind: UpdateKind::ReplaceUnit { unit: unit.to_string(), downtime_ms, chain: None } }
    }

    pub fn with_chain(mut self, chain: Vec<ReplacementOp>) -> Self {
        if let UpdateKind::ReplaceUnit { chain: c, .. } = &mut self.kind {
            *c = Some(chain);
        }
        self
    }

    pub fn at_ns(&self) -> Result<u64, UpdateError> {
        if self.at_ms.is_finite() && self.at_ms >= 0.0 {
            Ok(crate::netsim::ms_to_ns(self.at_ms))
        } else {
            Err(UpdateError::BadTime)
        }
    }

    /// Parses a scenario file: a JSON array of commands.
    pub fn parse_scenario(doc: &str) -> Result<Vec<UpdateCommand>, serde_json::Error> {
        serde_json::from_str(doc)
    }
}

/// Builds the graph that results from replacing `unit`'s operators with
/// `chain`. The unit keeps its members, kinds and layer.
pub fn replace_chain(graph: &LogicalGraph, unit: &FlowUnit, chain: &[ReplacementOp]) -> Result<LogicalGraph, UpdateError> {
    if chain.len() != unit.members.len() {
        return Err(UpdateError::ChainLength { unit: unit.id, expected: unit.members.len(), got: chain.len() });
    }
    let mut ops: Vec<LogicalOperator> = graph.operators().to_vec();
    for (&m, r) in unit.members.iter().zip(chain) {
        let op = &mut ops[m];
        let bad = |reason: &str| UpdateError::ChainParams { operator: op.label(), reason: reason.to_string() };
        if let Some(kind) = r.kind {
            if kind != op.kind {
                return Err(UpdateError::ChainKind { operator: op.label(), kind });
            }
        }
        let params = match (&op.params, r) {
            (p, ReplacementOp { function: None, window: None, aggregate: None, .. }) => p.clone(),
            (Params::Function(_), ReplacementOp { function: Some(f), window: None, aggregate: None, .. }) => {
                Params::Function(f.clone())
            }
            (Params::Window { size, aggregate }, ReplacementOp { function: None, window, aggregate: a, .. }) => {
                Params::Window { size: window.or(*size), aggregate: a.clone().unwrap_or_else(|| aggregate.clone()) }
            }
            _ => return Err(bad("parameters do not fit the operator kind")),
        };
        op.params = params;
        op.check_params().map_err(|e| UpdateError::ChainParams { operator: op.label(), reason: e.to_string() })?;
    }
    Ok(LogicalGraph::from_parts(ops, graph.edges().to_vec())?)
}

/// Placement identity of an operator instance; instance indices are not part
/// of it because they shift when instances are added elsewhere.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceShape {
    pub operator: usize,
    pub host: String,
    pub core: u32,
    pub zone: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl InstanceShape {
    pub fn of(i: &OperatorInstance) -> Self {
        InstanceShape {
            operator: i.operator,
            host: i.host.clone(),
            core: i.core,
            zone: i.zone.clone(),
            location: i.location.clone(),
        }
    }

    fn instance(&self) -> OperatorInstance {
        OperatorInstance {
            operator: self.operator,
            index: 0,
            host: self.host.clone(),
            core: self.core,
            zone: self.zone.clone(),
            location: self.location.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelShape {
    pub from: InstanceShape,
    pub to: InstanceShape,
    pub routing: Routing,
    pub path: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueueShape {
    pub id: String,
    pub producer_unit: usize,
    pub consumer_unit: usize,
    pub from_operator: usize,
    pub to_operator: usize,
    pub zone: String,
}

/// Structural difference between two plans of the same job on the same topology.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanDelta {
    pub locations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<LogicalGraph>,
    pub add_unit_instances: Vec<UnitInstance>,
    pub remove_unit_instances: Vec<UnitInstance>,
    pub add_instances: Vec<InstanceShape>,
    pub remove_instances: Vec<InstanceShape>,
    pub add_channels: Vec<ChannelShape>,
    pub remove_channels: Vec<ChannelShape>,
    pub create_queues: Vec<QueueShape>,
    pub drop_queues: Vec<QueueShape>,
    /// `(queue id, producer)` pairs: producers that start or stop appending.
    pub add_bindings: Vec<(String, InstanceShape)>,
    pub remove_bindings: Vec<(String, InstanceShape)>,
}

impl PlanDelta {
    /// True when the delta changes nothing but possibly the location list.
    pub fn is_empty(&self) -> bool {
        self.graph.is_none()
            && self.add_unit_instances.is_empty()
            && self.remove_unit_instances.is_empty()
            && self.add_instances.is_empty()
            && self.remove_instances.is_empty()
            && self.add_channels.is_empty()
            && self.remove_channels.is_empty()
            && self.create_queues.is_empty()
            && self.drop_queues.is_empty()
            && self.add_bindings.is_empty()
            && self.remove_bindings.is_empty()
    }

    /// One-line summary for audit logs.
    pub fn summary(&self) -> String {
        format!(
            "+{} -{} instances, +{} -{} channels, +{} -{} queues, +{} -{} bindings",
            self.add_instances.len(),
            self.remove_instances.len(),
            self.add_channels.len(),
            self.remove_channels.len(),
            self.create_queues.len(),
            self.drop_queues.len(),
            self.add_bindings.len(),
            self.remove_bindings.len()
        )
    }

    /// Rebuilds the updated plan from `old`.
    pub fn apply(&self, old: &ExecutionGraph) -> Result<ExecutionGraph, UpdateError> {
        let mut shapes: BTreeSet<InstanceShape> = old.instances.iter().map(InstanceShape::of).collect();
        edit(&mut shapes, &self.remove_instances, &self.add_instances, "instance")?;
        let instances = index_instances(shapes.iter().map(InstanceShape::instance).collect());
        let refs: BTreeMap<InstanceShape, InstanceRef> =
            instances.iter().map(|i| (InstanceShape::of(i), i.reference())).collect();

        let mut channel_shapes: BTreeSet<ChannelShape> = channel_shapes(old).into_iter().collect();
        edit(&mut channel_shapes, &self.remove_channels, &self.add_channels, "channel")?;
        let lookup = |s: &InstanceShape| {
            refs.get(s).copied().ok_or_else(|| UpdateError::DeltaMismatch(format!("channel endpoint {s:?} has no instance")))
        };
        let mut channels = Vec::with_capacity(channel_shapes.len());
        for c in channel_shapes {
            channels.push(Channel {
                from: lookup(&c.from)?,
                to: lookup(&c.to)?,
                routing: c.routing,
                path: c.path,
                queue: c.queue,
            });
        }
        channels.sort_by_key(|c| (c.from, c.to));

        let mut unit_instances: BTreeSet<UnitInstance> = old.unit_instances.iter().cloned().collect();
        edit(&mut unit_instances, &self.remove_unit_instances, &self.add_unit_instances, "unit instance")?;

        let mut queues: BTreeSet<QueueShape> = old.queues.iter().map(queue_shape).collect();
        edit(&mut queues, &self.drop_queues, &self.create_queues, "queue")?;

        let mut plan = ExecutionGraph {
            topology: old.topology.clone(),
            strategy: old.strategy,
            boundary: old.boundary,
            locations: self.locations.clone(),
            graph: self.graph.clone().unwrap_or_else(|| old.graph.clone()),
            units: old.units.clone(),
            unit_instances: unit_instances.into_iter().collect(),
            instances,
            channels,
            queues: Vec::new(),
        };
        plan.queues = queues.into_iter().map(|q| binding_from_channels(&plan, q)).collect();
        Ok(plan)
    }
}

fn edit<T: Ord + Clone + std::fmt::Debug>(
    set: &mut BTreeSet<T>,
    remove: &[T],
    add: &[T],
    what: &str,
) -> Result<(), UpdateError> {
    for r in remove {
        if !set.remove(r) {
            return Err(UpdateError::DeltaMismatch(format!("{what} to remove is absent: {r:?}")));
        }
    }
    for a in add {
        if !set.insert(a.clone()) {
            return Err(UpdateError::DeltaMismatch(format!("{what} to add already exists: {a:?}")));
        }
    }
    Ok(())
}

fn channel_shapes(plan: &ExecutionGraph) -> Vec<ChannelShape> {
    let shape = |r: InstanceRef| InstanceShape::of(plan.instance(r).expect("channel endpoints exist"));
    plan.channels
        .iter()
        .map(|c| ChannelShape {
            from: shape(c.from),
            to: shape(c.to),
            routing: c.routing,
            path: c.path.clone(),
            queue: c.queue.clone(),
        })
        .collect()
}

fn queue_shape(q: &QueueBinding) -> QueueShape {
    QueueShape {
        id: q.id.clone(),
        producer_unit: q.producer_unit,
        consumer_unit: q.consumer_unit,
        from_operator: q.from_operator,
        to_operator: q.to_operator,
        zone: q.zone.clone(),
    }
}

fn bindings(plan: &ExecutionGraph) -> BTreeSet<(String, InstanceShape)> {
    plan.queues
        .iter()
        .flat_map(|q| {
            q.appenders.iter().map(|&a| (q.id.clone(), InstanceShape::of(plan.instance(a).expect("appender exists"))))
        })
        .collect()
}

/// Appenders and partitions of a queue are the endpoints of the channels bound to it.
fn binding_from_channels(plan: &ExecutionGraph, q: QueueShape) -> QueueBinding {
    let bound = plan.channels.iter().filter(|c| c.queue.as_deref() == Some(q.id.as_str()));
    let (mut appenders, mut partitions): (Vec<_>, Vec<_>) = bound.map(|c| (c.from, c.to)).unzip();
    appenders.sort_unstable();
    appenders.dedup();
    partitions.sort_unstable();
    partitions.dedup();
    QueueBinding {
        id: q.id,
        producer_unit: q.producer_unit,
        consumer_unit: q.consumer_unit,
        from_operator: q.from_operator,
        to_operator: q.to_operator,
        zone: q.zone,
        appenders,
        partitions,
    }
}

fn to_set<T: Ord + Clone>(v: &[T]) -> BTreeSet<T> {
    v.iter().cloned().collect()
}

fn set_diff<T: Ord + Clone>(old: &BTreeSet<T>, new: &BTreeSet<T>) -> (Vec<T>, Vec<T>) {
    (new.difference(old).cloned().collect(), old.difference(new).cloned().collect())
}

/// Minimal structural diff from `old` to `new`.
pub fn diff_plans(old: &ExecutionGraph, new: &ExecutionGraph) -> Result<PlanDelta, UpdateError> {
    if old.topology != new.topology {
        return Err(UpdateError::Incompatible("topology"));
    }
    if old.strategy != new.strategy || old.boundary != new.boundary {
        return Err(UpdateError::Incompatible("strategy or boundary mode"));
    }
    if old.units != new.units {
        return Err(UpdateError::Incompatible("unit structure"));
    }
    let (add_unit_instances, remove_unit_instances) = set_diff(&to_set(&old.unit_instances), &to_set(&new.unit_instances));
    let shapes = |p: &ExecutionGraph| p.instances.iter().map(InstanceShape::of).collect::<BTreeSet<_>>();
    let (add_instances, remove_instances) = set_diff(&shapes(old), &shapes(new));
    let (add_channels, remove_channels) = set_diff(&to_set(&channel_shapes(old)), &to_set(&channel_shapes(new)));
    let queues = |p: &ExecutionGraph| p.queues.iter().map(queue_shape).collect::<BTreeSet<_>>();
    let (create_queues, drop_queues) = set_diff(&queues(old), &queues(new));
    let (add_bindings, remove_bindings) = set_diff(&bindings(old), &bindings(new));
    Ok(PlanDelta {
        locations: new.locations.clone(),
        graph: (old.graph != new.graph).then(|| new.graph.clone()),
        add_unit_instances,
        remove_unit_instances,
        add_instances,
        remove_instances,
        add_channels,
        remove_channels,
        create_queues,
        drop_queues,
        add_bindings,
        remove_bindings,
    })
}

/// Puts a durable queue on every cross-unit edge, one per consumer zone. The
/// queue lives in the consumer's zone and has a partition per consumer
/// instance; producers keep their network channels and routing, which now
/// end at the queue partition of the consumer they target.
pub fn bind_queues(mut plan: ExecutionGraph) -> ExecutionGraph {
    let mut unit_of = vec![0; plan.graph.len()];
    for u in &plan.units {
        for &m in &u.members {
            unit_of[m] = u.id;
        }
    }
    let mut edges_between: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(a, b) in plan.graph.edges() {
        if unit_of[a] != unit_of[b] {
            *edges_between.entry((unit_of[a], unit_of[b])).or_default() += 1;
        }
    }
    let mut shapes = BTreeSet::new();
    for i in 0..plan.channels.len() {
        let (from, to) = (plan.channels[i].from, plan.channels[i].to);
        let (pu, cu) = (unit_of[from.0], unit_of[to.0]);
        if pu == cu {
            continue;
        }
        let zone = plan.instance(to).expect("channel endpoints exist").zone.clone();
        let mut id = format!("u{pu}-u{cu}@{zone}");
        if edges_between[&(pu, cu)] > 1 {
            id.push_str(&format!("#{}-{}", from.0, to.0));
        }
        shapes.insert(QueueShape {
            id: id.clone(),
            producer_unit: pu,
            consumer_unit: cu,
            from_operator: from.0,
            to_operator: to.0,
            zone,
        });
        plan.channels[i].queue = Some(id);
    }
    plan.boundary = BoundaryMode::Queued;
    plan.queues = shapes.into_iter().map(|q| binding_from_channels(&plan, q)).collect();
    plan.queues.sort_by(|a, b| a.id.cmp(&b.id));
    debug_assert!(plan.strategy == Strategy::FlowUnits);
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::planner::{plan, JobSpec};
    use crate::topology::ZoneTopology;

    fn acme_plan(t: &ZoneTopology, locs: &[&str]) -> ExecutionGraph {
        let job = JobSpec::new(bundled::acme_v1(10).unwrap(), locs.iter().copied(), Strategy::FlowUnits)
            .with_boundary(BoundaryMode::Queued);
        plan(&job, t).unwrap()
    }

    #[test]
    fn queues_per_consumer_zone() {
        let t = bundled::topology("acme").unwrap();
        let p = acme_plan(&t, &["L1", "L2", "L4"]);
        let ids: Vec<_> = p.queues.iter().map(|q| q.id.as_str()).collect();
        assert_eq!(ids, ["u0-u1@S1", "u0-u1@S2", "u1-u2@C1"]);
        let s1 = &p.queues[0];
        // key_by instances on E1 and E2 append to the S1 queue
        let zones: BTreeSet<_> = s1.appenders.iter().map(|&a| p.instance(a).unwrap().zone.as_str()).collect();
        assert_eq!(zones, ["E1", "E2"].into());
        assert_eq!(s1.partitions.len(), 8);
        assert!(p.channels.iter().all(|c| c.queue.is_some() == (p.unit_of(c.from.0) != p.unit_of(c.to.0))));
    }

    #[test]
    fn direct_mode_has_no_queues() {
        let t = bundled::topology("acme").unwrap();
        let job = JobSpec::new(bundled::acme_v1(10).unwrap(), ["L1"], Strategy::FlowUnits);
        assert!(plan(&job, &t).unwrap().queues.is_empty());
    }

    #[test]
    fn add_l5_only_touches_the_edge() {
        let t = bundled::topology("acme").unwrap();
        let old = acme_plan(&t, &["L1", "L2", "L4"]);
        let new = acme_plan(&t, &["L1", "L2", "L4", "L5"]);
        let d = diff_plans(&old, &new).unwrap();
        assert_eq!(d.add_unit_instances, [UnitInstance { unit: 0, zone: "E5".into() }]);
        assert!(d.remove_unit_instances.is_empty() && d.remove_instances.is_empty());
        assert!(d.add_instances.iter().all(|i| i.zone == "E5"));
        let ops: BTreeSet<_> = d.add_instances.iter().map(|i| i.operator).collect();
        assert_eq!(ops, [0, 1, 2].into());
        assert!(d.create_queues.is_empty());
        assert_eq!(d.add_bindings.len(), 1);
        assert_eq!(d.add_bindings[0].0, "u0-u1@S2");
        assert_eq!(d.apply(&old).unwrap(), new);
    }

    #[test]
    fn remove_l4_drops_the_site() {
        let t = bundled::topology("acme").unwrap();
        let old = acme_plan(&t, &["L1", "L2", "L4"]);
        let new = acme_plan(&t, &["L1", "L2"]);
        let d = diff_plans(&old, &new).unwrap();
        let zones: BTreeSet<_> = d.remove_unit_instances.iter().map(|u| u.zone.as_str()).collect();
        assert_eq!(zones, ["E4", "S2"].into());
        assert_eq!(d.drop_queues.iter().map(|q| q.id.as_str()).collect::<Vec<_>>(), ["u0-u1@S2"]);
        assert_eq!(d.apply(&old).unwrap(), new);

        // L3 shares S1 with L1 and L2, so S1 stays
        let d = diff_plans(&acme_plan(&t, &["L1", "L3"]), &acme_plan(&t, &["L1"])).unwrap();
        assert!(d.remove_unit_instances.iter().all(|u| u.zone == "E3"));
    }

    #[test]
    fn identical_plans_empty_delta() {
        let t = bundled::topology("acme").unwrap();
        let p = acme_plan(&t, &["L1"]);
        let d = diff_plans(&p, &p).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.apply(&p).unwrap(), p);
    }

    #[test]
    fn different_topologies_rejected() {
        let acme = bundled::topology("acme").unwrap();
        let cont = bundled::topology("continuum").unwrap();
        let job = JobSpec::new(bundled::continuum_v1(10).unwrap(), ["L1"], Strategy::FlowUnits);
        let a = plan(&job, &acme).unwrap();
        let b = plan(&job, &cont).unwrap();
        assert_eq!(diff_plans(&a, &b), Err(UpdateError::Incompatible("topology")));
    }

    #[test]
    fn scenario_json() {
        let doc = r#"[
            {"at_ms": 0, "kind": "add_location", "location": "L5"},
            {"at_ms": 100, "kind": "replace_unit", "unit": "O3", "downtime_ms": 500,
             "chain": [{"function": "collatz"}, {}]}
        ]"#;
        let cmds = UpdateCommand::parse_scenario(doc).unwrap();
        assert_eq!(cmds[0], UpdateCommand::add_location(0.0, "L5"));
        let UpdateKind::ReplaceUnit { chain, downtime_ms, .. } = &cmds[1].kind else { panic!() };
        assert_eq!(*downtime_ms, 500.0);
        assert_eq!(chain.as_ref().unwrap().len(), 2);
        assert!(UpdateCommand::add_location(-1.0, "L1").at_ns().is_err());
    }

    #[test]
    fn replacement_chains() {
        let g = bundled::continuum_v1(10).unwrap();
        let units = crate::planner::partition_into_flowunits(&g);
        let cloud = &units[2];
        let same = replace_chain(&g, cloud, &[ReplacementOp::default(), ReplacementOp::default()]).unwrap();
        assert_eq!(same, g);
        let doubled = replace_chain(
            &g,
            cloud,
            &[ReplacementOp { function: Some("double".into()), ..Default::default() }, ReplacementOp::default()],
        )
        .unwrap();
        assert_eq!(doubled.operator(4).function(), Some("double"));
        assert!(matches!(
            replace_chain(&g, cloud, &[ReplacementOp::default()]),
            Err(UpdateError::ChainLength { .. })
        ));
        let wrong_kind = ReplacementOp { kind: Some(OperatorKind::Filter), ..Default::default() };
        assert!(matches!(
            replace_chain(&g, cloud, &[wrong_kind, ReplacementOp::default()]),
            Err(UpdateError::ChainKind { .. })
        ));
        let unknown = ReplacementOp { function: Some("nope".into()), ..Default::default() };
        assert!(matches!(
            replace_chain(&g, cloud, &[unknown, ReplacementOp::default()]),
            Err(UpdateError::ChainParams { .. })
        ));
        let site = &units[1];
        let wider = ReplacementOp { window: Some(20), ..Default::default() };
        assert_eq!(replace_chain(&g, site, &[wider]).unwrap().operator(3).window(), Some((Some(20), "mean")));
    }
}
