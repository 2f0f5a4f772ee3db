//! Logical dataflow graphs annotated with layers and capability constraints.

mod builder;
mod constraint;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builder::{GraphBuilder, Stream};
pub use constraint::{ConstraintExpr, Predicate, Relation};

use crate::functions::{AggregateFn, FilterFn, FlatMapFn, KeyFn, MapFn};
use crate::value::Datum;

/// Generators a source may reference.
pub const GENERATORS: &[&str] = &["continuum_gen"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("unknown {kind} function `{id}`")]
    UnknownFunction { kind: OperatorKind, id: String },
    #[error("layer name must not be empty")]
    EmptyLayer,
    #[error("malformed predicate: {0}")]
    MalformedPredicate(String),
    #[error("operator {0} is a source; sources are pinned by location and take no constraint")]
    ConstraintOnSource(usize),
    #[error("window aggregate {0} has no upstream key_by")]
    WindowWithoutKeyBy(usize),
    #[error("window size must be at least 1 (operator {0})")]
    ZeroWindow(usize),
    #[error("cycle detected through operator {0}")]
    Cycle(usize),
    #[error("operator {0} ({1}) is dangling")]
    Dangling(usize, &'static str),
    #[error("graph has no source")]
    NoSource,
    #[error("graph has no sink")]
    NoSink,
    #[error("invalid edge {0} -> {1}")]
    InvalidEdge(usize, usize),
    #[error("operator ids must be dense; position {0} holds id {1}")]
    SparseIds(usize, usize),
    #[error("parameters of operator {0} do not match kind {1}")]
    BadParams(usize, OperatorKind),
    #[error("operator {0} cannot have a downstream operator")]
    NoDownstreamSlot(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Source,
    Map,
    Filter,
    FlatMap,
    KeyBy,
    WindowAggregate,
    Sink,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Source => "source",
            OperatorKind::Map => "map",
            OperatorKind::Filter => "filter",
            OperatorKind::FlatMap => "flat_map",
            OperatorKind::KeyBy => "key_by",
            OperatorKind::WindowAggregate => "window_aggregate",
            OperatorKind::Sink => "sink",
        }
    }

    /// Operators that keep the keyed partitioning of their input.
    fn preserves_keying(self) -> bool {
        matches!(self, OperatorKind::Map | OperatorKind::Filter | OperatorKind::FlatMap)
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerTag(String);

impl LayerTag {
    pub const DEFAULT: &'static str = "default";

    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if name.is_empty() {
            return Err(GraphError::EmptyLayer);
        }
        Ok(LayerTag(name))
    }

    pub fn default_layer() -> Self {
        LayerTag(Self::DEFAULT.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LayerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where a source's items come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// A registered workload generator. Without a location the source is
    /// instantiated once per job location.
    Generator {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        location: Option<String>,
    },
    /// A fixed list of items, replayed once per location it is bound to.
    Literal {
        items: Vec<Datum>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        location: Option<String>,
    },
}

impl SourceSpec {
    pub fn generator(id: &str) -> Self {
        SourceSpec::Generator { id: id.to_string(), location: None }
    }

    pub fn generator_at(id: &str, location: &str) -> Self {
        SourceSpec::Generator { id: id.to_string(), location: Some(location.to_string()) }
    }

    pub fn literal<I, T>(items: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<Datum>,
    {
        SourceSpec::Literal { items: items.into_iter().map(Into::into).collect(), location: None }
    }

    pub fn location(&self) -> Option<&str> {
        match self {
            SourceSpec::Generator { location, .. } | SourceSpec::Literal { location, .. } => location.as_deref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Params {
    None,
    Source(SourceSpec),
    Function(String),
    /// Tumbling count window; `size: None` is an unbounded window that only
    /// emits at end of stream.
    Window { size: Option<u64>, aggregate: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogicalOperator {
    pub id: usize,
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub layer: LayerTag,
    #[serde(default, skip_serializing_if = "ConstraintExpr::is_empty")]
    pub constraint: ConstraintExpr,
    pub params: Params,
}

impl LogicalOperator {
    /// Display label: the operator's name if it has one, otherwise `kind#id`.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{}#{}", self.kind, self.id))
    }

    pub fn window(&self) -> Option<(Option<u64>, &str)> {
        match &self.params {
            Params::Window { size, aggregate } => Some((*size, aggregate)),
            _ => None,
        }
    }

    pub fn function(&self) -> Option<&str> {
        match &self.params {
            Params::Function(f) => Some(f),
            _ => None,
        }
    }

    pub fn source(&self) -> Option<&SourceSpec> {
        match &self.params {
            Params::Source(s) => Some(s),
            _ => None,
        }
    }

    pub(crate) fn check_params(&self) -> Result<(), GraphError> {
        let unknown = |id: &str| GraphError::UnknownFunction { kind: self.kind, id: id.to_string() };
        match (self.kind, &self.params) {
            (OperatorKind::Source, Params::Source(spec)) => match spec {
                SourceSpec::Generator { id, .. } if !GENERATORS.contains(&id.as_str()) => {
                    Err(GraphError::UnknownGenerator(id.clone()))
                }
                _ => Ok(()),
            },
            (OperatorKind::Sink, Params::None) => Ok(()),
            (OperatorKind::Map, Params::Function(f)) => MapFn::lookup(f).map(|_| ()).ok_or_else(|| unknown(f)),
            (OperatorKind::Filter, Params::Function(f)) => FilterFn::lookup(f).map(|_| ()).ok_or_else(|| unknown(f)),
            (OperatorKind::FlatMap, Params::Function(f)) => FlatMapFn::lookup(f).map(|_| ()).ok_or_else(|| unknown(f)),
            (OperatorKind::KeyBy, Params::Function(f)) => KeyFn::lookup(f).map(|_| ()).ok_or_else(|| unknown(f)),
            (OperatorKind::WindowAggregate, Params::Window { size, aggregate }) => {
                if *size == Some(0) {
                    return Err(GraphError::ZeroWindow(self.id));
                }
                AggregateFn::lookup(aggregate).map(|_| ()).ok_or_else(|| unknown(aggregate))
            }
            _ => Err(GraphError::BadParams(self.id, self.kind)),
        }
    }
}

/// A validated, immutable dataflow DAG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph")]
pub struct LogicalGraph {
    operators: Vec<LogicalOperator>,
    edges: Vec<(usize, usize)>,
    sources: Vec<usize>,
    sinks: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    operators: Vec<LogicalOperator>,
    edges: Vec<(usize, usize)>,
    #[serde(default)]
    #[allow(dead_code)]
    sources: Vec<usize>,
    #[serde(default)]
    #[allow(dead_code)]
    sinks: Vec<usize>,
}

impl TryFrom<RawGraph> for LogicalGraph {
    type Error = GraphError;

    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        LogicalGraph::from_parts(raw.operators, raw.edges)
    }
}

impl LogicalGraph {
    /// Validates operators and edges into a graph. Edges are stored sorted.
    pub fn from_parts(operators: Vec<LogicalOperator>, mut edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let n = operators.len();
        for (pos, op) in operators.iter().enumerate() {
            if op.id != pos {
                return Err(GraphError::SparseIds(pos, op.id));
            }
            op.check_params()?;
            if op.kind == OperatorKind::Source && !op.constraint.is_empty() {
                return Err(GraphError::ConstraintOnSource(op.id));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        for &(u, v) in &edges {
            if u >= n || v >= n || u == v {
                return Err(GraphError::InvalidEdge(u, v));
            }
            if operators[v].kind == OperatorKind::Source {
                return Err(GraphError::InvalidEdge(u, v));
            }
            if operators[u].kind == OperatorKind::Sink {
                return Err(GraphError::NoDownstreamSlot(u));
            }
        }
        let graph = LogicalGraph {
            sources: operators.iter().filter(|o| o.kind == OperatorKind::Source).map(|o| o.id).collect(),
            sinks: operators.iter().filter(|o| o.kind == OperatorKind::Sink).map(|o| o.id).collect(),
            operators,
            edges,
        };
        if graph.sources.is_empty() {
            return Err(GraphError::NoSource);
        }
        if graph.sinks.is_empty() {
            return Err(GraphError::NoSink);
        }
        graph.topological_order()?;
        for op in &graph.operators {
            if op.kind != OperatorKind::Source && graph.upstream(op.id).next().is_none() {
                return Err(GraphError::Dangling(op.id, "no input"));
            }
            if op.kind != OperatorKind::Sink && graph.downstream(op.id).next().is_none() {
                return Err(GraphError::Dangling(op.id, "output never consumed"));
            }
            if op.kind == OperatorKind::WindowAggregate && !graph.keyed_upstream(op.id) {
                return Err(GraphError::WindowWithoutKeyBy(op.id));
            }
        }
        Ok(graph)
    }

    pub fn operators(&self) -> &[LogicalOperator] {
        &self.operators
    }

    pub fn operator(&self, id: usize) -> &LogicalOperator {
        &self.operators[id]
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    pub fn upstream(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == id).map(|e| e.0)
    }

    pub fn downstream(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == id).map(|e| e.1)
    }

    /// Finds an operator by name, falling back to `kind#id` labels.
    pub fn find(&self, name: &str) -> Option<&LogicalOperator> {
        self.operators.iter().find(|o| o.name.as_deref() == Some(name) || o.label() == name)
    }

    /// Distinct layer tags, in order of first appearance by operator id.
    pub fn layers(&self) -> Vec<&LayerTag> {
        let mut seen = BTreeSet::new();
        self.operators.iter().map(|o| &o.layer).filter(|l| seen.insert(*l)).collect()
    }

    /// Kahn's algorithm, always taking the smallest ready id.
    pub fn topological_order(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.operators.len();
        let mut indegree = vec![0usize; n];
        for &(_, v) in &self.edges {
            indegree[v] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = ready.pop_first() {
            order.push(u);
            for v in self.downstream(u) {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    ready.insert(v);
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
            return Err(GraphError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Every upstream path of `id` reaches a key_by through key-preserving operators.
    fn keyed_upstream(&self, id: usize) -> bool {
        let mut queue: VecDeque<usize> = self.upstream(id).collect();
        let mut seen = BTreeSet::new();
        if queue.is_empty() {
            return false;
        }
        while let Some(u) = queue.pop_front() {
            if !seen.insert(u) {
                continue;
            }
            let op = &self.operators[u];
            if op.kind == OperatorKind::KeyBy {
                continue;
            }
            if !op.kind.preserves_keying() {
                return false;
            }
            queue.extend(self.upstream(u));
        }
        true
    }

    /// Canonical JSON: operators ordered by id, edges sorted.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(id: usize, kind: OperatorKind, params: Params) -> LogicalOperator {
        LogicalOperator {
            id,
            kind,
            name: None,
            layer: LayerTag::default_layer(),
            constraint: ConstraintExpr::always(),
            params,
        }
    }

    fn chain() -> Vec<LogicalOperator> {
        vec![
            op(0, OperatorKind::Source, Params::Source(SourceSpec::literal([1i64, 2, 3]))),
            op(1, OperatorKind::Map, Params::Function("identity".into())),
            op(2, OperatorKind::Sink, Params::None),
        ]
    }

    #[test]
    fn from_parts_accepts_chain() {
        let g = LogicalGraph::from_parts(chain(), vec![(1, 2), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.sources(), &[0]);
        assert_eq!(g.sinks(), &[2]);
    }

    #[test]
    fn rejects_cycle() {
        let mut ops = chain();
        ops.insert(2, op(2, OperatorKind::Map, Params::Function("identity".into())));
        ops[3].id = 3;
        let err = LogicalGraph::from_parts(ops, vec![(0, 1), (1, 2), (2, 1), (2, 3)]).unwrap_err();
        assert!(matches!(err, GraphError::Cycle(_)));
    }

    #[test]
    fn rejects_dangling_output() {
        let mut ops = chain();
        ops.push(op(3, OperatorKind::Map, Params::Function("identity".into())));
        let err = LogicalGraph::from_parts(ops, vec![(0, 1), (1, 2), (1, 3)]).unwrap_err();
        assert_eq!(err, GraphError::Dangling(3, "output never consumed"));
    }

    #[test]
    fn rejects_sparse_ids_and_bad_params() {
        let mut ops = chain();
        ops[2].id = 7;
        assert!(matches!(LogicalGraph::from_parts(ops, vec![(0, 1), (1, 2)]), Err(GraphError::SparseIds(2, 7))));
        let mut ops = chain();
        ops[1].params = Params::None;
        assert!(matches!(LogicalGraph::from_parts(ops, vec![(0, 1), (1, 2)]), Err(GraphError::BadParams(1, _))));
    }

    #[test]
    fn json_roundtrip_validates() {
        let g = LogicalGraph::from_parts(chain(), vec![(0, 1), (1, 2)]).unwrap();
        let json = g.to_canonical_json();
        let back: LogicalGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        let broken = json.replace("\"identity\"", "\"nope\"");
        assert!(serde_json::from_str::<LogicalGraph>(&broken).is_err());
    }
}
