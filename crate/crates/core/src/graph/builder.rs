use std::cell::RefCell;
use std::rc::Rc;

use super::{ConstraintExpr, GraphError, LayerTag, LogicalGraph, LogicalOperator, OperatorKind, Params, SourceSpec};

#[derive(Default)]
struct BuildState {
    operators: Vec<LogicalOperator>,
    edges: Vec<(usize, usize)>,
    /// Layer named by the first `to_layer` call; it also tags every operator
    /// appended before that call.
    first_layer: Option<LayerTag>,
    /// Layer for streams opened from the builder.
    context_layer: Option<LayerTag>,
    /// Operators appended while their branch had no layer yet.
    provisional: Vec<usize>,
}

impl BuildState {
    fn note_layer(&mut self, layer: &LayerTag) {
        if self.first_layer.is_none() {
            self.first_layer = Some(layer.clone());
        }
    }
}

/// Entry point for building a [`LogicalGraph`].
///
/// ```
/// use flowunits::graph::{GraphBuilder, SourceSpec};
///
/// let builder = GraphBuilder::new();
/// builder
///     .stream(SourceSpec::literal(["a b", "b"]))?
///     .flat_map("split_words")?
///     .key_by("word")?
///     .window_aggregate(None, "count")?
///     .sink()?;
/// let graph = builder.finalize()?;
/// assert_eq!(graph.len(), 5);
/// # Ok::<(), flowunits::graph::GraphError>(())
/// ```
#[derive(Default)]
pub struct GraphBuilder {
    state: Rc<RefCell<BuildState>>,
}

/// Builder cursor at the tail operator of one branch.
///
/// Cloning a stream forks the branch: both clones append after the same tail.
#[derive(Clone)]
pub struct Stream {
    state: Rc<RefCell<BuildState>>,
    tail: usize,
    layer: Option<LayerTag>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tags streams opened after this call with `layer`.
    pub fn to_layer(&self, layer: &str) -> Result<&Self, GraphError> {
        let layer = LayerTag::new(layer)?;
        let mut st = self.state.borrow_mut();
        st.note_layer(&layer);
        st.context_layer = Some(layer);
        drop(st);
        Ok(self)
    }

    pub fn stream(&self, source: SourceSpec) -> Result<Stream, GraphError> {
        let layer = self.state.borrow().context_layer.clone();
        let op = LogicalOperator {
            id: 0,
            kind: OperatorKind::Source,
            name: None,
            layer: layer.clone().unwrap_or_else(LayerTag::default_layer),
            constraint: ConstraintExpr::always(),
            params: Params::Source(source),
        };
        let tail = push(&self.state, op, None, layer.is_none())?;
        Ok(Stream { state: Rc::clone(&self.state), tail, layer })
    }

    /// Resolves layer defaults and validates the graph.
    pub fn finalize(self) -> Result<LogicalGraph, GraphError> {
        let st = self.state.borrow();
        let mut operators = st.operators.clone();
        if let Some(first) = &st.first_layer {
            for &id in &st.provisional {
                operators[id].layer = first.clone();
            }
        }
        LogicalGraph::from_parts(operators, st.edges.clone())
    }
}

fn push(
    state: &Rc<RefCell<BuildState>>,
    mut op: LogicalOperator,
    upstream: Option<usize>,
    provisional: bool,
) -> Result<usize, GraphError> {
    op.check_params()?;
    let mut st = state.borrow_mut();
    let id = st.operators.len();
    op.id = id;
    if provisional {
        st.provisional.push(id);
    }
    st.operators.push(op);
    if let Some(u) = upstream {
        st.edges.push((u, id));
    }
    Ok(id)
}

impl Stream {
    /// Id of the operator this stream currently ends at.
    pub fn tail(&self) -> usize {
        self.tail
    }

    fn append(self, kind: OperatorKind, params: Params) -> Result<Stream, GraphError> {
        if self.state.borrow().operators[self.tail].kind == OperatorKind::Sink {
            return Err(GraphError::NoDownstreamSlot(self.tail));
        }
        let op = LogicalOperator {
            id: 0,
            kind,
            name: None,
            layer: self.layer.clone().unwrap_or_else(LayerTag::default_layer),
            constraint: ConstraintExpr::always(),
            params,
        };
        let tail = push(&self.state, op, Some(self.tail), self.layer.is_none())?;
        Ok(Stream { tail, ..self })
    }

    pub fn map(self, function: &str) -> Result<Stream, GraphError> {
        self.append(OperatorKind::Map, Params::Function(function.to_string()))
    }

    pub fn filter(self, predicate: &str) -> Result<Stream, GraphError> {
        self.append(OperatorKind::Filter, Params::Function(predicate.to_string()))
    }

    pub fn flat_map(self, function: &str) -> Result<Stream, GraphError> {
        self.append(OperatorKind::FlatMap, Params::Function(function.to_string()))
    }

    /// Generic form of `map`/`filter`/`flat_map`.
    pub fn apply(self, kind: OperatorKind, function: &str) -> Result<Stream, GraphError> {
        match kind {
            OperatorKind::Map | OperatorKind::Filter | OperatorKind::FlatMap => {
                self.append(kind, Params::Function(function.to_string()))
            }
            other => Err(GraphError::BadParams(self.tail, other)),
        }
    }

    /// Marks the outgoing edge as key-hash routed.
    pub fn key_by(self, key: &str) -> Result<Stream, GraphError> {
        self.append(OperatorKind::KeyBy, Params::Function(key.to_string()))
    }

    /// Tumbling count window per key. `size: None` means a single window
    /// closed at end of stream.
    pub fn window_aggregate(self, size: Option<u64>, aggregate: &str) -> Result<Stream, GraphError> {
        if !self.keyed() {
            return Err(GraphError::WindowWithoutKeyBy(self.state.borrow().operators.len()));
        }
        self.append(OperatorKind::WindowAggregate, Params::Window { size, aggregate: aggregate.to_string() })
    }

    fn keyed(&self) -> bool {
        let st = self.state.borrow();
        let mut at = self.tail;
        loop {
            match st.operators[at].kind {
                OperatorKind::KeyBy => return true,
                OperatorKind::Map | OperatorKind::Filter | OperatorKind::FlatMap => {
                    match st.edges.iter().find(|e| e.1 == at) {
                        Some(e) => at = e.0,
                        None => return false,
                    }
                }
                _ => return false,
            }
        }
    }

    /// Operators appended after this call carry `layer`.
    pub fn to_layer(self, layer: &str) -> Result<Stream, GraphError> {
        let layer = LayerTag::new(layer)?;
        self.state.borrow_mut().note_layer(&layer);
        Ok(Stream { layer: Some(layer), ..self })
    }

    /// Conjoins `expr` onto the tail operator's constraint.
    pub fn add_constraint(self, expr: &str) -> Result<Stream, GraphError> {
        let expr = ConstraintExpr::parse(expr)?;
        self.add_constraint_expr(expr)
    }

    pub fn add_constraint_expr(self, expr: ConstraintExpr) -> Result<Stream, GraphError> {
        {
            let mut st = self.state.borrow_mut();
            let op = &mut st.operators[self.tail];
            if op.kind == OperatorKind::Source {
                return Err(GraphError::ConstraintOnSource(self.tail));
            }
            op.constraint = std::mem::take(&mut op.constraint).and(expr);
        }
        Ok(self)
    }

    /// Names the tail operator.
    pub fn named(self, name: &str) -> Stream {
        self.state.borrow_mut().operators[self.tail].name = Some(name.to_string());
        self
    }

    pub fn sink(self) -> Result<(), GraphError> {
        self.append(OperatorKind::Sink, Params::None).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word_count() -> GraphBuilder {
        let b = GraphBuilder::new();
        b.stream(SourceSpec::literal(["a b", "b"]))
            .unwrap()
            .flat_map("split_words")
            .unwrap()
            .key_by("word")
            .unwrap()
            .window_aggregate(None, "count")
            .unwrap()
            .sink()
            .unwrap();
        b
    }

    #[test]
    fn word_count_shape() {
        let g = word_count().finalize().unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.edges().len(), 4);
        assert!(g.operators().iter().all(|o| o.layer.as_str() == "default"));
    }

    #[test]
    fn single_literal_source() {
        let b = GraphBuilder::new();
        let s = b.stream(SourceSpec::literal([1i64, 2, 3])).unwrap();
        assert_eq!(s.tail(), 0);
        assert_eq!(b.state.borrow().operators.len(), 1);
        assert!(b.state.borrow().edges.is_empty());
    }

    #[test]
    fn two_sources_one_graph() {
        let b = GraphBuilder::new();
        let a = b.stream(SourceSpec::literal([1i64])).unwrap();
        let c = b.stream(SourceSpec::literal([2i64])).unwrap();
        a.map("identity").unwrap().sink().unwrap();
        c.sink().unwrap();
        let g = b.finalize().unwrap();
        assert_eq!(g.sources(), &[0, 1]);
    }

    #[test]
    fn unknown_ids_rejected() {
        let b = GraphBuilder::new();
        assert!(matches!(b.stream(SourceSpec::generator("nope")), Err(GraphError::UnknownGenerator(_))));
        let s = b.stream(SourceSpec::generator("continuum_gen")).unwrap();
        assert!(matches!(s.clone().map("nope"), Err(GraphError::UnknownFunction { .. })));
        assert!(matches!(s.to_layer(""), Err(GraphError::EmptyLayer)));
    }

    #[test]
    fn layer_tags_follow_calls() {
        let b = GraphBuilder::new();
        b.stream(SourceSpec::literal([3i64]))
            .unwrap()
            .to_layer("edge")
            .unwrap()
            .filter("keep_mult3")
            .unwrap()
            .to_layer("a")
            .unwrap()
            .to_layer("cloud")
            .unwrap()
            .map("identity")
            .unwrap()
            .sink()
            .unwrap();
        let g = b.finalize().unwrap();
        let tags: Vec<_> = g.operators().iter().map(|o| o.layer.as_str()).collect();
        // the source precedes every to_layer call and takes the first layer named
        assert_eq!(tags, ["edge", "edge", "cloud", "cloud"]);
    }

    #[test]
    fn constraints_conjoin() {
        let b = GraphBuilder::new();
        b.stream(SourceSpec::literal([1i64]))
            .unwrap()
            .map("identity")
            .unwrap()
            .add_constraint("a=1")
            .unwrap()
            .add_constraint("")
            .unwrap()
            .add_constraint("b=2")
            .unwrap()
            .sink()
            .unwrap();
        let g = b.finalize().unwrap();
        assert_eq!(g.operator(1).constraint.to_string(), "a = 1 && b = 2");
    }

    #[test]
    fn constraint_on_source_rejected() {
        let b = GraphBuilder::new();
        let s = b.stream(SourceSpec::literal([1i64])).unwrap();
        assert_eq!(s.add_constraint("gpu=yes").err(), Some(GraphError::ConstraintOnSource(0)));
    }

    #[test]
    fn window_needs_key_by() {
        let b = GraphBuilder::new();
        let s = b.stream(SourceSpec::literal([1i64])).unwrap();
        assert!(matches!(s.clone().window_aggregate(Some(3), "mean"), Err(GraphError::WindowWithoutKeyBy(_))));
        let keyed = s.key_by("value").unwrap().filter("keep_all").unwrap();
        assert!(keyed.window_aggregate(Some(3), "mean").is_ok());
    }

    #[test]
    fn dangling_branch_rejected() {
        let b = GraphBuilder::new();
        let s = b.stream(SourceSpec::literal([1i64])).unwrap();
        let _unused = s.clone().map("identity").unwrap();
        s.sink().unwrap();
        assert!(matches!(b.finalize(), Err(GraphError::Dangling(1, _))));
    }

    #[test]
    fn rebuild_is_identical() {
        assert_eq!(word_count().finalize().unwrap(), word_count().finalize().unwrap());
    }

    #[test]
    fn names_survive_layer_resolution() {
        let b = GraphBuilder::new();
        b.stream(SourceSpec::literal([1i64]))
            .unwrap()
            .map("identity")
            .unwrap()
            .named("O1")
            .to_layer("edge")
            .unwrap()
            .sink()
            .unwrap();
        let g = b.finalize().unwrap();
        assert_eq!(g.operator(1).name.as_deref(), Some("O1"));
        assert_eq!(g.operator(1).layer.as_str(), "edge");
        assert_eq!(g.operator(0).name, None);
    }
}
