//! Pipelines and topologies shipped with the crate.

use crate::graph::{GraphBuilder, GraphError, LogicalGraph, SourceSpec};
use crate::topology::{TopologyError, ZoneTopology};

pub const PIPELINES: &[&str] = &["continuum_v1", "acme_v1", "word_count"];
pub const TOPOLOGIES: &[&str] = &["acme", "continuum", "single"];

/// Window size of the averaging stage in the bundled pipelines.
pub const DEFAULT_WINDOW: u64 = 10;

pub fn topology_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "acme" => include_str!("../topologies/acme.json"),
        "continuum" => include_str!("../topologies/continuum.json"),
        "single" => include_str!("../topologies/single.json"),
        _ => return None,
    })
}

/// Parses a bundled topology: `acme` (five edge servers, two sites, GPU and
/// non-GPU cloud machines), `continuum` (four 1-core edge servers, one site
/// of 2x4 cores, one 16-core cloud machine) or `single` (one zone).
pub fn topology(name: &str) -> Result<ZoneTopology, TopologyError> {
    let doc = topology_source(name).ok_or_else(|| TopologyError::Parse(format!("no bundled topology `{name}`")))?;
    ZoneTopology::parse(doc)
}

/// Builds a bundled pipeline; `None` for unknown names.
pub fn pipeline(name: &str, window: u64) -> Option<Result<LogicalGraph, GraphError>> {
    Some(match name {
        "continuum_v1" => continuum_v1(window),
        "acme_v1" => acme_v1(window),
        "word_count" => word_count(&["a b", "b"]),
        _ => return None,
    })
}

/// source -> O1 filter (keeps multiples of 3) -> key_by machine ->
/// O2 windowed mean -> O3 Collatz steps -> sink, over edge/site/cloud.
pub fn continuum_v1(window: u64) -> Result<LogicalGraph, GraphError> {
    let b = GraphBuilder::new();
    b.to_layer("edge")?;
    b.stream(SourceSpec::generator("continuum_gen"))?
        .filter("keep_mult3")?
        .named("O1")
        .key_by("machine")?
        .to_layer("site")?
        .window_aggregate(Some(window), "mean")?
        .named("O2")
        .to_layer("cloud")?
        .map("collatz")?
        .named("O3")
        .sink()?;
    b.finalize()
}

/// Same shape as `continuum_v1` with the stages named FP/AD/ML and the ML
/// stage restricted to GPU machines with at least four CPUs.
pub fn acme_v1(window: u64) -> Result<LogicalGraph, GraphError> {
    let b = GraphBuilder::new();
    b.to_layer("edge")?;
    b.stream(SourceSpec::generator("continuum_gen"))?
        .filter("keep_mult3")?
        .named("FP")
        .key_by("machine")?
        .to_layer("site")?
        .window_aggregate(Some(window), "mean")?
        .named("AD")
        .to_layer("cloud")?
        .map("collatz")?
        .named("ML")
        .add_constraint("n_cpu >= 4 && gpu = yes")?
        .sink()?;
    b.finalize()
}

pub fn word_count(lines: &[&str]) -> Result<LogicalGraph, GraphError> {
    let b = GraphBuilder::new();
    b.stream(SourceSpec::literal(lines.iter().copied()))?
        .flat_map("split_words")?
        .key_by("word")?
        .window_aggregate(None, "count")?
        .sink()?;
    b.finalize()
}
