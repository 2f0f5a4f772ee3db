use std::collections::BTreeMap;

use super::report::{SinkOutput, SinkRecord};
use super::workload::source_items;
use crate::functions::{Accumulator, AggregateFn, FilterFn, FlatMapFn, KeyFn, MapFn};
use crate::graph::{LogicalGraph, OperatorKind};
use crate::planner::JobSpec;
use crate::value::{DataItem, Key};

/// Runs `graph` on the job's workload with one instance per operator and no
/// network, returning what the sinks collect.
///
/// Sources bound to a fixed location emit only there; others emit once per
/// job location. Multi-input operators see their inputs concatenated in
/// upstream id order.
pub fn oracle_run(graph: &LogicalGraph, job: &JobSpec) -> SinkOutput {
    let order = graph.topological_order().expect("finalized graphs are acyclic");
    let mut outputs: Vec<Vec<DataItem>> = vec![Vec::new(); graph.len()];
    let mut collected = Vec::new();
    for id in order {
        let op = graph.operator(id);
        let input: Vec<DataItem> = graph.upstream(id).flat_map(|u| outputs[u].iter().cloned()).collect();
        let out = match op.kind {
            OperatorKind::Source => {
                let spec = op.source().expect("source params");
                let locations: Vec<&str> = match spec.location() {
                    Some(l) => vec![l],
                    None => job.locations.iter().map(String::as_str).collect(),
                };
                locations
                    .into_iter()
                    .flat_map(|l| source_items(spec, l, job.workload.events_per_location, job.workload.seed))
                    .collect()
            }
            OperatorKind::Map => {
                let f = MapFn::lookup(op.function().unwrap()).unwrap();
                input.into_iter().map(|i| f.apply(i).0).collect()
            }
            OperatorKind::Filter => {
                let f = FilterFn::lookup(op.function().unwrap()).unwrap();
                input.into_iter().filter(|i| f.keep(i)).collect()
            }
            OperatorKind::FlatMap => {
                let f = FlatMapFn::lookup(op.function().unwrap()).unwrap();
                input.into_iter().flat_map(|i| f.apply(i)).collect()
            }
            OperatorKind::KeyBy => {
                let f = KeyFn::lookup(op.function().unwrap()).unwrap();
                input.into_iter().map(|i| f.apply(i)).collect()
            }
            OperatorKind::WindowAggregate => {
                let (size, agg) = op.window().unwrap();
                windows(input, size, AggregateFn::lookup(agg).unwrap())
            }
            OperatorKind::Sink => {
                collected.extend(input.into_iter().map(|item| SinkRecord { sink: id, item }));
                Vec::new()
            }
        };
        outputs[id] = out;
    }
    SinkOutput::new(collected)
}

/// Splits each key's items, in arrival order, into chunks of `size` and
/// aggregates every chunk.
fn windows(input: Vec<DataItem>, size: Option<u64>, agg: AggregateFn) -> Vec<DataItem> {
    let mut per_key: BTreeMap<Key, Vec<DataItem>> = BTreeMap::new();
    for item in input {
        per_key.entry(item.key.clone()).or_default().push(item);
    }
    let mut out = Vec::new();
    for (key, items) in per_key {
        let chunk = size.map_or(items.len().max(1), |s| s as usize);
        for window in items.chunks(chunk) {
            let mut acc = Accumulator::default();
            window.iter().for_each(|i| acc.push(&i.value));
            let origin = window.iter().map(|i| i.origin).min().expect("chunks are non-empty");
            out.push(DataItem { key: key.clone(), value: acc.finish(agg), origin });
        }
    }
    out
}
