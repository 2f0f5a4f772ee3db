//! Seeded random generators and brute-force oracles shared by the property
//! suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use flowunits::graph::{ConstraintExpr, LayerTag, LogicalGraph, LogicalOperator, OperatorKind, Params, Predicate, Relation, SourceSpec};
use flowunits::topology::{CapabilitySet, Host, Zone, ZoneTopology};
use flowunits::value::Value;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const LAYERS: [&str; 3] = ["edge", "site", "cloud"];

/// Random DAG over 2..=14 operators: one or two sources, maps in between,
/// and a sink at every operator without consumers.
pub fn random_dag(rng: &mut ChaCha8Rng) -> LogicalGraph {
    let n = rng.random_range(2..=14usize);
    let two_sources = n > 2 && rng.random_bool(0.3);
    let first_inner = if two_sources { 2 } else { 1 };
    let mut edges = Vec::new();
    for j in first_inner..n {
        let parents = rng.random_range(1..=3usize.min(j));
        for _ in 0..parents {
            edges.push((rng.random_range(0..j), j));
        }
    }
    for src in 0..first_inner {
        if !edges.iter().any(|&(u, _)| u == src) {
            edges.push((src, n - 1));
        }
    }
    let has_out: BTreeSet<usize> = edges.iter().map(|&(u, _)| u).collect();
    let operators = (0..n)
        .map(|id| {
            let layer = LayerTag::new(LAYERS[rng.random_range(0..LAYERS.len())]).unwrap();
            let (kind, params) = if id < first_inner {
                (OperatorKind::Source, Params::Source(SourceSpec::literal([id as i64])))
            } else if !has_out.contains(&id) {
                (OperatorKind::Sink, Params::None)
            } else {
                (OperatorKind::Map, Params::Function("identity".into()))
            };
            LogicalOperator { id, kind, name: None, layer, constraint: ConstraintExpr::always(), params }
        })
        .collect();
    LogicalGraph::from_parts(operators, edges).expect("generated graphs are valid")
}

/// Connected components of the same-layer subgraph, by depth-first search.
pub fn same_layer_components(g: &LogicalGraph) -> BTreeSet<BTreeSet<usize>> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(u, v) in g.edges() {
        if g.operator(u).layer == g.operator(v).layer {
            adj.entry(u).or_default().push(v);
            adj.entry(v).or_default().push(u);
        }
    }
    let mut seen = vec![false; g.len()];
    let mut out = BTreeSet::new();
    for start in 0..g.len() {
        if seen[start] {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(x) = stack.pop() {
            comp.insert(x);
            for &y in adj.get(&x).into_iter().flatten() {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        out.insert(comp);
    }
    out
}

const ATTRS: [&str; 4] = ["n_cpu", "mem", "gpu", "arch"];
const RELATIONS: [Relation; 6] = [Relation::Eq, Relation::Ne, Relation::Ge, Relation::Le, Relation::Gt, Relation::Lt];

fn random_value(rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..3) {
        0 => Value::Int(rng.random_range(-2..=8)),
        1 => Value::Bool(rng.random_bool(0.5)),
        _ => Value::Str(["x86", "arm", "rv"][rng.random_range(0..3)].into()),
    }
}

/// Random capability set and constraint over a small shared vocabulary so
/// that matches and mismatches both occur.
pub fn random_host_constraint(rng: &mut ChaCha8Rng) -> (CapabilitySet, ConstraintExpr) {
    let mut caps = CapabilitySet::new();
    for a in ATTRS {
        if rng.random_bool(0.75) {
            caps.insert(a.to_string(), random_value(rng));
        }
    }
    let k = rng.random_range(0..=4);
    let predicates = (0..k)
        .map(|_| {
            let relation = RELATIONS[rng.random_range(0..RELATIONS.len())];
            let value = if relation.is_ordering() { Value::Int(rng.random_range(-2..=8)) } else { random_value(rng) };
            Predicate::new(ATTRS[rng.random_range(0..ATTRS.len())], relation, value).unwrap()
        })
        .collect();
    (caps, ConstraintExpr { predicates })
}

/// One truth-table bit per predicate, decided from the relation's table of
/// admitted orderings.
pub fn predicate_bits(caps: &CapabilitySet, c: &ConstraintExpr) -> Vec<bool> {
    use std::cmp::Ordering::*;
    c.predicates
        .iter()
        .map(|p| {
            let Some(have) = caps.get(&p.attribute) else { return false };
            let admitted: &[std::cmp::Ordering] = match p.relation {
                Relation::Eq => return have == &p.value,
                Relation::Ne => return have != &p.value,
                Relation::Ge => &[Greater, Equal],
                Relation::Le => &[Less, Equal],
                Relation::Gt => &[Greater],
                Relation::Lt => &[Less],
            };
            match (have, &p.value) {
                (Value::Int(h), Value::Int(w)) => admitted.contains(&h.cmp(w)),
                _ => false,
            }
        })
        .collect()
}

/// Conjunction by enumeration: the row of the truth table selected by the
/// predicate bits is true only for the all-ones row.
pub fn truth_table_satisfies(bits: &[bool]) -> bool {
    let rows = 1usize << bits.len();
    let row: usize = bits.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum();
    (0..rows).map(|r| r == rows - 1).nth(row).unwrap()
}

/// Random zone tree with all leaves at the same depth (1..=3 levels below
/// the root) and one location and host per leaf.
pub fn random_tree(rng: &mut ChaCha8Rng) -> ZoneTopology {
    let height = rng.random_range(1..=3usize);
    let layer = |d: usize| format!("t{}", height - d);
    let mut zones = vec![Zone { id: "z".into(), layer: layer(0), parent: None, location: None }];
    let mut frontier = vec!["z".to_string()];
    for d in 1..=height {
        let mut next = Vec::new();
        for parent in &frontier {
            for c in 0..rng.random_range(1..=3) {
                let id = format!("{parent}.{c}");
                zones.push(Zone { id: id.clone(), layer: layer(d), parent: Some(parent.clone()), location: None });
                next.push(id);
            }
        }
        frontier = next;
    }
    let mut hosts = Vec::new();
    for (i, leaf) in frontier.iter().enumerate() {
        zones.iter_mut().find(|z| &z.id == leaf).unwrap().location = Some(format!("L{i}"));
        hosts.push(Host { id: format!("h{i}"), zone: leaf.clone(), cores: 1, capabilities: CapabilitySet::new(), speed: 1.0 });
    }
    ZoneTopology::from_parts(zones, hosts).expect("generated trees are valid")
}

/// Zones at each depth cover disjoint location sets whose union is every
/// location, and every zone covers exactly the union of its children.
pub fn coverage_is_partition(t: &ZoneTopology) -> bool {
    let all = t.locations();
    let mut by_depth: BTreeMap<usize, Vec<BTreeSet<String>>> = BTreeMap::new();
    for z in t.zones() {
        let cov = t.coverage(&z.id).unwrap();
        let children = t.children(&z.id).unwrap();
        if !children.is_empty() {
            let union: BTreeSet<String> = children.iter().flat_map(|c| t.coverage(&c.id).unwrap()).collect();
            if union != cov {
                return false;
            }
        }
        by_depth.entry(t.depth(&z.id).unwrap()).or_default().push(cov);
    }
    by_depth.values().all(|covs| {
        let total: usize = covs.iter().map(BTreeSet::len).sum();
        let union: BTreeSet<&String> = covs.iter().flatten().collect();
        total == all.len() && union.len() == all.len()
    })
}
