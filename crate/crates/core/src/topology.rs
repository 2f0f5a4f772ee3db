//! Zone tree, host inventory and capability matching.
//!
//! A topology is a rooted tree of zones. Each tree depth is one layer
//! (edge, site, cloud, ...); every leaf zone is one geographical location.
//! Hosts live in zones and advertise capabilities that operator
//! constraints are evaluated against.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::ConstraintExpr;
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology parse error: {0}")]
    Parse(String),
    #[error("forest: zones {0:?} have no parent")]
    Forest(Vec<String>),
    #[error("no root zone")]
    NoRoot,
    #[error("zone {0} is not reachable from the root (parent cycle)")]
    Unreachable(String),
    #[error("zone {zone} names unknown parent {parent}")]
    UnknownParent { zone: String, parent: String },
    #[error("layer mismatch at depth {depth}: zone {zone} is `{found}`, expected `{expected}`")]
    LayerMismatch { depth: usize, zone: String, expected: String, found: String },
    #[error("layer `{0}` is used at more than one depth")]
    LayerReused(String),
    #[error("non-leaf zone {0} carries a location")]
    LocationOnInner(String),
    #[error("leaf zone {0} has no location")]
    LeafWithoutLocation(String),
    #[error("location {0} appears on more than one leaf")]
    DuplicateLocation(String),
    #[error("duplicate zone id {0}")]
    DuplicateZone(String),
    #[error("duplicate host id {0}")]
    DuplicateHost(String),
    #[error("host {host} references unknown zone {zone}")]
    HostZone { host: String, zone: String },
    #[error("host {0} must have at least one core")]
    ZeroCores(String),
    #[error("host {host}: n_cpu capability {n_cpu} differs from cores {cores}")]
    CpuMismatch { host: String, n_cpu: String, cores: u32 },
    #[error("host {0} has a non-positive speed factor")]
    BadSpeed(String),
    #[error("unknown zone {0}")]
    UnknownZone(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: String,
    pub layer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

/// Attribute-value capability descriptors of a host.
pub type CapabilitySet = BTreeMap<String, Value>;

fn default_speed() -> f64 {
    1.0
}

fn is_unit_speed(s: &f64) -> bool {
    *s == 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Host {
    pub id: String,
    pub zone: String,
    pub cores: u32,
    #[serde(default)]
    pub capabilities: CapabilitySet,
    /// Relative compute speed; operator costs are divided by it.
    #[serde(default = "default_speed", skip_serializing_if = "is_unit_speed")]
    pub speed: f64,
}

impl Host {
    /// True iff every predicate holds. Missing attributes make a predicate false.
    pub fn satisfies(&self, constraint: &ConstraintExpr) -> bool {
        satisfies(&self.capabilities, constraint)
    }
}

/// Evaluates a constraint against a capability set.
pub fn satisfies(capabilities: &CapabilitySet, constraint: &ConstraintExpr) -> bool {
    constraint
        .predicates
        .iter()
        .all(|p| capabilities.get(&p.attribute).is_some_and(|stored| p.holds_for(stored)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    zones: Vec<Zone>,
    #[serde(default)]
    hosts: Vec<Host>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZoneTopology {
    zones: Vec<Zone>,
    hosts: Vec<Host>,
    index: BTreeMap<String, usize>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    /// Layer names from leaf depth to root depth.
    layer_order: Vec<String>,
    root: usize,
}

impl ZoneTopology {
    pub fn parse(document: &str) -> Result<Self, TopologyError> {
        let raw: RawTopology = serde_json::from_str(document).map_err(|e| TopologyError::Parse(e.to_string()))?;
        Self::from_parts(raw.zones, raw.hosts)
    }

    pub fn from_parts(mut zones: Vec<Zone>, mut hosts: Vec<Host>) -> Result<Self, TopologyError> {
        zones.sort_by(|a, b| a.id.cmp(&b.id));
        hosts.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = BTreeMap::new();
        for (i, z) in zones.iter().enumerate() {
            if index.insert(z.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateZone(z.id.clone()));
            }
        }
        let roots: Vec<usize> = (0..zones.len()).filter(|&i| zones[i].parent.is_none()).collect();
        let root = match roots.as_slice() {
            [] => return Err(TopologyError::NoRoot),
            [r] => *r,
            many => return Err(TopologyError::Forest(many.iter().map(|&i| zones[i].id.clone()).collect())),
        };
        let mut children = vec![Vec::new(); zones.len()];
        for (i, z) in zones.iter().enumerate() {
            if let Some(p) = &z.parent {
                let pi = *index
                    .get(p)
                    .ok_or_else(|| TopologyError::UnknownParent { zone: z.id.clone(), parent: p.clone() })?;
                children[pi].push(i);
            }
        }
        // breadth-first from the root assigns depths and detects cycles
        let mut depth = vec![usize::MAX; zones.len()];
        depth[root] = 0;
        let mut frontier = vec![root];
        while let Some(z) = frontier.pop() {
            for &c in &children[z] {
                depth[c] = depth[z] + 1;
                frontier.push(c);
            }
        }
        if let Some(i) = depth.iter().position(|&d| d == usize::MAX) {
            return Err(TopologyError::Unreachable(zones[i].id.clone()));
        }
        let max_depth = depth.iter().copied().max().unwrap_or(0);
        let mut by_depth: Vec<Option<(String, String)>> = vec![None; max_depth + 1];
        for (i, z) in zones.iter().enumerate() {
            match &by_depth[depth[i]] {
                None => by_depth[depth[i]] = Some((z.layer.clone(), z.id.clone())),
                Some((layer, _)) if *layer != z.layer => {
                    return Err(TopologyError::LayerMismatch {
                        depth: depth[i],
                        zone: z.id.clone(),
                        expected: layer.clone(),
                        found: z.layer.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        let layer_order: Vec<String> = by_depth.into_iter().rev().map(|e| e.expect("every depth populated").0).collect();
        let mut seen = BTreeSet::new();
        for l in &layer_order {
            if !seen.insert(l) {
                return Err(TopologyError::LayerReused(l.clone()));
            }
        }
        let mut locations = BTreeSet::new();
        for (i, z) in zones.iter().enumerate() {
            match (&z.location, children[i].is_empty()) {
                (Some(_), false) => return Err(TopologyError::LocationOnInner(z.id.clone())),
                (None, true) => return Err(TopologyError::LeafWithoutLocation(z.id.clone())),
                (Some(l), true) if !locations.insert(l.clone()) => {
                    return Err(TopologyError::DuplicateLocation(l.clone()))
                }
                _ => {}
            }
        }
        let mut host_ids = BTreeSet::new();
        for h in &hosts {
            if !host_ids.insert(&h.id) {
                return Err(TopologyError::DuplicateHost(h.id.clone()));
            }
            if !index.contains_key(&h.zone) {
                return Err(TopologyError::HostZone { host: h.id.clone(), zone: h.zone.clone() });
            }
            if h.cores == 0 {
                return Err(TopologyError::ZeroCores(h.id.clone()));
            }
            if let Some(n) = h.capabilities.get("n_cpu") {
                if n.as_int() != Some(i64::from(h.cores)) {
                    return Err(TopologyError::CpuMismatch { host: h.id.clone(), n_cpu: n.to_string(), cores: h.cores });
                }
            }
            if !(h.speed.is_finite() && h.speed > 0.0) {
                return Err(TopologyError::BadSpeed(h.id.clone()));
            }
        }
        for c in &mut children {
            c.sort_by(|a, b| zones[*a].id.cmp(&zones[*b].id));
        }
        Ok(ZoneTopology { zones, hosts, index, children, depth, layer_order, root })
    }

    /// Canonical JSON document (zones and hosts sorted by id).
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            zones: &'a [Zone],
            hosts: &'a [Host],
        }
        serde_json::to_string_pretty(&Doc { zones: &self.zones, hosts: &self.hosts }).expect("serializable")
    }

    /// SHA-256 of the canonical document; plans record it.
    pub fn fingerprint(&self) -> String {
        hex(&Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn hosts(&self) -> &[Host] {
        &self.hosts
    }

    pub fn zone(&self, id: &str) -> Option<&Zone> {
        self.index.get(id).map(|&i| &self.zones[i])
    }

    pub fn host(&self, id: &str) -> Option<&Host> {
        self.hosts.binary_search_by(|h| h.id.as_str().cmp(id)).ok().map(|i| &self.hosts[i])
    }

    fn idx(&self, id: &str) -> Result<usize, TopologyError> {
        self.index.get(id).copied().ok_or_else(|| TopologyError::UnknownZone(id.to_string()))
    }

    pub fn root(&self) -> &Zone {
        &self.zones[self.root]
    }

    pub fn layer_order(&self) -> &[String] {
        &self.layer_order
    }

    /// Tree depth of a layer (root layer = 0).
    pub fn layer_depth(&self, layer: &str) -> Option<usize> {
        let pos = self.layer_order.iter().position(|l| l == layer)?;
        Some(self.layer_order.len() - 1 - pos)
    }

    pub fn height(&self) -> usize {
        self.layer_order.len() - 1
    }

    pub fn depth(&self, zone: &str) -> Result<usize, TopologyError> {
        Ok(self.depth[self.idx(zone)?])
    }

    pub fn parent(&self, zone: &str) -> Result<Option<&Zone>, TopologyError> {
        let z = &self.zones[self.idx(zone)?];
        Ok(z.parent.as_deref().and_then(|p| self.zone(p)))
    }

    pub fn children(&self, zone: &str) -> Result<Vec<&Zone>, TopologyError> {
        Ok(self.children[self.idx(zone)?].iter().map(|&c| &self.zones[c]).collect())
    }

    /// The zone itself followed by its ancestors up to the root.
    pub fn ancestors_inclusive(&self, zone: &str) -> Result<Vec<&Zone>, TopologyError> {
        let mut out = vec![&self.zones[self.idx(zone)?]];
        while let Some(p) = out.last().and_then(|z| z.parent.as_deref()) {
            out.push(self.zone(p).expect("validated parent"));
        }
        Ok(out)
    }

    pub fn zones_in_layer<'a>(&'a self, layer: &'a str) -> impl Iterator<Item = &'a Zone> + 'a {
        self.zones.iter().filter(move |z| z.layer == layer)
    }

    /// Hosts of a zone, ordered by id.
    pub fn hosts_in<'a>(&'a self, zone: &'a str) -> impl Iterator<Item = &'a Host> + 'a {
        self.hosts.iter().filter(move |h| h.zone == zone)
    }

    /// All leaf locations.
    pub fn locations(&self) -> BTreeSet<String> {
        self.zones.iter().filter_map(|z| z.location.clone()).collect()
    }

    pub fn leaf_for_location(&self, location: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.location.as_deref() == Some(location))
    }

    /// Locations of the leaves under `zone` (the zone's own location for a leaf).
    pub fn coverage(&self, zone: &str) -> Result<BTreeSet<String>, TopologyError> {
        let mut out = BTreeSet::new();
        let mut stack = vec![self.idx(zone)?];
        while let Some(z) = stack.pop() {
            if let Some(l) = &self.zones[z].location {
                out.insert(l.clone());
            }
            stack.extend(&self.children[z]);
        }
        Ok(out)
    }

    /// Zone hops from `a` up to the lowest common ancestor and down to `b`.
    pub fn tree_path(&self, a: &str, b: &str) -> Result<Vec<String>, TopologyError> {
        let up_a: Vec<&str> = self.ancestors_inclusive(a)?.iter().map(|z| z.id.as_str()).collect();
        let up_b: Vec<&str> = self.ancestors_inclusive(b)?.iter().map(|z| z.id.as_str()).collect();
        let on_b: BTreeSet<&str> = up_b.iter().copied().collect();
        let lca_pos = up_a.iter().position(|z| on_b.contains(z)).expect("tree has a single root");
        let lca = up_a[lca_pos];
        let mut path: Vec<String> = up_a[..=lca_pos].iter().map(|s| s.to_string()).collect();
        let down = up_b.iter().position(|z| *z == lca).expect("lca is an ancestor of b");
        path.extend(up_b[..down].iter().rev().map(|s| s.to_string()));
        Ok(path)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
