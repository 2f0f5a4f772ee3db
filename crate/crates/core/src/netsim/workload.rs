use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::SourceSpec;
use crate::value::{fnv1a64, location_code, DataItem, Datum, Key};

/// Machines reporting at each location; keys cycle over them.
pub const MACHINES_PER_LOCATION: u64 = 16;

fn machine_key(location: &str, machine: u64) -> Key {
    Key::Int(u64::from(location_code(location)) << 32 | machine)
}

/// Items produced by the `continuum_gen` generator at one location: keys
/// cycle over the location's machines, values are uniform in `[1, 10^6]`.
pub fn workload(location: &str, events: u64, seed: u64) -> Vec<DataItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(location.as_bytes()));
    let origin = location_code(location);
    (0..events)
        .map(|i| DataItem {
            key: machine_key(location, i % MACHINES_PER_LOCATION),
            value: Datum::Int(rng.random_range(1..=1_000_000)),
            origin,
        })
        .collect()
}

/// Items a source emits when bound to `location`. Literal items are keyed by
/// their position in the list.
pub fn source_items(spec: &SourceSpec, location: &str, events: u64, seed: u64) -> Vec<DataItem> {
    match spec {
        SourceSpec::Generator { .. } => workload(location, events, seed),
        SourceSpec::Literal { items, .. } => {
            let origin = location_code(location);
            items
                .iter()
                .enumerate()
                .map(|(i, v)| DataItem { key: machine_key(location, i as u64), value: v.clone(), origin })
                .collect()
        }
    }
}
