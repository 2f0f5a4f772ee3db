use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::LogicalOperator;

/// Compute cost of one item: `fixed_us + per_work_us * work`, where `work` is
/// reported by the operator's function (Collatz steps for `collatz`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorCost {
    pub fixed_us: f64,
    #[serde(default)]
    pub per_work_us: f64,
}

impl OperatorCost {
    pub const fn flat(us: f64) -> Self {
        OperatorCost { fixed_us: us, per_work_us: 0.0 }
    }
}

/// Simulator compute and message-size parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModel {
    /// Bytes per item on the wire.
    pub item_bytes: u64,
    /// Bytes of framing per message.
    pub header_bytes: u64,
    /// Items per cross-host message.
    pub batch_items: u64,
    /// Time a source spends emitting one item.
    pub source_us: f64,
    /// Cost of operators not listed in `operators`.
    pub default_us: f64,
    /// Per-operator costs keyed by operator name (or `kind#id` label).
    pub operators: BTreeMap<String, OperatorCost>,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            item_bytes: 64,
            header_bytes: 32,
            batch_items: 128,
            source_us: 0.0,
            default_us: 0.0,
            operators: BTreeMap::from([
                ("O1".to_string(), OperatorCost::flat(1.0)),
                ("O2".to_string(), OperatorCost::flat(2.0)),
                ("O3".to_string(), OperatorCost { fixed_us: 10.0, per_work_us: 0.5 }),
            ]),
        }
    }
}

impl CostModel {
    pub fn from_json(doc: &str) -> Result<Self, String> {
        let model: CostModel = serde_json::from_str(doc).map_err(|e| e.to_string())?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.batch_items == 0 {
            return Err("batch_items must be at least 1".into());
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.source_us) || !ok(self.default_us) {
            return Err("costs must be finite and non-negative".into());
        }
        for (name, c) in &self.operators {
            if !ok(c.fixed_us) || !ok(c.per_work_us) {
                return Err(format!("cost of `{name}` must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn cost_of(&self, op: &LogicalOperator) -> OperatorCost {
        let by_name = op.name.as_ref().and_then(|n| self.operators.get(n));
        by_name
            .or_else(|| self.operators.get(&op.label()))
            .copied()
            .unwrap_or(OperatorCost::flat(self.default_us))
    }

    pub fn message_bytes(&self, items: usize) -> u64 {
        self.header_bytes + self.item_bytes * items as u64
    }
}

/// Microseconds of work on a host of the given speed, in nanoseconds.
pub(crate) fn compute_ns(cost: OperatorCost, work: u64, speed: f64) -> u64 {
    let us = cost.fixed_us + cost.per_work_us * work as f64;
    (us * 1_000.0 / speed).round() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn defaults_resolve_by_name() {
        let g = bundled::continuum_v1(10).unwrap();
        let m = CostModel::default();
        assert_eq!(m.cost_of(g.operator(1)), OperatorCost::flat(1.0));
        assert_eq!(m.cost_of(g.operator(4)).per_work_us, 0.5);
        assert_eq!(m.cost_of(g.operator(2)), OperatorCost::flat(0.0));
    }

    #[test]
    fn o3_cost_in_ns() {
        let c = OperatorCost { fixed_us: 10.0, per_work_us: 0.5 };
        assert_eq!(compute_ns(c, 111, 1.0), 65_500);
        assert_eq!(compute_ns(c, 111, 2.0), 32_750);
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let m = CostModel::from_json(r#"{"batch_items": 16, "operators": {"O1": {"fixed_us": 3}}}"#).unwrap();
        assert_eq!(m.batch_items, 16);
        assert_eq!(m.item_bytes, 64);
        assert_eq!(m.operators.len(), 1);
        assert!(CostModel::from_json(r#"{"batch_items": 0}"#).is_err());
        assert!(CostModel::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
