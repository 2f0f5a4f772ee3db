//! Registered operator functions.
//!
//! Graphs refer to functions by identifier so they stay serializable. Each
//! identifier resolves to a variant here; unknown identifiers are rejected
//! while the graph is built.

use crate::value::{DataItem, Datum, Key};

/// Number of iterations of `n -> n/2` (even) / `n -> 3n+1` (odd) until `n == 1`.
///
/// Returns `None` for `n == 0`, which never converges.
pub fn collatz_steps(n: u64) -> Option<u32> {
    if n == 0 {
        return None;
    }
    let mut n = n;
    let mut steps = 0;
    while n != 1 {
        n = if n.is_multiple_of(2) { n / 2 } else { 3 * n + 1 };
        steps += 1;
    }
    Some(steps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapFn {
    Identity,
    /// `collatz_steps(round(value) + 1)`; reports the step count as work.
    Collatz,
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterFn {
    KeepAll,
    KeepMult3,
    KeepEven,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlatMapFn {
    SplitWords,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyFn {
    /// Keeps the key assigned by the source (machine key).
    Machine,
    /// Uses the text of the value as key.
    Word,
    /// Uses the integer value as key.
    Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregateFn {
    Count,
    Sum,
    Mean,
    Min,
    Max,
}

impl MapFn {
    pub fn lookup(id: &str) -> Option<Self> {
        Some(match id {
            "identity" => MapFn::Identity,
            "collatz" => MapFn::Collatz,
            "double" => MapFn::Double,
            _ => return None,
        })
    }

    /// Returns the mapped item and the units of work spent on it.
    pub fn apply(self, item: DataItem) -> (DataItem, u64) {
        match self {
            MapFn::Identity => (item, 0),
            MapFn::Double => {
                let value = match item.value {
                    Datum::Int(v) => Datum::Int(v.wrapping_mul(2)),
                    Datum::Float(v) => Datum::Float(v * 2.0),
                    Datum::Text(s) => Datum::Text(s.repeat(2)),
                };
                (DataItem { value, ..item }, 0)
            }
            MapFn::Collatz => {
                let x = item.value.as_f64().unwrap_or(0.0).round().max(0.0) as u64;
                let steps = collatz_steps(x.saturating_add(1)).unwrap_or(0);
                (DataItem { value: Datum::Int(i64::from(steps)), ..item }, u64::from(steps))
            }
        }
    }
}

impl FilterFn {
    pub fn lookup(id: &str) -> Option<Self> {
        Some(match id {
            "keep_all" => FilterFn::KeepAll,
            "keep_mult3" => FilterFn::KeepMult3,
            "keep_even" => FilterFn::KeepEven,
            _ => return None,
        })
    }

    pub fn keep(self, item: &DataItem) -> bool {
        let int = match item.value {
            Datum::Int(v) => Some(v),
            _ => None,
        };
        match self {
            FilterFn::KeepAll => true,
            FilterFn::KeepMult3 => int.is_some_and(|v| v.rem_euclid(3) == 0),
            FilterFn::KeepEven => int.is_some_and(|v| v.rem_euclid(2) == 0),
        }
    }
}

impl FlatMapFn {
    pub fn lookup(id: &str) -> Option<Self> {
        Some(match id {
            "split_words" => FlatMapFn::SplitWords,
            "identity" => FlatMapFn::Identity,
            _ => return None,
        })
    }

    pub fn apply(self, item: DataItem) -> Vec<DataItem> {
        match self {
            FlatMapFn::Identity => vec![item],
            FlatMapFn::SplitWords => match &item.value {
                Datum::Text(s) => s
                    .split_whitespace()
                    .map(|w| DataItem { key: item.key.clone(), value: Datum::Text(w.to_string()), origin: item.origin })
                    .collect(),
                _ => vec![item],
            },
        }
    }
}

impl KeyFn {
    pub fn lookup(id: &str) -> Option<Self> {
        Some(match id {
            "machine" => KeyFn::Machine,
            "word" => KeyFn::Word,
            "value" => KeyFn::Value,
            _ => return None,
        })
    }

    pub fn apply(self, item: DataItem) -> DataItem {
        let key = match (self, &item.value) {
            (KeyFn::Machine, _) => item.key.clone(),
            (KeyFn::Word, Datum::Text(s)) => Key::Text(s.clone()),
            (KeyFn::Word, other) => Key::Text(other.to_string()),
            (KeyFn::Value, Datum::Int(v)) => Key::Int(*v as u64),
            (KeyFn::Value, other) => Key::Text(other.to_string()),
        };
        DataItem { key, ..item }
    }
}

impl AggregateFn {
    pub fn lookup(id: &str) -> Option<Self> {
        Some(match id {
            "count" => AggregateFn::Count,
            "sum" => AggregateFn::Sum,
            "mean" => AggregateFn::Mean,
            "min" => AggregateFn::Min,
            "max" => AggregateFn::Max,
            _ => return None,
        })
    }
}

/// Running state of one key's open window.
#[derive(Clone, Debug, Default)]
pub struct Accumulator {
    pub count: u64,
    int_sum: i128,
    float_sum: f64,
    saw_float: bool,
    min: Option<f64>,
    max: Option<f64>,
    min_int: Option<i64>,
    max_int: Option<i64>,
}

impl Accumulator {
    pub fn push(&mut self, value: &Datum) {
        self.count += 1;
        match value {
            Datum::Int(v) => {
                self.int_sum += i128::from(*v);
                self.min_int = Some(self.min_int.map_or(*v, |m| m.min(*v)));
                self.max_int = Some(self.max_int.map_or(*v, |m| m.max(*v)));
            }
            Datum::Float(v) => {
                self.saw_float = true;
                self.float_sum += v;
                self.min = Some(self.min.map_or(*v, |m| m.min(*v)));
                self.max = Some(self.max.map_or(*v, |m| m.max(*v)));
            }
            Datum::Text(_) => {}
        }
    }

    pub fn finish(&self, agg: AggregateFn) -> Datum {
        let total = || {
            if self.saw_float {
                Datum::Float(self.float_sum + self.int_sum as f64)
            } else {
                Datum::Int(self.int_sum as i64)
            }
        };
        match agg {
            AggregateFn::Count => Datum::Int(self.count as i64),
            AggregateFn::Sum => total(),
            AggregateFn::Mean => {
                let sum = if self.saw_float { self.float_sum + self.int_sum as f64 } else { self.int_sum as f64 };
                Datum::Float(sum / self.count.max(1) as f64)
            }
            AggregateFn::Min if !self.saw_float => Datum::Int(self.min_int.unwrap_or(0)),
            AggregateFn::Max if !self.saw_float => Datum::Int(self.max_int.unwrap_or(0)),
            AggregateFn::Min => Datum::Float(fold_opt(self.min, self.min_int.map(|v| v as f64), f64::min)),
            AggregateFn::Max => Datum::Float(fold_opt(self.max, self.max_int.map(|v| v as f64), f64::max)),
        }
    }
}

fn fold_opt(a: Option<f64>, b: Option<f64>, f: fn(f64, f64) -> f64) -> f64 {
    match (a, b) {
        (Some(x), Some(y)) => f(x, y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_collatz(mut n: u64) -> u32 {
        let mut trail = vec![n];
        while n != 1 {
            n = if n.is_multiple_of(2) { n / 2 } else { 3 * n + 1 };
            trail.push(n);
        }
        trail.len() as u32 - 1
    }

    #[test]
    fn collatz_known_values() {
        assert_eq!(collatz_steps(1), Some(0));
        assert_eq!(collatz_steps(6), Some(8));
        assert_eq!(collatz_steps(27), Some(111));
        assert_eq!(collatz_steps(0), None);
        for n in 1..2000 {
            assert_eq!(collatz_steps(n), Some(brute_collatz(n)));
        }
    }

    #[test]
    fn mean_of_window() {
        let mut acc = Accumulator::default();
        for v in [2, 4, 6] {
            acc.push(&Datum::Int(v));
        }
        assert_eq!(acc.finish(AggregateFn::Mean), Datum::Float(4.0));
        assert_eq!(acc.finish(AggregateFn::Count), Datum::Int(3));
        assert_eq!(acc.finish(AggregateFn::Sum), Datum::Int(12));
        assert_eq!(acc.finish(AggregateFn::Min), Datum::Int(2));
        assert_eq!(acc.finish(AggregateFn::Max), Datum::Int(6));
    }

    #[test]
    fn split_words() {
        let item = DataItem { key: Key::Int(0), value: Datum::Text("a b".into()), origin: 0 };
        let out = FlatMapFn::SplitWords.apply(item);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].value, Datum::Text("b".into()));
    }

    #[test]
    fn mult3_filter() {
        let item = |v| DataItem { key: Key::Int(0), value: Datum::Int(v), origin: 0 };
        let kept = (1..=300).filter(|v| FilterFn::KeepMult3.keep(&item(*v))).count();
        assert_eq!(kept, 100);
    }
}
