//! Capability requirements: conjunctions of attribute predicates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
}

impl Relation {
    pub fn is_ordering(self) -> bool {
        matches!(self, Relation::Ge | Relation::Le | Relation::Gt | Relation::Lt)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Ne => "!=",
            Relation::Ge => ">=",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Lt => "<",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub attribute: String,
    pub relation: Relation,
    pub value: Value,
}

impl Predicate {
    pub fn new(attribute: impl Into<String>, relation: Relation, value: Value) -> Result<Self, GraphError> {
        let attribute = attribute.into();
        if !is_identifier(&attribute) {
            return Err(GraphError::MalformedPredicate(format!("bad attribute name {attribute:?}")));
        }
        if relation.is_ordering() && value.as_int().is_none() {
            return Err(GraphError::MalformedPredicate(format!(
                "{attribute} {} {value}: ordering relations need an integer",
                relation.symbol()
            )));
        }
        Ok(Predicate { attribute, relation, value })
    }

    /// Evaluates against a stored capability value. Absent attributes are
    /// handled by the caller; ordering against a non-integer is false.
    pub fn holds_for(&self, stored: &Value) -> bool {
        match self.relation {
            Relation::Eq => stored == &self.value,
            Relation::Ne => stored != &self.value,
            ord => match (stored.as_int(), self.value.as_int()) {
                (Some(have), Some(want)) => match ord {
                    Relation::Ge => have >= want,
                    Relation::Le => have <= want,
                    Relation::Gt => have > want,
                    Relation::Lt => have < want,
                    Relation::Eq | Relation::Ne => unreachable!(),
                },
                _ => false,
            },
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.attribute, self.relation.symbol(), self.value)
    }
}

/// Conjunction of predicates. The empty conjunction always holds.
///
/// Text form: `n_cpu >= 4 && gpu = yes`. Serialized as that string.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConstraintExpr {
    pub predicates: Vec<Predicate>,
}

impl ConstraintExpr {
    pub fn always() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn and(mut self, other: ConstraintExpr) -> Self {
        self.predicates.extend(other.predicates);
        self
    }

    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Self::always());
        }
        let predicates = text.split("&&").map(parse_predicate).collect::<Result<_, _>>()?;
        Ok(ConstraintExpr { predicates })
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_predicate(text: &str) -> Result<Predicate, GraphError> {
    let text = text.trim();
    // two-character operators first so `>=` is not read as `>`
    const OPS: [(&str, Relation); 7] = [
        (">=", Relation::Ge),
        ("<=", Relation::Le),
        ("!=", Relation::Ne),
        ("==", Relation::Eq),
        ("=", Relation::Eq),
        (">", Relation::Gt),
        ("<", Relation::Lt),
    ];
    let (pos, sym, relation) = OPS
        .iter()
        .filter_map(|(sym, rel)| text.find(sym).map(|p| (p, *sym, *rel)))
        .min_by_key(|(p, sym, _)| (*p, std::cmp::Reverse(sym.len())))
        .ok_or_else(|| GraphError::MalformedPredicate(format!("no relation in {text:?}")))?;
    let attribute = text[..pos].trim();
    let literal = text[pos + sym.len()..].trim();
    if literal.is_empty() || literal.contains(['=', '<', '>', '!']) {
        return Err(GraphError::MalformedPredicate(format!("bad value in {text:?}")));
    }
    Predicate::new(attribute, relation, Value::from_literal(literal))
}

impl FromStr for ConstraintExpr {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for ConstraintExpr {
    type Error = GraphError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<ConstraintExpr> for String {
    fn from(c: ConstraintExpr) -> String {
        c.to_string()
    }
}

impl fmt::Display for ConstraintExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cpu_and_gpu() {
        let c = ConstraintExpr::parse("n_cpu>=4 && gpu=yes").unwrap();
        assert_eq!(c.predicates.len(), 2);
        assert_eq!(c.predicates[0], Predicate::new("n_cpu", Relation::Ge, Value::Int(4)).unwrap());
        assert_eq!(c.predicates[1].value, Value::Bool(true));
        assert_eq!(c.to_string(), "n_cpu >= 4 && gpu = yes");
        assert_eq!(ConstraintExpr::parse(&c.to_string()).unwrap(), c);
    }

    #[test]
    fn empty_is_always() {
        assert!(ConstraintExpr::parse("  ").unwrap().is_empty());
    }

    #[test]
    fn conjunction_composes() {
        let c = ConstraintExpr::parse("a=1").unwrap().and(ConstraintExpr::parse("b=2").unwrap());
        assert_eq!(c.to_string(), "a = 1 && b = 2");
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["gpu", "gpu >= yes", "=3", "a = ", "a >= 4 &&", "a => 4", "1a = 2"] {
            assert!(ConstraintExpr::parse(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn other_relations() {
        let c = ConstraintExpr::parse("arch != arm && mem_gb < 64 && disk > 1 && x <= 0 && y == z").unwrap();
        let rels: Vec<_> = c.predicates.iter().map(|p| p.relation).collect();
        assert_eq!(rels, [Relation::Ne, Relation::Lt, Relation::Gt, Relation::Le, Relation::Eq]);
    }

    #[test]
    fn ordering_against_non_integer_is_false() {
        let p = Predicate::new("n_cpu", Relation::Ge, Value::Int(4)).unwrap();
        assert!(!p.holds_for(&Value::Str("many".into())));
        assert!(p.holds_for(&Value::Int(4)));
    }
}
