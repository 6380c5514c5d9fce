//! Ground actions, states, and precondition evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::*;

/// A world state: true facts plus numeric fluent values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct State {
    pub facts: BTreeSet<Atom>,
    pub fluents: BTreeMap<GroundFluent, f64>,
}

impl State {
    pub fn initial(p: &ProblemInstance) -> Self {
        State { facts: p.init_facts.iter().cloned().collect(), fluents: p.fluents() }
    }

    pub fn fluent(&self, key: &GroundFluent) -> Result<f64, EvalError> {
        self.fluents.get(key).copied().ok_or_else(|| EvalError::UnresolvedFluent(key.to_string()))
    }

    pub fn satisfies(&self, goal: &[Literal]) -> bool {
        goal.iter().all(|l| self.facts.contains(&l.atom) == l.positive)
    }

    /// Delete effects are applied before add effects.
    pub fn apply(&self, a: &GroundAction) -> State {
        let mut next = self.clone();
        for d in &a.delete {
            next.facts.remove(d);
        }
        for ad in &a.add {
            next.facts.insert(ad.clone());
        }
        next
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("fluent {0} has no value in the state")]
    UnresolvedFluent(String),
}

/// An action schema with all parameters bound to objects.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundAction {
    pub schema: String,
    pub bindings: Vec<String>,
    pub precondition: Vec<Condition>,
    pub add: Vec<Atom>,
    pub delete: Vec<Atom>,
}

impl GroundAction {
    /// Binds `schema` parameters positionally to `objects`.
    pub fn bind(schema: &ActionSchema, objects: &[String]) -> GroundAction {
        assert_eq!(schema.parameters.len(), objects.len(), "binding arity for {}", schema.name);
        let sub: BTreeMap<&str, &str> =
            schema.parameters.iter().map(|p| p.name.as_str()).zip(objects.iter().map(String::as_str)).collect();
        let map_args = |args: &[String]| -> Vec<String> {
            args.iter().map(|a| sub.get(a.as_str()).map(|s| s.to_string()).unwrap_or_else(|| a.clone())).collect()
        };
        let atom = |a: &Atom| Atom { predicate: a.predicate.clone(), args: map_args(&a.args) };
        let term = |t: &FunctionTerm| FunctionTerm { name: t.name.clone(), args: map_args(&t.args) };
        let precondition = schema
            .precondition
            .iter()
            .map(|c| match c {
                Condition::Literal(l) => Condition::Literal(Literal { positive: l.positive, atom: atom(&l.atom) }),
                Condition::Compare(cmp) => {
                    Condition::Compare(NumericComparison { op: cmp.op, lhs: term(&cmp.lhs), rhs: term(&cmp.rhs) })
                }
            })
            .collect();
        GroundAction {
            schema: schema.name.clone(),
            bindings: objects.to_vec(),
            precondition,
            add: schema.effect.iter().filter(|l| l.positive).map(|l| atom(&l.atom)).collect(),
            delete: schema.effect.iter().filter(|l| !l.positive).map(|l| atom(&l.atom)).collect(),
        }
    }

    pub fn comparisons(&self) -> impl Iterator<Item = &NumericComparison> {
        self.precondition.iter().filter_map(|c| match c {
            Condition::Compare(cmp) => Some(cmp),
            Condition::Literal(_) => None,
        })
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.precondition.iter().filter_map(|c| match c {
            Condition::Literal(l) => Some(l),
            Condition::Compare(_) => None,
        })
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.schema)?;
        for b in &self.bindings {
            write!(f, " {b}")?;
        }
        f.write_str(")")
    }
}

pub fn evaluate_comparison(s: &State, c: &NumericComparison) -> Result<bool, EvalError> {
    let lhs = s.fluent(&c.lhs.ground_key())?;
    let rhs = s.fluent(&c.rhs.ground_key())?;
    Ok(c.op.holds(lhs, rhs))
}

/// True iff every conjunct of the ground precondition holds in `s`.
///
/// All comparisons are resolved before literals are checked, so a missing
/// fluent is reported even when a literal already fails.
pub fn evaluate_precondition(s: &State, a: &GroundAction) -> Result<bool, EvalError> {
    let mut ok = true;
    for cmp in a.comparisons() {
        ok &= evaluate_comparison(s, cmp)?;
    }
    Ok(ok && a.literals().all(|l| s.facts.contains(&l.atom) == l.positive))
}
