//! A PDDL 2.1 subset with numeric fluents: reading, canonical printing,
//! grounding, and precondition evaluation.

mod ast;
mod eval;
mod instantiate;
mod parse;
mod print;
mod sexpr;

pub use ast::*;
pub use eval::{evaluate_comparison, evaluate_precondition, EvalError, GroundAction, State};
pub use instantiate::{instantiate_problem, InstantiateError};
pub(crate) use parse::cartesian;
pub use parse::{parse_domain, parse_problem};
pub use print::{print_domain, print_problem};
pub use sexpr::Pos;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SemanticError {
    #[error("undeclared type '{0}'")]
    UndeclaredType(String),
    #[error("undeclared predicate '{0}'")]
    UndeclaredPredicate(String),
    #[error("undeclared function '{0}'")]
    UndeclaredFunction(String),
    #[error("undeclared variable '{0}'")]
    UndeclaredVariable(String),
    #[error("undeclared object '{0}'")]
    UndeclaredObject(String),
    #[error("duplicate {category} '{name}'")]
    Duplicate { category: &'static str, name: String },
    #[error("'{name}' takes {expected} argument(s), found {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("'{term}' has type '{found}', expected '{expected}'")]
    TypeMismatch { term: String, expected: String, found: String },
    #[error("problem is for domain '{found}', expected '{expected}'")]
    DomainMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: expected {expected}, found {found}")]
    Syntax { pos: Pos, expected: String, found: String },
    #[error("semantic error at {pos}: {error}")]
    Semantic { pos: Pos, error: SemanticError },
    #[error("unsupported construct at {pos}: {construct}")]
    Unsupported { pos: Pos, construct: String },
    #[error("fluent unassigned: {fluent} has no value in :init")]
    FluentUnassigned { fluent: String },
}

/// The gripping domain of the kitchen case study.
pub const NAO_DOMAIN: &str = include_str!("../../data/nao_domain.pddl");
