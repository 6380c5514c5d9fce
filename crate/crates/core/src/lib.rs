//! Experience-based refinement of numeric planning knowledge.
//!
//! A robot plans grips from a PDDL domain whose numeric bounds live in a
//! knowledge base. When an execution fails, the reasoner compares the
//! observed attribute values with past successes, picks the anomalous one,
//! and tightens the offending bound one learning step at a time.

pub mod adkra;
pub mod case_study;
pub mod harness;
pub mod kb;
pub mod pddl;
pub mod planner;
pub mod schema;
pub mod sim;
pub mod store;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/pddl.md")]
    mod pddl {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/knowledge.md")]
    mod knowledge {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
