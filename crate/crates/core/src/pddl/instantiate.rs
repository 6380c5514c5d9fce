use crate::case_study::{GRIPPER, ROBOT, THING};
use crate::kb::KnowledgeBase;
use crate::schema::AttributeSchema;
use crate::sim::Scenario;

use super::ast::{Atom, FluentAssignment, FunctionTerm, Literal, ProblemInstance, TypedParam};

#[derive(Debug, thiserror::Error)]
pub enum InstantiateError {
    #[error("knowledge base has no value for {0}")]
    MissingKbFluent(String),
}

/// Builds the gripping problem for `scenario`.
///
/// Every fluent bounding a schema attribute is read from the knowledge base
/// at its current effective value. Bounds of a slave attribute are looked up
/// in the bucket of the master attribute's scenario value, falling back to
/// the unconditional entry. Geometry (`dist_to` for every ordered waypoint
/// pair) and `hwangle` come from the scenario.
pub fn instantiate_problem(
    kb: &KnowledgeBase,
    schema: &AttributeSchema,
    scenario: &Scenario,
) -> Result<ProblemInstance, InstantiateError> {
    let truth = scenario.attribute_values();
    let mut init_fluents = Vec::new();
    for attr in schema.iter() {
        let condition = kb.master_of(attr.index).and_then(|m| {
            let master = schema.get(m)?;
            Some(master.bucket(truth[m.slot()]))
        });
        for fluent in [&attr.lower_fluent, &attr.upper_fluent].into_iter().flatten() {
            let value = kb
                .get_effective_value(fluent, condition)
                .map_err(|_| InstantiateError::MissingKbFluent(fluent.to_string()))?;
            init_fluents.push(FluentAssignment { term: FunctionTerm::new(fluent.name(), fluent.args()), value });
        }
    }
    for a in scenario.waypoints.keys() {
        for b in scenario.waypoints.keys() {
            let d = scenario.distance_between(a, b).expect("known waypoints");
            init_fluents.push(FluentAssignment { term: FunctionTerm::new("dist_to", [a, b]), value: d });
        }
    }
    init_fluents.push(FluentAssignment { term: FunctionTerm::new("hwangle", [ROBOT]), value: scenario.true_angle });

    let mut objects =
        vec![TypedParam::new(ROBOT, "robot"), TypedParam::new(THING, "thing"), TypedParam::new(GRIPPER, "gripper")];
    objects.extend(scenario.waypoints.keys().map(|w| TypedParam::new(w, "waypoint")));

    Ok(ProblemInstance {
        name: format!("grip{}", scenario.id),
        domain_name: "nao".into(),
        objects,
        init_facts: vec![
            Atom::new("atrobby", [ROBOT, scenario.robot_start.as_str()]),
            Atom::new("pos", [THING, scenario.cup_waypoint.as_str()]),
            Atom::new("free", [ROBOT, GRIPPER]),
        ],
        init_fluents,
        goal: vec![Literal::pos(Atom::new("carry", [ROBOT, THING, GRIPPER]))],
    })
}
