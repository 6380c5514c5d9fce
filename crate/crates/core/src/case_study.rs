//! The kitchen gripping case study: the `grip` attribute schema and the
//! engineered knowledge base the experiments start from.

use crate::kb::{KnowledgeBase, Relationship};
use crate::pddl::{parse_domain, DomainModel, GroundFluent, NAO_DOMAIN};
use crate::schema::{AttrIndex, Attribute, AttributeSchema};

pub const ROBOT: &str = "nao";
pub const THING: &str = "redcup";
pub const GRIPPER: &str = "grp";

pub const DISTANCE: AttrIndex = match AttrIndex::new(1) {
    Some(i) => i,
    None => unreachable!(),
};
pub const ANGLE: AttrIndex = match AttrIndex::new(2) {
    Some(i) => i,
    None => unreachable!(),
};

pub fn mindis() -> GroundFluent {
    GroundFluent::new("mindis", [GRIPPER])
}

pub fn maxdis() -> GroundFluent {
    GroundFluent::new("maxdis", [GRIPPER])
}

pub fn minhwangle() -> GroundFluent {
    GroundFluent::new("minhwangle", [ROBOT])
}

pub fn maxhwangle() -> GroundFluent {
    GroundFluent::new("maxhwangle", [ROBOT])
}

/// Engineered bounds: 15 < distance < 23 (cm), -25 < head yaw < 0 (deg).
pub const ENGINEERED: [(&str, f64); 4] =
    [("mindis(grp)", 15.0), ("maxdis(grp)", 23.0), ("minhwangle(nao)", -25.0), ("maxhwangle(nao)", 0.0)];

pub fn domain() -> DomainModel {
    parse_domain(NAO_DOMAIN).expect("bundled domain parses")
}

/// Distance (cm) and head-yaw angle (deg), both at 1-unit resolution and
/// learning rate 1.
pub fn grip_schema() -> AttributeSchema {
    AttributeSchema::new(vec![
        Attribute::new("distance", "cm").with_bounds(Some(mindis()), Some(maxdis())),
        Attribute::new("angle", "deg").with_bounds(Some(minhwangle()), Some(maxhwangle())),
    ])
    .expect("valid schema")
}

/// The engineered knowledge base with the angle registered as a slave of
/// the distance.
pub fn engineered_kb() -> KnowledgeBase {
    let mut kb = KnowledgeBase::new(2);
    for (f, v) in ENGINEERED {
        kb.set_initial(f.parse().expect("valid fluent"), v);
    }
    kb.register_relationship(Relationship::independent(DISTANCE)).expect("valid");
    kb.register_relationship(Relationship::slave_of(ANGLE, DISTANCE)).expect("valid");
    kb
}
