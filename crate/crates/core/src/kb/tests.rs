use proptest::prelude::*;

use super::*;
use crate::case_study::{self, ANGLE, DISTANCE};

fn maxdis() -> GroundFluent {
    case_study::maxdis()
}

fn faulty() -> KnowledgeBase {
    let mut kb = case_study::engineered_kb();
    kb.set_initial(maxdis(), 27.0);
    kb
}

#[test]
fn temporary_value_is_effective_until_reverted() {
    let mut kb = faulty();
    kb.apply_temporary(&maxdis(), 26.0, None, 4).unwrap();
    assert_eq!(kb.get_effective_value(&maxdis(), None).unwrap(), 26.0);
    assert_eq!(kb.status(&maxdis(), None).unwrap(), RefinementStatus::Temporary);
    assert_eq!(kb.last_confirmed(&maxdis(), None).unwrap(), 27.0);
    assert!(kb.revert_to_confirmed(&maxdis(), None));
    assert_eq!(kb.get_effective_value(&maxdis(), None).unwrap(), 27.0);
    assert!(!kb.revert_to_confirmed(&maxdis(), None));
}

#[test]
fn second_temporary_replaces_the_first() {
    let mut kb = faulty();
    kb.apply_temporary(&maxdis(), 26.0, None, 1).unwrap();
    kb.apply_temporary(&maxdis(), 25.0, None, 2).unwrap();
    let e = kb.entry(&maxdis(), None).unwrap();
    assert_eq!(e.history().len(), 2);
    assert_eq!(e.effective(), 25.0);
    assert!(kb.check_invariants());
}

#[test]
fn confirmation_moves_the_revert_floor() {
    let mut kb = faulty();
    kb.apply_temporary(&maxdis(), 23.0, None, 1).unwrap();
    assert!(kb.confirm_top(&maxdis(), None).unwrap());
    assert_eq!(kb.last_confirmed(&maxdis(), None).unwrap(), 23.0);
    assert!(!kb.confirm_top(&maxdis(), None).unwrap());
    kb.apply_temporary(&maxdis(), 22.0, None, 2).unwrap();
    kb.revert_to_confirmed(&maxdis(), None);
    assert_eq!(kb.get_effective_value(&maxdis(), None).unwrap(), 23.0);
    assert_eq!(kb.temporaries().count(), 0);
}

#[test]
fn unknown_fluent_is_an_error() {
    let mut kb = faulty();
    let f: GroundFluent = "reach(grp)".parse().unwrap();
    assert!(matches!(kb.get_effective_value(&f, None), Err(KbError::UnknownFluent(_))));
    assert!(matches!(kb.apply_temporary(&f, 1.0, None, 0), Err(KbError::UnknownFluent(_))));
    assert!(matches!(kb.confirm_top(&f, None), Err(KbError::UnknownFluent(_))));
}

#[test]
fn bucketed_entries_fall_back_to_the_global_value() {
    let mut kb = case_study::engineered_kb();
    let minang = case_study::minhwangle();
    kb.apply_temporary(&minang, -12.0, Some(20), 1).unwrap();
    assert_eq!(kb.get_effective_value(&minang, Some(20)).unwrap(), -12.0);
    assert_eq!(kb.get_effective_value(&minang, Some(19)).unwrap(), -25.0);
    assert_eq!(kb.get_effective_value(&minang, None).unwrap(), -25.0);
    assert_eq!(kb.last_confirmed(&minang, Some(20)).unwrap(), -25.0);
    kb.revert_to_confirmed(&minang, Some(20));
    assert_eq!(kb.get_effective_value(&minang, Some(20)).unwrap(), -25.0);
}

#[test]
fn revert_all_clears_every_temporary() {
    let mut kb = faulty();
    kb.apply_temporary(&maxdis(), 26.0, None, 1).unwrap();
    kb.apply_temporary(&case_study::minhwangle(), -20.0, Some(18), 1).unwrap();
    let reverted = kb.revert_all();
    assert_eq!(reverted.len(), 2);
    assert_eq!(kb.temporaries().count(), 0);
}

#[test]
fn relationships_are_validated() {
    let mut kb = KnowledgeBase::new(3);
    let i = |n| AttrIndex::new(n).unwrap();
    assert!(matches!(
        kb.register_relationship(Relationship::slave_of(i(4), i(1))),
        Err(KbError::AttributeOutOfRange(4))
    ));
    let broken = Relationship { attribute: i(1), kind: RelationKind::Slave, master: None };
    assert!(matches!(kb.register_relationship(broken), Err(KbError::InvalidRelationship { .. })));
    kb.register_relationship(Relationship::slave_of(i(2), i(1))).unwrap();
    kb.register_relationship(Relationship::slave_of(i(3), i(2))).unwrap();
    assert!(matches!(kb.register_relationship(Relationship::slave_of(i(1), i(3))), Err(KbError::Cycle(1))));
    assert!(matches!(kb.register_relationship(Relationship::slave_of(i(1), i(1))), Err(KbError::Cycle(1))));
    assert!(kb.is_master(i(1)) && kb.is_master(i(2)) && !kb.is_master(i(3)));
    assert_eq!(kb.master_of(i(3)), Some(i(2)));
}

#[test]
fn case_study_kb_relates_angle_to_distance() {
    let kb = case_study::engineered_kb();
    assert_eq!(kb.master_of(ANGLE), Some(DISTANCE));
    assert_eq!(kb.relationship(DISTANCE).unwrap().kind, RelationKind::Independent);
}

#[test]
fn lifecycle_moves() {
    use RefinementStatus::*;
    assert!(Confirmed.can_become(Temporary));
    assert!(Temporary.can_become(Rejected));
    assert!(!Confirmed.can_become(Rejected));
    assert!(!Rejected.can_become(Temporary));
}

#[test]
fn persistence_round_trips_through_a_directory() {
    let mut kb = faulty();
    kb.apply_temporary(&maxdis(), 25.0, None, 3).unwrap();
    kb.apply_temporary(&case_study::minhwangle(), -13.0, Some(20), 5).unwrap();
    kb.confirm_top(&case_study::minhwangle(), Some(20)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    kb.save(dir.path()).unwrap();
    let back = KnowledgeBase::load(dir.path(), 2).unwrap();
    assert_eq!(back, kb);
    assert_eq!(back.snapshot_hash(), kb.snapshot_hash());
}

#[test]
fn hash_tracks_content() {
    let a = faulty();
    let mut b = faulty();
    assert_eq!(a.snapshot_hash(), b.snapshot_hash());
    assert_eq!(a.snapshot_hash().len(), 16);
    b.apply_temporary(&maxdis(), 26.0, None, 1).unwrap();
    assert_ne!(a.snapshot_hash(), b.snapshot_hash());
}

#[test]
fn corrupt_files_are_rejected_with_a_line() {
    let rel = case_study::engineered_kb().relationships_csv();
    let top_first = "fluent,condition_bucket,value,status,stamp\nmaxdis(grp),,23,temporary,0\n";
    assert!(matches!(KnowledgeBase::from_csv(top_first, &rel, 2), Err(KbError::Malformed { line: 2, .. })));
    let bad_status =
        "fluent,condition_bucket,value,status,stamp\nmaxdis(grp),,23,confirmed,0\nmaxdis(grp),,22,maybe,1\n";
    assert!(matches!(KnowledgeBase::from_csv(bad_status, &rel, 2), Err(KbError::Malformed { line: 3, .. })));
    let bad_number = "fluent,condition_bucket,value,status,stamp\nmaxdis(grp),,abc,confirmed,0\n";
    assert!(matches!(KnowledgeBase::from_csv(bad_number, &rel, 2), Err(KbError::Malformed { .. })));
}

#[derive(Debug, Clone)]
enum Op {
    Apply(usize, Option<i64>, i32),
    Confirm(usize, Option<i64>),
    Revert(usize, Option<i64>),
    RevertAll,
}

fn arb_op() -> impl Strategy<Value = Op> {
    let cond = prop_oneof![Just(None), (17i64..21).prop_map(Some)];
    prop_oneof![
        (0usize..4, cond.clone(), -40i32..40).prop_map(|(f, c, v)| Op::Apply(f, c, v)),
        (0usize..4, cond.clone()).prop_map(|(f, c)| Op::Confirm(f, c)),
        (0usize..4, cond).prop_map(|(f, c)| Op::Revert(f, c)),
        Just(Op::RevertAll),
    ]
}

fn fluent(i: usize) -> GroundFluent {
    case_study::ENGINEERED[i].0.parse().unwrap()
}

proptest! {
    #[test]
    fn invariants_survive_any_operation_sequence(ops in prop::collection::vec(arb_op(), 0..60)) {
        let mut kb = case_study::engineered_kb();
        for (stamp, op) in ops.into_iter().enumerate() {
            let before = kb.clone();
            match op {
                Op::Apply(f, c, v) => {
                    kb.apply_temporary(&fluent(f), v as f64, c, stamp as u64).unwrap();
                    prop_assert_eq!(kb.get_effective_value(&fluent(f), c).unwrap(), v as f64);
                    prop_assert!(kb.entry(&fluent(f), c).unwrap().is_temporary());
                }
                Op::Confirm(f, c) => {
                    let had = kb.entry(&fluent(f), c).is_some_and(KbEntry::is_temporary);
                    match kb.confirm_top(&fluent(f), c) {
                        Ok(changed) => prop_assert_eq!(changed, had),
                        Err(_) => prop_assert!(c.is_some() && before.entry(&fluent(f), c).is_none()),
                    }
                    if had {
                        prop_assert_eq!(kb.last_confirmed(&fluent(f), c).unwrap(), before.get_effective_value(&fluent(f), c).unwrap());
                    }
                }
                Op::Revert(f, c) => {
                    kb.revert_to_confirmed(&fluent(f), c);
                    let e = kb.get_effective_value(&fluent(f), c).unwrap();
                    let expected = match before.entry(&fluent(f), c) {
                        Some(entry) => entry.last_confirmed(),
                        None => before.get_effective_value(&fluent(f), c).unwrap(),
                    };
                    prop_assert_eq!(e, expected);
                }
                Op::RevertAll => {
                    kb.revert_all();
                    prop_assert_eq!(kb.temporaries().count(), 0);
                }
            }
            prop_assert!(kb.check_invariants());
            prop_assert!(kb.entries().all(|e| e.history().len() <= before.entry(e.fluent(), e.condition()).map_or(2, |b| b.history().len() + 1)));
        }
        let back = KnowledgeBase::from_csv(&kb.fluents_csv(), &kb.relationships_csv(), 2).unwrap();
        prop_assert_eq!(back, kb);
    }
}
