use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::case_study;
use crate::pddl::instantiate_problem;
use crate::planner::{find_plan, parse_plan, PlannerConfig};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn coupled_envelope_interpolates_and_extrapolates() {
    let e = GroundTruthEnvelope::coupled();
    assert!(close(e.true_angle_bound(15.0), -25.0));
    assert!(close(e.true_angle_bound(20.0), -12.0));
    assert!(close(e.true_angle_bound(17.5), -18.5));
    assert!(close(e.true_angle_bound(23.0), -4.2));
    assert!(close(e.true_angle_bound(10.0), -25.0));
    assert!(close(e.true_angle_bound(40.0), 0.0));
}

#[test]
fn marginal_envelope_is_flat() {
    let e = GroundTruthEnvelope::marginal();
    for d in [15.0, 18.0, 22.9] {
        assert_eq!(e.true_angle_bound(d), -25.0);
    }
}

#[test]
fn judging() {
    let e = GroundTruthEnvelope::coupled();
    assert!(e.judge(18.0, -10.0).is_empty());
    assert_eq!(e.judge(24.0, -10.0), [case_study::DISTANCE]);
    assert_eq!(e.judge(23.0, -3.0), [case_study::DISTANCE]);
    assert_eq!(e.judge(15.0, -10.0), [case_study::DISTANCE]);
    // joint violation: both marginals fine, the coupling is not
    assert_eq!(e.judge(20.0, -15.0), [case_study::ANGLE]);
    assert_eq!(e.judge(18.0, 1.0), [case_study::ANGLE]);
    assert_eq!(e.judge(30.0, -26.0), [case_study::DISTANCE, case_study::ANGLE]);
    assert!(GroundTruthEnvelope::marginal().judge(20.0, -15.0).is_empty());
    assert_eq!(GroundTruthEnvelope::marginal().judge(18.0, -25.0), [case_study::ANGLE]);
}

#[test]
fn kinds_parse_and_print() {
    for k in ExperimentKind::ALL {
        assert_eq!(k.as_str().parse::<ExperimentKind>().unwrap(), k);
    }
    assert!("sideways".parse::<ExperimentKind>().is_err());
    assert_eq!(ExperimentKind::Collective.default_envelope(), GroundTruthEnvelope::coupled());
    assert!(ExperimentKind::Collective.default_faults().is_empty());
}

fn faulty_kb(kind: ExperimentKind) -> KnowledgeBase {
    let mut kb = case_study::engineered_kb();
    for (f, v) in kind.default_faults() {
        kb.set_initial(f.parse().unwrap(), v);
    }
    kb
}

#[test]
fn scenarios_follow_their_kind() {
    let schema = case_study::grip_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..200 {
        let d = generate_scenario(
            ExperimentKind::Distance,
            &mut rng,
            &faulty_kb(ExperimentKind::Distance),
            &schema,
            i,
            3,
            1,
        )
        .unwrap();
        assert!((15.0..27.0).contains(&d.true_distance) && d.true_angle == -10.0);
        let a = generate_scenario(ExperimentKind::Angle, &mut rng, &faulty_kb(ExperimentKind::Angle), &schema, i, 3, 1)
            .unwrap();
        assert!(a.true_distance == 18.0 && (-29.0..0.0).contains(&a.true_angle));
        let g = generate_scenario(ExperimentKind::Group, &mut rng, &faulty_kb(ExperimentKind::Group), &schema, i, 3, 1)
            .unwrap();
        assert!((15.0..25.0).contains(&g.true_distance) && g.true_angle == -20.0);
        let c = generate_scenario(
            ExperimentKind::Collective,
            &mut rng,
            &faulty_kb(ExperimentKind::Collective),
            &schema,
            i,
            3,
            1,
        )
        .unwrap();
        assert!((16.0..=22.0).contains(&c.true_distance) && c.true_distance.fract() == 0.0);
        assert!((-25.0..0.0).contains(&c.true_angle));
    }
}

#[test]
fn collective_angles_respect_bucketed_bounds() {
    let schema = case_study::grip_schema();
    let mut kb = faulty_kb(ExperimentKind::Collective);
    kb.apply_temporary(&case_study::minhwangle(), -12.0, Some(20), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut seen = false;
    for i in 0..300 {
        let c = generate_scenario(ExperimentKind::Collective, &mut rng, &kb, &schema, i, 9, 1).unwrap();
        if c.true_distance == 20.0 {
            seen = true;
            assert!(c.true_angle >= -12.0, "{}", c.true_angle);
        }
    }
    assert!(seen);
}

#[test]
fn empty_distance_range_is_reported() {
    let mut kb = case_study::engineered_kb();
    kb.set_initial(case_study::maxdis(), 16.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = generate_scenario(ExperimentKind::Collective, &mut rng, &kb, &case_study::grip_schema(), 0, 1, 1);
    assert!(matches!(r, Err(SimError::EmptyRange(_))));
}

#[test]
fn layout_distances() {
    let sc = Scenario::new(0, ExperimentKind::Distance, 21.0, -10.0, 0, 1);
    assert_eq!(sc.distance_between("wp2", "wp1"), Some(21.0));
    assert_eq!(sc.distance_between("wp0", "wp1"), Some(60.0));
    assert!(close(sc.distance_between("wp0", "wp2").unwrap(), (21.0f64 * 21.0 + 3600.0).sqrt()));
    assert_eq!(sc.distance_between("wp0", "wp9"), None);
    let seen = sc.perceived(&Observation { distance: 22.5, angle: -9.0 });
    assert_eq!(seen.distance_between("wp2", "wp1"), Some(22.5));
    assert_eq!((seen.true_angle, seen.id), (-9.0, 0));
}

#[test]
fn zero_noise_is_the_identity_and_uses_no_randomness() {
    let mut a = ChaCha8Rng::seed_from_u64(5);
    let b = a.clone();
    assert_eq!(sense(20.3, 0.0, &mut a), 20.3);
    assert_eq!(a, b);
}

#[test]
fn noise_is_reproducible_and_can_cross_a_boundary() {
    let draw = |seed| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..500).map(|_| sense(22.8, 0.5, &mut r)).collect::<Vec<_>>()
    };
    assert_eq!(draw(11), draw(11));
    let xs = draw(11);
    assert!(xs.iter().any(|x| *x >= 23.0) && xs.iter().any(|x| *x < 23.0));
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!((mean - 22.8).abs() < 0.1, "{mean}");
}

fn run(kb: &KnowledgeBase, sc: &Scenario) -> ExecutionFeedback {
    let d = case_study::domain();
    let p = instantiate_problem(kb, &case_study::grip_schema(), sc).unwrap();
    let plan = find_plan(&d, &p, PlannerConfig::default()).unwrap();
    let obs = Observation { distance: sc.true_distance, angle: sc.true_angle };
    execute_plan(&plan, sc, &ExperimentKind::Distance.default_envelope(), &obs, 4).unwrap()
}

#[test]
fn execution_examples() {
    let kb = faulty_kb(ExperimentKind::Distance);
    let fail = run(&kb, &Scenario::new(0, ExperimentKind::Distance, 24.0, -10.0, 0, 1));
    assert_eq!(fail.outcome, Outcome::Failure);
    assert_eq!(fail.observed.values, [24.0, -10.0]);
    assert_eq!(fail.observed.episode, 4);
    assert_eq!(fail.true_cause, [case_study::DISTANCE]);
    let ok = run(&kb, &Scenario::new(0, ExperimentKind::Distance, 20.0, -10.0, 0, 1));
    assert_eq!(ok.outcome, Outcome::Success);
    assert!(ok.true_cause.is_empty());
}

#[test]
fn the_true_geometry_decides_not_the_measurement() {
    let d = case_study::domain();
    let sc = Scenario::new(0, ExperimentKind::Distance, 23.2, -10.0, 0, 1);
    let obs = Observation { distance: 22.7, angle: -10.0 };
    let plan = parse_plan("(goto nao wp0 wp2)\n(grip nao redcup wp2 wp1 grp)", &d, "grip0").unwrap();
    let fb = execute_plan(&plan, &sc, &GroundTruthEnvelope::marginal(), &obs, 0).unwrap();
    assert_eq!(fb.outcome, Outcome::Failure);
    assert_eq!(fb.observed.values, [22.7, -10.0]);
    let no_grip = parse_plan("(goto nao wp0 wp2)", &d, "grip0").unwrap();
    assert!(execute_plan(&no_grip, &sc, &GroundTruthEnvelope::marginal(), &obs, 0).is_none());
}

#[test]
fn scenario_csv_round_trip() {
    let mut a = Scenario::new(3, ExperimentKind::Collective, 19.0, -13.5, 7, 1);
    a.robot_start = "wp2".into();
    let b = Scenario::new(4, ExperimentKind::Angle, 18.0, -2.25, 7, 1);
    let text = scenarios_to_csv([&a, &b]);
    assert!(text.starts_with("scenario_id,seed,rng_stream,kind,true_distance,true_angle,robot_start\n"));
    assert_eq!(scenarios_from_csv(&text).unwrap(), [a, b]);
    let empty = scenarios_to_csv([]);
    assert_eq!(empty.lines().count(), 1);
    assert!(scenarios_from_csv(&empty).unwrap().is_empty());
    let bad = text.replace("wp2", "wp7");
    assert!(matches!(scenarios_from_csv(&bad), Err(SimError::Malformed { line: 2, .. })));
}

proptest! {
    #[test]
    fn coupled_bound_is_monotone_and_clamped(d0 in 0.0f64..40.0, d1 in 0.0f64..40.0) {
        let e = GroundTruthEnvelope::coupled();
        let (lo, hi) = if d0 <= d1 { (d0, d1) } else { (d1, d0) };
        prop_assert!(e.true_angle_bound(lo) <= e.true_angle_bound(hi));
        prop_assert!((-25.0..=0.0).contains(&e.true_angle_bound(d0)));
    }

    #[test]
    fn success_means_inside_every_test(d in 10.0f64..30.0, a in -30.0f64..5.0) {
        let e = GroundTruthEnvelope::coupled();
        let ok = e.judge(d, a).is_empty();
        prop_assert_eq!(ok, 15.0 < d && d < 23.0 && e.true_angle_bound(d) < a && a <= 0.0);
    }
}
