use proptest::prelude::*;

use super::*;
use crate::pddl::{parse_domain, parse_problem, FluentAssignment, GroundFluent, NAO_DOMAIN};

const FAULTY: &str = include_str!("../../tests/fixtures/grip_faulty.pddl");
const REFINED: &str = include_str!("../../tests/fixtures/grip_refined.pddl");

fn nao() -> DomainModel {
    parse_domain(NAO_DOMAIN).unwrap()
}

fn names(pl: &Plan) -> Vec<String> {
    pl.steps.iter().map(ToString::to_string).collect()
}

#[test]
fn grounding_counts_and_order() {
    let d = nao();
    let p = parse_problem(FAULTY, &d).unwrap();
    let g = ground_actions(&d, &p);
    assert_eq!(g.iter().filter(|a| a.schema == "goto").count(), 20);
    assert_eq!(g.iter().filter(|a| a.schema == "grip").count(), 25);
    let printed: Vec<String> = g.iter().map(ToString::to_string).collect();
    let mut sorted = printed.clone();
    sorted.sort();
    assert_eq!(printed, sorted);
}

#[test]
fn faulty_bound_plans_the_far_waypoint() {
    let d = nao();
    let p = parse_problem(FAULTY, &d).unwrap();
    let pl = find_plan(&d, &p, PlannerConfig::default()).unwrap();
    assert_eq!(names(&pl), ["(goto nao wp0 wp2)", "(grip nao redcup wp2 wp1 grp)"]);
    assert_eq!(pl.problem, "grip-faulty");
    assert!(validate_plan(&d, &p, &pl).is_valid());
}

#[test]
fn refined_bound_plans_the_near_waypoint() {
    let d = nao();
    let p = parse_problem(REFINED, &d).unwrap();
    let pl = find_plan(&d, &p, PlannerConfig::default()).unwrap();
    assert_eq!(names(&pl), ["(goto nao wp0 wp4)", "(grip nao redcup wp4 wp1 grp)"]);
}

#[test]
fn faulty_plan_fails_at_the_grip_under_refined_bounds() {
    let d = nao();
    let faulty_plan = find_plan(&d, &parse_problem(FAULTY, &d).unwrap(), PlannerConfig::default()).unwrap();
    let refined = parse_problem(REFINED, &d).unwrap();
    match validate_plan(&d, &refined, &faulty_plan) {
        PlanValidation::StepFailed { step, action, reason } => {
            assert_eq!(step, 2);
            assert_eq!(action, "(grip nao redcup wp2 wp1 grp)");
            assert!(reason.contains("maxdis(grp)"), "{reason}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn validation_catches_bad_steps_and_unmet_goals() {
    let d = nao();
    let p = parse_problem(FAULTY, &d).unwrap();
    let goto_only = parse_plan("(goto nao wp0 wp2)", &d, "x").unwrap();
    assert_eq!(validate_plan(&d, &p, &goto_only), PlanValidation::GoalUnmet);
    let wrong_type = parse_plan("(goto redcup wp0 wp2)", &d, "x").unwrap();
    assert!(matches!(validate_plan(&d, &p, &wrong_type), PlanValidation::StepFailed { step: 1, .. }));
    let not_there = parse_plan("(grip nao redcup wp2 wp1 grp)", &d, "x").unwrap();
    match validate_plan(&d, &p, &not_there) {
        PlanValidation::StepFailed { step: 1, reason, .. } => assert!(reason.contains("atrobby"), "{reason}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn satisfied_goal_gives_an_empty_plan() {
    let d = nao();
    let text = FAULTY.replace("(free nao grp)", "(free nao grp) (carry nao redcup grp)");
    let p = parse_problem(&text, &d).unwrap();
    let pl = find_plan(&d, &p, PlannerConfig::default()).unwrap();
    assert!(pl.is_empty());
    assert!(validate_plan(&d, &p, &pl).is_valid());
    assert_eq!(format_plan(&pl), "; Cost : 0\n; Time 0.00\n");
}

#[test]
fn unreachable_goal_reports_the_depth() {
    let d = nao();
    let text = FAULTY.replace("(= (maxdis grp) 27)", "(= (maxdis grp) 10)");
    let p = parse_problem(&text, &d).unwrap();
    assert_eq!(find_plan(&d, &p, PlannerConfig { max_depth: 4 }), Err(PlanError::NoPlanFound { max_depth: 4 }));
    let p = parse_problem(FAULTY, &d).unwrap();
    assert_eq!(find_plan(&d, &p, PlannerConfig { max_depth: 1 }), Err(PlanError::NoPlanFound { max_depth: 1 }));
}

#[test]
fn plan_text_round_trips() {
    let d = nao();
    let p = parse_problem(FAULTY, &d).unwrap();
    let pl = find_plan(&d, &p, PlannerConfig::default()).unwrap();
    let timed = format_plan(&pl);
    assert_eq!(
        timed,
        "; Cost : 2\n; Time 0.00\n0.000: (goto nao wp0 wp2) [0.001]\n0.001: (grip nao redcup wp2 wp1 grp) [0.001]\n"
    );
    assert_eq!(parse_plan(&timed, &d, &p.name).unwrap(), pl);
    assert_eq!(parse_plan(&format_plan_compact(&pl), &d, &p.name).unwrap(), pl);
    assert_eq!(parse_plan("(GOTO Nao wp0 wp2)", &d, "x").unwrap().steps[0].to_string(), "(goto nao wp0 wp2)");
}

#[test]
fn malformed_plan_lines() {
    let d = nao();
    let line = |t: &str| match parse_plan(t, &d, "x") {
        Err(PlanParseError::Line { line, .. }) => line,
        Ok(_) => panic!("{t} parsed"),
    };
    assert_eq!(line("(goto nao wp0 wp2)\n(jump nao)"), 2);
    assert_eq!(line("(goto nao wp0)"), 1);
    assert_eq!(line("goto nao"), 1);
    assert_eq!(line("(goto nao wp0 wp2) extra"), 1);
}

// Oracle: enumerate action sequences by length, each length in
// lexicographic order of printed names; the first that validates is the
// lexicographically first shortest plan.
fn brute_force(d: &DomainModel, p: &ProblemInstance, max: usize) -> Option<Vec<String>> {
    let acts = ground_actions(d, p);
    for len in 0..=max {
        let mut idx = vec![0usize; len];
        loop {
            let pl = Plan { steps: idx.iter().map(|i| acts[*i].clone()).collect(), problem: p.name.clone() };
            if validate_plan(d, p, &pl).is_valid() {
                return Some(names(&pl));
            }
            // odometer increment, last position fastest
            let Some(k) = idx.iter().rposition(|i| *i + 1 < acts.len()) else { break };
            idx[k] += 1;
            idx[k + 1..].fill(0);
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn bfs_returns_the_first_shortest_plan(
        dists in prop::collection::vec(10u8..30, 5),
        maxdis in 16u8..30,
        start in 0usize..5,
        angle in -30i8..2,
    ) {
        let d = nao();
        let mut p = parse_problem(FAULTY, &d).unwrap();
        p.init_facts.retain(|a| a.predicate != "atrobby");
        p.init_facts.push(crate::pddl::Atom::new("atrobby", ["nao".to_string(), format!("wp{start}")]));
        let set = |p: &mut ProblemInstance, key: GroundFluent, v: f64| {
            p.init_fluents.retain(|a| a.term.ground_key() != key);
            p.init_fluents.push(FluentAssignment { term: crate::pddl::FunctionTerm::new(key.name(), key.args().to_vec()), value: v });
        };
        for (i, dist) in dists.iter().enumerate() {
            set(&mut p, GroundFluent::new("dist_to", [format!("wp{i}"), "wp1".into()]), *dist as f64);
        }
        set(&mut p, GroundFluent::new("maxdis", ["grp"]), maxdis as f64);
        set(&mut p, GroundFluent::new("hwangle", ["nao"]), angle as f64);
        let oracle = brute_force(&d, &p, 2);
        match find_plan(&d, &p, PlannerConfig { max_depth: 2 }) {
            Ok(pl) => {
                prop_assert!(validate_plan(&d, &p, &pl).is_valid());
                prop_assert_eq!(Some(names(&pl)), oracle);
            }
            Err(PlanError::NoPlanFound { .. }) => prop_assert_eq!(oracle, None),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}
