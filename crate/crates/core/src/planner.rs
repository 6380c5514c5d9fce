//! Grounded breadth-first planner for the STRIPS-with-static-fluents subset.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::pddl::{cartesian, evaluate_comparison, Atom, DomainModel, EvalError, GroundAction, ProblemInstance, State};

/// A sequential plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub steps: Vec<GroundAction>,
    /// Name of the problem the plan was generated for.
    pub problem: String,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannerConfig {
    pub max_depth: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { max_depth: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("no plan found within depth {max_depth}")]
    NoPlanFound { max_depth: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// All type-correct instantiations of every action over the problem's
/// objects, ordered by their printed form.
///
/// Instances whose effect adds and deletes the same atom (a move from a
/// waypoint to itself) are dropped.
pub fn ground_actions(d: &DomainModel, p: &ProblemInstance) -> Vec<GroundAction> {
    let mut out = Vec::new();
    for schema in &d.actions {
        let pools: Vec<Vec<&str>> = schema.parameters.iter().map(|tp| p.objects_of_type(&tp.ty).collect()).collect();
        for combo in cartesian(&pools) {
            let objects: Vec<String> = combo.into_iter().map(str::to_string).collect();
            let g = GroundAction::bind(schema, &objects);
            if g.add.iter().any(|a| g.delete.contains(a)) {
                continue;
            }
            out.push(g);
        }
    }
    out.sort_by_cached_key(|g| g.to_string());
    out
}

/// Shortest plan reaching the goal, by breadth-first search.
///
/// Fluents never change during search, so numeric comparisons are decided
/// once per ground action. Successors are expanded in printed-name order,
/// which makes the returned plan the lexicographically first among the
/// shortest ones.
pub fn find_plan(d: &DomainModel, p: &ProblemInstance, cfg: PlannerConfig) -> Result<Plan, PlanError> {
    let init = State::initial(p);
    let mut actions = Vec::new();
    for g in ground_actions(d, p) {
        let mut ok = true;
        for cmp in g.comparisons() {
            ok &= evaluate_comparison(&init, cmp)?;
        }
        if ok {
            actions.push(g);
        }
    }

    let plan = |steps: Vec<GroundAction>| Plan { steps, problem: p.name.clone() };
    if init.satisfies(&p.goal) {
        return Ok(plan(Vec::new()));
    }

    // node = (facts, parent node, action index, depth)
    let mut nodes: Vec<(BTreeSet<Atom>, usize, usize, usize)> = vec![(init.facts.clone(), usize::MAX, usize::MAX, 0)];
    let mut seen: HashSet<BTreeSet<Atom>> = HashSet::from([init.facts.clone()]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(n) = queue.pop_front() {
        let depth = nodes[n].3;
        if depth >= cfg.max_depth {
            continue;
        }
        for (ai, a) in actions.iter().enumerate() {
            let facts = &nodes[n].0;
            if !a.literals().all(|l| facts.contains(&l.atom) == l.positive) {
                continue;
            }
            let mut next = facts.clone();
            for del in &a.delete {
                next.remove(del);
            }
            next.extend(a.add.iter().cloned());
            if !seen.insert(next.clone()) {
                continue;
            }
            let goal = p.goal.iter().all(|l| next.contains(&l.atom) == l.positive);
            nodes.push((next, n, ai, depth + 1));
            if goal {
                let mut steps = Vec::new();
                let mut cur = nodes.len() - 1;
                while nodes[cur].1 != usize::MAX {
                    steps.push(actions[nodes[cur].2].clone());
                    cur = nodes[cur].1;
                }
                steps.reverse();
                return Ok(plan(steps));
            }
            queue.push_back(nodes.len() - 1);
        }
    }
    Err(PlanError::NoPlanFound { max_depth: cfg.max_depth })
}

/// Result of replaying a plan.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanValidation {
    Valid,
    /// `step` is 1-based.
    StepFailed {
        step: usize,
        action: String,
        reason: String,
    },
    GoalUnmet,
}

impl PlanValidation {
    pub fn is_valid(&self) -> bool {
        matches!(self, PlanValidation::Valid)
    }
}

/// Replays `pl` from the problem's initial state, re-binding every step
/// against the domain so that plans made for another problem can be checked.
pub fn validate_plan(d: &DomainModel, p: &ProblemInstance, pl: &Plan) -> PlanValidation {
    let mut state = State::initial(p);
    for (i, step) in pl.steps.iter().enumerate() {
        let fail = |reason: String| PlanValidation::StepFailed { step: i + 1, action: step.to_string(), reason };
        let Some(schema) = d.action(&step.schema) else {
            return fail(format!("unknown action '{}'", step.schema));
        };
        if schema.parameters.len() != step.bindings.len() {
            return fail(format!("expected {} arguments", schema.parameters.len()));
        }
        for (tp, obj) in schema.parameters.iter().zip(&step.bindings) {
            if !p.objects_of_type(&tp.ty).any(|o| o == obj) {
                return fail(format!("'{obj}' is not an object of type '{}'", tp.ty));
            }
        }
        let g = GroundAction::bind(schema, &step.bindings);
        for cmp in g.comparisons() {
            match evaluate_comparison(&state, cmp) {
                Ok(true) => {}
                Ok(false) => {
                    return fail(format!(
                        "({} {} {}) is false",
                        cmp.op.symbol(),
                        cmp.lhs.ground_key(),
                        cmp.rhs.ground_key()
                    ))
                }
                Err(e) => return fail(e.to_string()),
            }
        }
        if let Some(l) = g.literals().find(|l| state.facts.contains(&l.atom) != l.positive) {
            let neg = if l.positive { "" } else { "not " };
            return fail(format!("{neg}{} does not hold", l.atom));
        }
        state = state.apply(&g);
    }
    if state.satisfies(&p.goal) {
        PlanValidation::Valid
    } else {
        PlanValidation::GoalUnmet
    }
}

/// Timed listing with a step-count cost header and dummy 0.001 durations:
///
/// ```text
/// ; Cost : 2
/// ; Time 0.00
/// 0.000: (goto nao wp0 wp2) [0.001]
/// 0.001: (grip nao redcup wp2 wp1 grp) [0.001]
/// ```
pub fn format_plan(pl: &Plan) -> String {
    let mut s = format!("; Cost : {}\n; Time 0.00\n", pl.len());
    for (i, step) in pl.steps.iter().enumerate() {
        let _ = writeln!(s, "{:.3}: {step} [0.001]", i as f64 * 0.001);
    }
    s
}

/// One action per line, nothing else.
pub fn format_plan_compact(pl: &Plan) -> String {
    pl.steps.iter().map(|s| format!("{s}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanParseError {
    #[error("plan line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Reads either output form back. Blank lines and `;` comments are skipped;
/// a leading `t:` timestamp and trailing `[dur]` are optional.
pub fn parse_plan(text: &str, d: &DomainModel, problem: &str) -> Result<Plan, PlanParseError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let err = |message: String| PlanParseError::Line { line: i + 1, message };
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let start = line.find('(').ok_or_else(|| err("expected '('".into()))?;
        let end = line.rfind(')').ok_or_else(|| err("expected ')'".into()))?;
        let rest = line[end + 1..].trim();
        if !(rest.is_empty() || rest.starts_with('[') && rest.ends_with(']')) {
            return Err(err(format!("unexpected trailing text '{rest}'")));
        }
        let inner = &line[start + 1..end];
        if inner.contains(['(', ')']) {
            return Err(err("nested parentheses in action".into()));
        }
        let words: Vec<String> = inner.split_whitespace().map(str::to_lowercase).collect();
        let (name, args) = words.split_first().ok_or_else(|| err("empty action".into()))?;
        let schema = d.action(name).ok_or_else(|| err(format!("unknown action '{name}'")))?;
        if schema.parameters.len() != args.len() {
            return Err(err(format!("'{name}' takes {} arguments, found {}", schema.parameters.len(), args.len())));
        }
        steps.push(GroundAction::bind(schema, args));
    }
    Ok(Plan { steps, problem: problem.to_string() })
}

#[cfg(test)]
mod tests;
