//! Canonical printer: two-space indentation, one conjunct per line.
//! Output for a given model is byte-stable.

use std::fmt::Write;

use super::ast::*;

fn typed(params: &[TypedParam]) -> String {
    params.iter().map(|p| format!("{} - {}", p.name, p.ty)).collect::<Vec<_>>().join(" ")
}

fn signature(s: &Signature) -> String {
    if s.params.is_empty() {
        format!("({})", s.name)
    } else {
        format!("({} {})", s.name, typed(&s.params))
    }
}

fn block(out: &mut String, indent: &str, head: &str, lines: &[String]) {
    if lines.is_empty() {
        let _ = write!(out, "\n{indent}{head} (and)");
        return;
    }
    let _ = write!(out, "\n{indent}{head} (and");
    for l in lines {
        let _ = write!(out, "\n{indent}  {l}");
    }
    out.push(')');
}

pub fn print_domain(d: &DomainModel) -> String {
    let mut out = format!("(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let _ = write!(out, "\n  (:requirements {})", d.requirements.join(" "));
    }
    if !d.types.is_empty() {
        let _ = write!(out, "\n  (:types {})", d.types.join(" "));
    }
    for (head, sigs) in [(":predicates", &d.predicates), (":functions", &d.functions)] {
        if sigs.is_empty() {
            continue;
        }
        let _ = write!(out, "\n  ({head}");
        for s in sigs {
            let _ = write!(out, "\n    {}", signature(s));
        }
        out.push(')');
    }
    for a in &d.actions {
        let _ = write!(out, "\n  (:action {}", a.name);
        let _ = write!(out, "\n    :parameters ({})", typed(&a.parameters));
        let pre: Vec<String> = a.precondition.iter().map(ToString::to_string).collect();
        block(&mut out, "    ", ":precondition", &pre);
        let eff: Vec<String> = a.effect.iter().map(ToString::to_string).collect();
        block(&mut out, "    ", ":effect", &eff);
        out.push(')');
    }
    out.push_str(")\n");
    out
}

pub fn print_problem(p: &ProblemInstance) -> String {
    let mut out = format!("(define (problem {})\n  (:domain {})", p.name, p.domain_name);
    if !p.objects.is_empty() {
        out.push_str("\n  (:objects");
        for o in &p.objects {
            let _ = write!(out, "\n    {} - {}", o.name, o.ty);
        }
        out.push(')');
    }
    out.push_str("\n  (:init");
    for f in &p.init_facts {
        let _ = write!(out, "\n    {f}");
    }
    for a in &p.init_fluents {
        let _ = write!(out, "\n    (= {} {})", a.term, a.value);
    }
    out.push(')');
    let goal: Vec<String> = p.goal.iter().map(ToString::to_string).collect();
    block(&mut out, "  ", "(:goal", &goal);
    out.push_str("))\n");
    out
}
