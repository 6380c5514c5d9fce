//! Domain and problem readers for the supported subset:
//! `:strips :typing :fluents`, conjunctive preconditions of literals and
//! binary comparisons between function terms, add/delete effects.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::ast::*;
use super::sexpr::{read_one, Pos, SExpr};
use super::{ParseError, SemanticError};

const SUPPORTED_REQUIREMENTS: &[&str] =
    &[":strips", ":typing", ":fluents", ":numeric-fluents", ":negative-preconditions"];

fn syntax(pos: Pos, expected: impl Into<String>, found: impl Into<String>) -> ParseError {
    ParseError::Syntax { pos, expected: expected.into(), found: found.into() }
}

fn semantic(pos: Pos, error: SemanticError) -> ParseError {
    ParseError::Semantic { pos, error }
}

fn unsupported(pos: Pos, construct: impl Into<String>) -> ParseError {
    ParseError::Unsupported { pos, construct: construct.into() }
}

fn list<'a>(e: &'a SExpr, expected: &str) -> Result<(&'a [SExpr], Pos, Pos), ParseError> {
    match e {
        SExpr::List { items, open, close } => Ok((items, *open, *close)),
        SExpr::Atom(s, p) => Err(syntax(*p, expected, format!("'{s}'"))),
    }
}

fn atom<'a>(e: Option<&'a SExpr>, at: Pos, expected: &str) -> Result<(&'a str, Pos), ParseError> {
    match e {
        Some(SExpr::Atom(s, p)) => Ok((s, *p)),
        Some(other) => Err(syntax(other.pos(), expected, other.describe())),
        None => Err(syntax(at, expected, "')'")),
    }
}

fn keyword(e: Option<&SExpr>, at: Pos, kw: &str) -> Result<(), ParseError> {
    let (s, p) = atom(e, at, &format!("'{kw}'"))?;
    if s == kw {
        Ok(())
    } else {
        Err(syntax(p, format!("'{kw}'"), format!("'{s}'")))
    }
}

fn head(items: &[SExpr]) -> Option<&str> {
    items.first().and_then(SExpr::as_atom)
}

/// Reads `a b - t c - u d`, assigning `object` to trailing untyped names.
fn typed_list(items: &[SExpr], close: Pos) -> Result<Vec<(TypedParam, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut it = items.iter().peekable();
    while let Some(e) = it.next() {
        match e {
            SExpr::Atom(s, p) if s == "-" => {
                let ty = match it.next() {
                    Some(SExpr::Atom(t, _)) => t.clone(),
                    Some(SExpr::List { open, .. }) => return Err(unsupported(*open, "either-type")),
                    None => return Err(syntax(close, "a type name after '-'", "')'")),
                };
                if pending.is_empty() {
                    return Err(syntax(*p, "a name before '-'", "'-'"));
                }
                out.extend(pending.drain(..).map(|(n, p)| (TypedParam::new(n, ty.clone()), p)));
            }
            SExpr::Atom(s, p) => pending.push((s.clone(), *p)),
            other => return Err(syntax(other.pos(), "a name", other.describe())),
        }
    }
    out.extend(pending.into_iter().map(|(n, p)| (TypedParam::new(n, "object"), p)));
    Ok(out)
}

fn number(s: &str, pos: Pos) -> Result<f64, ParseError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(syntax(pos, "a number", format!("'{s}'"))),
    }
}

fn plain_atom(items: &[SExpr], open: Pos, close: Pos) -> Result<Atom, ParseError> {
    let (name, _) = atom(items.first(), close, "a predicate name")?;
    let mut args = Vec::new();
    for a in &items[1..] {
        match a {
            SExpr::Atom(s, _) => args.push(s.clone()),
            other => return Err(syntax(other.pos(), "a term", other.describe())),
        }
    }
    let _ = open;
    Ok(Atom { predicate: name.to_string(), args })
}

fn function_term(e: Option<&SExpr>, at: Pos) -> Result<FunctionTerm, ParseError> {
    match e {
        None => Err(syntax(at, "a function term", "')'")),
        Some(SExpr::Atom(s, p)) => {
            if s.parse::<f64>().is_ok() {
                Err(unsupported(*p, "numeric constant in comparison"))
            } else {
                Err(syntax(*p, "a function term", format!("'{s}'")))
            }
        }
        Some(SExpr::List { items, open, close }) => {
            if let Some(SExpr::List { open, .. }) = items.first() {
                return Err(unsupported(*open, "nested numeric expression"));
            }
            let (name, _) = atom(items.first(), *close, "a function name")?;
            if matches!(name, "+" | "-" | "*" | "/") {
                return Err(unsupported(*open, format!("arithmetic '{name}'")));
            }
            let a = plain_atom(items, *open, *close)?;
            Ok(FunctionTerm { name: a.predicate, args: a.args })
        }
    }
}

fn literal(e: &SExpr) -> Result<Literal, ParseError> {
    let (items, open, close) = list(e, "a literal")?;
    if head(items) == Some("not") {
        if items.len() != 2 {
            return Err(syntax(close, "exactly one atom inside 'not'", "')'"));
        }
        let (inner, iopen, iclose) = list(&items[1], "an atom")?;
        if let Some(h) = head(inner) {
            if is_reserved(h) {
                return Err(unsupported(iopen, format!("'{h}' under negation")));
            }
        }
        return Ok(Literal::neg(plain_atom(inner, iopen, iclose)?));
    }
    Ok(Literal::pos(plain_atom(items, open, close)?))
}

fn is_reserved(h: &str) -> bool {
    matches!(
        h,
        "and"
            | "or"
            | "imply"
            | "exists"
            | "forall"
            | "when"
            | "="
            | "increase"
            | "decrease"
            | "assign"
            | "scale-up"
            | "scale-down"
            | "at"
            | "over"
    ) || CompareOp::from_symbol(h).is_some()
}

fn conjuncts(e: &SExpr) -> Result<&[SExpr], ParseError> {
    let (items, _, _) = list(e, "a condition")?;
    match head(items) {
        Some("and") => Ok(&items[1..]),
        None if items.is_empty() => Ok(items),
        _ => Ok(std::slice::from_ref(e)),
    }
}

fn condition(e: &SExpr, out: &mut Vec<Condition>) -> Result<(), ParseError> {
    let (items, open, close) = list(e, "a condition")?;
    let Some(h) = head(items) else {
        return match items.first() {
            Some(other) => Err(syntax(other.pos(), "a predicate or comparison", other.describe())),
            None => Err(syntax(close, "a predicate or comparison", "')'")),
        };
    };
    if let Some(op) = CompareOp::from_symbol(h) {
        let lhs = function_term(items.get(1), close)?;
        let rhs = function_term(items.get(2), close)?;
        if let Some(extra) = items.get(3) {
            return Err(syntax(extra.pos(), "')'", extra.describe()));
        }
        out.push(Condition::Compare(NumericComparison { op, lhs, rhs }));
        return Ok(());
    }
    match h {
        "and" => {
            for c in &items[1..] {
                condition(c, out)?;
            }
            Ok(())
        }
        "=" => Err(unsupported(open, "equality comparison")),
        "or" | "imply" | "exists" | "forall" | "when" | "at" | "over" => {
            Err(unsupported(open, format!("'{h}' condition")))
        }
        _ => {
            out.push(Condition::Literal(literal(e)?));
            Ok(())
        }
    }
}

fn effect(e: &SExpr, out: &mut Vec<Literal>) -> Result<(), ParseError> {
    let (items, open, _) = list(e, "an effect")?;
    match head(items) {
        Some("and") => {
            for c in &items[1..] {
                effect(c, out)?;
            }
            Ok(())
        }
        None if items.is_empty() => Ok(()),
        Some(h @ ("increase" | "decrease" | "assign" | "scale-up" | "scale-down")) => {
            Err(unsupported(open, format!("numeric effect '{h}'")))
        }
        Some(h @ ("when" | "forall" | "at")) => Err(unsupported(open, format!("'{h}' effect"))),
        _ => {
            out.push(literal(e)?);
            Ok(())
        }
    }
}

fn action(items: &[SExpr], close: Pos, positions: &mut ActionPositions) -> Result<ActionSchema, ParseError> {
    let (name, name_pos) = atom(items.get(1), close, "an action name")?;
    positions.name = name_pos;
    let mut a =
        ActionSchema { name: name.to_string(), parameters: Vec::new(), precondition: Vec::new(), effect: Vec::new() };
    let mut i = 2;
    while i < items.len() {
        let (key, kpos) = atom(items.get(i), close, "an action keyword")?;
        let value = items.get(i + 1).ok_or_else(|| syntax(close, format!("a value for '{key}'"), "')'"))?;
        match key {
            ":parameters" => {
                let (ps, _, pclose) = list(value, "a parameter list")?;
                let params = typed_list(ps, pclose)?;
                positions.params = params.iter().map(|(_, p)| *p).collect();
                a.parameters = params.into_iter().map(|(t, _)| t).collect();
            }
            ":precondition" => {
                positions.precondition = value.pos();
                for c in conjuncts(value)? {
                    condition(c, &mut a.precondition)?;
                }
            }
            ":effect" => {
                positions.effect = value.pos();
                effect(value, &mut a.effect)?;
            }
            ":duration" | ":condition" => return Err(unsupported(kpos, "durative action")),
            other => return Err(syntax(kpos, "':parameters', ':precondition' or ':effect'", format!("'{other}'"))),
        }
        i += 2;
    }
    Ok(a)
}

#[derive(Default, Clone)]
struct ActionPositions {
    name: Pos,
    params: Vec<Pos>,
    precondition: Pos,
    effect: Pos,
}

#[derive(Default)]
struct DomainPositions {
    types: Vec<Pos>,
    predicates: Vec<Pos>,
    functions: Vec<Pos>,
    actions: Vec<ActionPositions>,
}

fn define_header<'a>(root: &'a SExpr, kind: &str) -> Result<(&'a [SExpr], String, Pos), ParseError> {
    let (items, _, close) = list(root, "'(define'")?;
    keyword(items.first(), close, "define")?;
    let (hdr, _, hclose) =
        list(items.get(1).ok_or_else(|| syntax(close, format!("'({kind} ...)'"), "')'"))?, "a header")?;
    keyword(hdr.first(), hclose, kind)?;
    let (name, npos) = atom(hdr.get(1), hclose, &format!("a {kind} name"))?;
    if let Some(extra) = hdr.get(2) {
        return Err(syntax(extra.pos(), "')'", extra.describe()));
    }
    Ok((&items[2..], name.to_string(), npos))
}

/// Parses a domain file.
pub fn parse_domain(text: &str) -> Result<DomainModel, ParseError> {
    let root = read_one(text)?;
    let (sections, name, _) = define_header(&root, "domain")?;
    let mut d = DomainModel { name, ..Default::default() };
    let mut pos = DomainPositions::default();

    for s in sections {
        let (items, open, close) = list(s, "a domain section")?;
        let (key, kpos) = atom(items.first(), close, "a section keyword")?;
        match key {
            ":requirements" => {
                for r in &items[1..] {
                    let (r, rpos) = atom(Some(r), close, "a requirement keyword")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(unsupported(rpos, format!("requirement '{r}'")));
                    }
                    d.requirements.push(r.to_string());
                }
            }
            ":types" => {
                if items[1..].iter().any(|e| e.as_atom() == Some("-")) {
                    return Err(unsupported(open, "type hierarchy"));
                }
                for (t, p) in typed_list(&items[1..], close)? {
                    d.types.push(t.name);
                    pos.types.push(p);
                }
            }
            ":predicates" | ":functions" => {
                let functions = key == ":functions";
                let mut i = 1;
                while i < items.len() {
                    let e = &items[i];
                    if functions && e.as_atom() == Some("-") {
                        // `- number` typing of the preceding function(s)
                        let (t, tpos) = atom(items.get(i + 1), close, "'number'")?;
                        if t != "number" {
                            return Err(unsupported(tpos, format!("function type '{t}'")));
                        }
                        i += 2;
                        continue;
                    }
                    let (sig, sopen, sclose) = list(e, "a declaration")?;
                    let (n, npos) = atom(sig.first(), sclose, "a name")?;
                    let params = typed_list(&sig[1..], sclose)?.into_iter().map(|(t, _)| t).collect();
                    let _ = sopen;
                    let decl = Signature { name: n.to_string(), params };
                    if functions {
                        d.functions.push(decl);
                        pos.functions.push(npos);
                    } else {
                        d.predicates.push(decl);
                        pos.predicates.push(npos);
                    }
                    i += 1;
                }
            }
            ":action" => {
                let mut ap = ActionPositions::default();
                d.actions.push(action(items, close, &mut ap)?);
                pos.actions.push(ap);
            }
            ":durative-action" => return Err(unsupported(kpos, "durative action")),
            ":constants" | ":derived" | ":constraints" | ":process" | ":event" => {
                return Err(unsupported(kpos, format!("section '{key}'")))
            }
            other => return Err(syntax(kpos, "a domain section keyword", format!("'{other}'"))),
        }
    }
    validate_domain(&d, &pos)?;
    Ok(d)
}

fn check_unique<'a>(category: &'static str, names: impl Iterator<Item = (String, Pos)> + 'a) -> Result<(), ParseError> {
    let mut seen = HashSet::new();
    for (n, p) in names {
        if !seen.insert(n.clone()) {
            return Err(semantic(p, SemanticError::Duplicate { category, name: n }));
        }
    }
    Ok(())
}

fn validate_domain(d: &DomainModel, pos: &DomainPositions) -> Result<(), ParseError> {
    check_unique("type", d.types.iter().cloned().zip(pos.types.iter().copied()))?;
    check_unique("predicate", d.predicates.iter().map(|p| p.name.clone()).zip(pos.predicates.iter().copied()))?;
    check_unique("function", d.functions.iter().map(|f| function_key(&f.name)).zip(pos.functions.iter().copied()))?;
    check_unique("action", d.actions.iter().map(|a| a.name.clone()).zip(pos.actions.iter().map(|p| p.name)))?;

    for (sigs, sp) in [(&d.predicates, &pos.predicates), (&d.functions, &pos.functions)] {
        for (s, p) in sigs.iter().zip(sp) {
            for param in &s.params {
                if !d.has_type(&param.ty) {
                    return Err(semantic(*p, SemanticError::UndeclaredType(param.ty.clone())));
                }
            }
        }
    }

    for (a, ap) in d.actions.iter().zip(&pos.actions) {
        let mut scope: BTreeMap<&str, &str> = BTreeMap::new();
        for (param, p) in a.parameters.iter().zip(&ap.params) {
            if !param.name.starts_with('?') {
                return Err(syntax(*p, "a variable starting with '?'", format!("'{}'", param.name)));
            }
            if !d.has_type(&param.ty) {
                return Err(semantic(*p, SemanticError::UndeclaredType(param.ty.clone())));
            }
            if scope.insert(&param.name, &param.ty).is_some() {
                return Err(semantic(*p, SemanticError::Duplicate { category: "parameter", name: param.name.clone() }));
            }
        }
        let check_args = |name: &str, sig: &Signature, args: &[String], at: Pos| -> Result<(), ParseError> {
            if sig.params.len() != args.len() {
                return Err(semantic(
                    at,
                    SemanticError::Arity { name: name.to_string(), expected: sig.params.len(), found: args.len() },
                ));
            }
            for (arg, param) in args.iter().zip(&sig.params) {
                let Some(ty) = scope.get(arg.as_str()) else {
                    return Err(semantic(at, SemanticError::UndeclaredVariable(arg.clone())));
                };
                if param.ty != "object" && *ty != param.ty {
                    return Err(semantic(
                        at,
                        SemanticError::TypeMismatch {
                            term: arg.clone(),
                            expected: param.ty.clone(),
                            found: ty.to_string(),
                        },
                    ));
                }
            }
            Ok(())
        };
        let check_atom = |atom: &Atom, at: Pos| -> Result<(), ParseError> {
            let sig = d
                .predicate(&atom.predicate)
                .ok_or_else(|| semantic(at, SemanticError::UndeclaredPredicate(atom.predicate.clone())))?;
            check_args(&atom.predicate, sig, &atom.args, at)
        };
        let check_term = |t: &FunctionTerm, at: Pos| -> Result<(), ParseError> {
            let sig =
                d.function(&t.name).ok_or_else(|| semantic(at, SemanticError::UndeclaredFunction(t.name.clone())))?;
            check_args(&t.name, sig, &t.args, at)
        };
        for c in &a.precondition {
            match c {
                Condition::Literal(l) => check_atom(&l.atom, ap.precondition)?,
                Condition::Compare(cmp) => {
                    check_term(&cmp.lhs, ap.precondition)?;
                    check_term(&cmp.rhs, ap.precondition)?;
                }
            }
        }
        for l in &a.effect {
            check_atom(&l.atom, ap.effect)?;
        }
    }
    Ok(())
}

/// Parses a problem file against an already validated domain.
pub fn parse_problem(text: &str, domain: &DomainModel) -> Result<ProblemInstance, ParseError> {
    let root = read_one(text)?;
    let (sections, name, _) = define_header(&root, "problem")?;
    let mut p = ProblemInstance { name, ..Default::default() };
    let mut init_pos = Pos::default();
    let mut goal_pos = Pos::default();
    let mut object_pos = Vec::new();

    for s in sections {
        let (items, open, close) = list(s, "a problem section")?;
        let (key, kpos) = atom(items.first(), close, "a section keyword")?;
        match key {
            ":domain" => {
                let (dn, dpos) = atom(items.get(1), close, "a domain name")?;
                if dn != domain.name {
                    return Err(semantic(
                        dpos,
                        SemanticError::DomainMismatch { expected: domain.name.clone(), found: dn.to_string() },
                    ));
                }
                p.domain_name = dn.to_string();
            }
            ":objects" => {
                for (o, opos) in typed_list(&items[1..], close)? {
                    if !domain.has_type(&o.ty) {
                        return Err(semantic(opos, SemanticError::UndeclaredType(o.ty.clone())));
                    }
                    p.objects.push(o);
                    object_pos.push(opos);
                }
            }
            ":init" => {
                init_pos = open;
                for e in &items[1..] {
                    let (fi, fopen, fclose) = list(e, "an initial fact")?;
                    if head(fi) == Some("=") {
                        let term = function_term(fi.get(1), fclose)?;
                        let (v, vpos) = atom(fi.get(2), fclose, "a number")?;
                        let value = number(v, vpos)?;
                        if let Some(extra) = fi.get(3) {
                            return Err(syntax(extra.pos(), "')'", extra.describe()));
                        }
                        p.init_fluents.push(FluentAssignment { term, value });
                    } else {
                        p.init_facts.push(plain_atom(fi, fopen, fclose)?);
                    }
                }
            }
            ":goal" => {
                goal_pos = open;
                let g = items.get(1).ok_or_else(|| syntax(close, "a goal condition", "')'"))?;
                for c in conjuncts(g)? {
                    let (ci, copen, _) = list(c, "a goal literal")?;
                    if let Some(h) = head(ci) {
                        if h != "not" && is_reserved(h) {
                            return Err(unsupported(copen, format!("'{h}' in goal")));
                        }
                    }
                    p.goal.push(literal(c)?);
                }
            }
            ":metric" => return Err(unsupported(kpos, "metric")),
            other => return Err(syntax(kpos, "a problem section keyword", format!("'{other}'"))),
        }
    }
    if p.domain_name.is_empty() {
        p.domain_name = domain.name.clone();
    }
    check_unique("object", p.objects.iter().map(|o| o.name.clone()).zip(object_pos.iter().copied()))?;
    validate_problem(&p, domain, init_pos, goal_pos)?;
    Ok(p)
}

fn validate_problem(p: &ProblemInstance, d: &DomainModel, init_pos: Pos, goal_pos: Pos) -> Result<(), ParseError> {
    let ground_args = |name: &str, sig: &Signature, args: &[String], at: Pos| -> Result<(), ParseError> {
        if sig.params.len() != args.len() {
            return Err(semantic(
                at,
                SemanticError::Arity { name: name.to_string(), expected: sig.params.len(), found: args.len() },
            ));
        }
        for (arg, param) in args.iter().zip(&sig.params) {
            let ty = p.object_type(arg).ok_or_else(|| semantic(at, SemanticError::UndeclaredObject(arg.clone())))?;
            if param.ty != "object" && ty != param.ty {
                return Err(semantic(
                    at,
                    SemanticError::TypeMismatch {
                        term: arg.clone(),
                        expected: param.ty.clone(),
                        found: ty.to_string(),
                    },
                ));
            }
        }
        Ok(())
    };
    for f in &p.init_facts {
        let sig = d
            .predicate(&f.predicate)
            .ok_or_else(|| semantic(init_pos, SemanticError::UndeclaredPredicate(f.predicate.clone())))?;
        ground_args(&f.predicate, sig, &f.args, init_pos)?;
    }
    let mut assigned = BTreeSet::new();
    for a in &p.init_fluents {
        let sig = d
            .function(&a.term.name)
            .ok_or_else(|| semantic(init_pos, SemanticError::UndeclaredFunction(a.term.name.clone())))?;
        ground_args(&a.term.name, sig, &a.term.args, init_pos)?;
        if !assigned.insert(a.term.ground_key()) {
            return Err(semantic(
                init_pos,
                SemanticError::Duplicate { category: "fluent assignment", name: a.term.ground_key().to_string() },
            ));
        }
    }
    for l in &p.goal {
        let sig = d
            .predicate(&l.atom.predicate)
            .ok_or_else(|| semantic(goal_pos, SemanticError::UndeclaredPredicate(l.atom.predicate.clone())))?;
        ground_args(&l.atom.predicate, sig, &l.atom.args, goal_pos)?;
    }

    // every fluent a grounded precondition can mention must be assigned
    let mut used = BTreeSet::new();
    for a in &d.actions {
        for c in &a.precondition {
            if let Condition::Compare(cmp) = c {
                used.insert(function_key(&cmp.lhs.name));
                used.insert(function_key(&cmp.rhs.name));
            }
        }
    }
    for f in d.functions.iter().filter(|f| used.contains(&function_key(&f.name))) {
        let pools: Vec<Vec<&str>> = f.params.iter().map(|t| p.objects_of_type(&t.ty).collect()).collect();
        for tuple in cartesian(&pools) {
            let key = GroundFluent::new(&f.name, tuple.iter().copied());
            if !assigned.contains(&key) {
                return Err(ParseError::FluentUnassigned { fluent: key.to_string() });
            }
        }
    }
    Ok(())
}

/// All tuples drawing one element from each pool, in lexicographic pool order.
pub(crate) fn cartesian<'a>(pools: &[Vec<&'a str>]) -> Vec<Vec<&'a str>> {
    let mut out: Vec<Vec<&str>> = vec![Vec::new()];
    for pool in pools {
        out = out
            .iter()
            .flat_map(|prefix| {
                pool.iter().map(move |x| {
                    let mut v = prefix.clone();
                    v.push(*x);
                    v
                })
            })
            .collect();
    }
    out
}
