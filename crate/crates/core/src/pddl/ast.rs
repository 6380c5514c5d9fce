use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// A name paired with its declared type. Variables keep their leading `?`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypedParam {
    pub name: String,
    pub ty: String,
}

impl TypedParam {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        TypedParam { name: name.into(), ty: ty.into() }
    }
}

/// Declaration of a predicate or function: name plus typed parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub params: Vec<TypedParam>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Atom { predicate: predicate.into(), args: args.into_iter().map(Into::into).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { positive: true, atom }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { positive: false, atom }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

/// A function application as written, e.g. `(dist_to ?waypoint1 ?waypoint2)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionTerm {
    pub name: String,
    pub args: Vec<String>,
}

impl FunctionTerm {
    pub fn new<S: Into<String>>(name: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        FunctionTerm { name: name.into(), args: args.into_iter().map(Into::into).collect() }
    }

    /// The resolution key for this term once its arguments are ground.
    pub fn ground_key(&self) -> GroundFluent {
        GroundFluent::new(&self.name, self.args.iter().cloned())
    }
}

impl fmt::Display for FunctionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Normalizes a function name for lookup: `dist-to` and `dist_to` resolve alike.
pub fn function_key(name: &str) -> String {
    name.to_lowercase().replace('-', "_")
}

/// A fully ground fluent used as a map key, e.g. `maxdis(grp)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundFluent {
    name: String,
    args: Vec<String>,
}

impl GroundFluent {
    pub fn new<S: Into<String>>(name: &str, args: impl IntoIterator<Item = S>) -> Self {
        GroundFluent { name: function_key(name), args: args.into_iter().map(|a| a.into().to_lowercase()).collect() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }
}

impl fmt::Display for GroundFluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed fluent name '{0}', expected e.g. 'maxdis(grp)'")]
pub struct FluentNameError(pub String);

impl FromStr for GroundFluent {
    type Err = FluentNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || FluentNameError(s.to_string());
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        if name.is_empty() || inner.contains(['(', ')']) {
            return Err(bad());
        }
        let args: Vec<&str> = if inner.trim().is_empty() { vec![] } else { inner.split(',').map(str::trim).collect() };
        if args.iter().any(|a| a.is_empty()) {
            return Err(bad());
        }
        Ok(GroundFluent::new(name, args))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Lt,
    Gt,
    Le,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Le => "<=",
            CompareOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "<" => CompareOp::Lt,
            ">" => CompareOp::Gt,
            "<=" => CompareOp::Le,
            ">=" => CompareOp::Ge,
            _ => return None,
        })
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Lt => lhs < rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NumericComparison {
    pub op: CompareOp,
    pub lhs: FunctionTerm,
    pub rhs: FunctionTerm,
}

impl fmt::Display for NumericComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.op.symbol(), self.lhs, self.rhs)
    }
}

/// One conjunct of a precondition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Condition {
    Literal(Literal),
    Compare(NumericComparison),
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Literal(l) => l.fmt(f),
            Condition::Compare(c) => c.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub parameters: Vec<TypedParam>,
    pub precondition: Vec<Condition>,
    pub effect: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DomainModel {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: Vec<String>,
    pub predicates: Vec<Signature>,
    pub functions: Vec<Signature>,
    pub actions: Vec<ActionSchema>,
}

impl DomainModel {
    pub fn predicate(&self, name: &str) -> Option<&Signature> {
        self.predicates.iter().find(|p| p.name == name)
    }

    /// Looks up a function, treating `-` and `_` as equivalent.
    pub fn function(&self, name: &str) -> Option<&Signature> {
        let key = function_key(name);
        self.functions.iter().find(|f| function_key(&f.name) == key)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == "object" || self.types.iter().any(|t| t == ty)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluentAssignment {
    pub term: FunctionTerm,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemInstance {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedParam>,
    pub init_facts: Vec<Atom>,
    pub init_fluents: Vec<FluentAssignment>,
    pub goal: Vec<Literal>,
}

impl ProblemInstance {
    /// Fluent assignments keyed by normalized ground name.
    pub fn fluents(&self) -> BTreeMap<GroundFluent, f64> {
        self.init_fluents.iter().map(|a| (a.term.ground_key(), a.value)).collect()
    }

    pub fn fluent(&self, key: &str) -> Option<f64> {
        let key: GroundFluent = key.parse().ok()?;
        self.init_fluents.iter().find(|a| a.term.ground_key() == key).map(|a| a.value)
    }

    pub fn objects_of_type<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects.iter().filter(move |o| ty == "object" || o.ty == ty).map(|o| o.name.as_str())
    }

    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects.iter().find(|o| o.name == name).map(|o| o.ty.as_str())
    }
}
