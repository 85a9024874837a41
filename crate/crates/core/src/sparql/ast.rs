use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::rdf::{PrefixMap, Term};

/// A pattern position: variable or concrete term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VarOrTerm {
    Var(String),
    Term(Term),
}

impl VarOrTerm {
    pub fn var(name: impl Into<String>) -> Self {
        VarOrTerm::Var(name.into())
    }

    pub fn iri(iri: impl Into<String>) -> Self {
        VarOrTerm::Term(Term::iri(iri))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            VarOrTerm::Var(v) => Some(v),
            VarOrTerm::Term(_) => None,
        }
    }
}

impl fmt::Display for VarOrTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarOrTerm::Var(v) => write!(f, "?{v}"),
            VarOrTerm::Term(t) => t.fmt(f),
        }
    }
}

/// Syntactic context a triple pattern appears under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ContextFlag {
    Base,
    Optional,
    Union,
    Minus,
    FilterNotExists,
    Subquery,
}

/// Set of context flags. The empty set is the base context.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Context(u8);

impl Context {
    pub const BASE: Context = Context(0);

    fn bit(flag: ContextFlag) -> u8 {
        match flag {
            ContextFlag::Base => 0,
            ContextFlag::Optional => 1,
            ContextFlag::Union => 2,
            ContextFlag::Minus => 4,
            ContextFlag::FilterNotExists => 8,
            ContextFlag::Subquery => 16,
        }
    }

    pub fn of(flags: &[ContextFlag]) -> Context {
        flags.iter().fold(Context::BASE, |c, f| c.with(*f))
    }

    pub fn with(self, flag: ContextFlag) -> Context {
        Context(self.0 | Self::bit(flag))
    }

    pub fn contains(self, flag: ContextFlag) -> bool {
        match flag {
            ContextFlag::Base => self.0 == 0,
            other => self.0 & Self::bit(other) != 0,
        }
    }

    pub fn is_base(self) -> bool {
        self.0 == 0
    }

    pub fn flags(self) -> Vec<ContextFlag> {
        if self.is_base() {
            return vec![ContextFlag::Base];
        }
        [
            ContextFlag::Optional,
            ContextFlag::Union,
            ContextFlag::Minus,
            ContextFlag::FilterNotExists,
            ContextFlag::Subquery,
        ]
        .into_iter()
        .filter(|f| self.contains(*f))
        .collect()
    }
}

impl Serialize for Context {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.flags().serialize(serializer)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TriplePattern {
    pub subject: VarOrTerm,
    pub predicate: VarOrTerm,
    pub object: VarOrTerm,
    pub context: Context,
}

impl TriplePattern {
    pub fn new(subject: VarOrTerm, predicate: VarOrTerm, object: VarOrTerm) -> Self {
        TriplePattern {
            subject,
            predicate,
            object,
            context: Context::BASE,
        }
    }

    pub fn in_context(mut self, context: Context) -> Self {
        self.context = context;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ProjectionKind {
    Variable,
    Expression,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Projection {
    pub kind: ProjectionKind,
    /// Variable name without the leading `?`.
    pub name: String,
    pub expression: Option<String>,
}

impl Projection {
    pub fn variable(name: impl Into<String>) -> Self {
        Projection {
            kind: ProjectionKind::Variable,
            name: name.into(),
            expression: None,
        }
    }

    pub fn expression(name: impl Into<String>, expression: impl Into<String>) -> Self {
        Projection {
            kind: ProjectionKind::Expression,
            name: name.into(),
            expression: Some(expression.into()),
        }
    }
}

/// `{ ... }` group: ordered elements under one context.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GroupPattern {
    pub context: Context,
    pub elements: Vec<PatternElement>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PatternElement {
    Triple(TriplePattern),
    Group(GroupPattern),
    Optional(GroupPattern),
    Minus(GroupPattern),
    Union(Vec<GroupPattern>),
    Graph {
        name: VarOrTerm,
        pattern: GroupPattern,
    },
    /// FILTER with its expression kept as source text. Groups under
    /// `NOT EXISTS` inside the expression are parsed into `not_exists`.
    Filter {
        expression: String,
        not_exists: Vec<GroupPattern>,
    },
    Bind {
        expression: String,
        variable: String,
    },
    Values(ValuesBlock),
    SubSelect(Box<SubSelect>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValuesBlock {
    pub variables: Vec<String>,
    pub rows: usize,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Modifiers {
    pub distinct: bool,
    pub reduced: bool,
    pub group_by: Option<String>,
    pub having: Option<String>,
    pub order_by: Option<String>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
}

/// SELECT body shared by top-level queries and subqueries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubSelect {
    pub projection: Vec<Projection>,
    pub select_all: bool,
    pub pattern: GroupPattern,
    pub modifiers: Modifiers,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Notice {
    /// A projected variable never occurs in the pattern.
    ProjectionMismatch { variable: String },
    /// GRAPH clause parsed; the graph name plays no part in checking.
    GraphClauseIgnored,
}

impl fmt::Display for Notice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Notice::ProjectionMismatch { variable } => {
                write!(
                    f,
                    "projected variable ?{variable} is not bound in the pattern"
                )
            }
            Notice::GraphClauseIgnored => {
                f.write_str("GRAPH clause found; its graph name is ignored")
            }
        }
    }
}

/// A parsed SELECT query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QueryAst {
    pub prefixes: PrefixMap,
    pub base: Option<String>,
    pub projection: Vec<Projection>,
    pub select_all: bool,
    pub pattern: GroupPattern,
    pub modifiers: Modifiers,
    /// Trailing VALUES block.
    pub values: Option<ValuesBlock>,
    pub notices: Vec<Notice>,
}

impl QueryAst {
    /// Projected variable names in order, deduplicated. `SELECT *` expands
    /// to the pattern's variables in first-occurrence order.
    pub fn projected_variables(&self) -> Vec<String> {
        if self.select_all {
            return self.pattern.in_scope_variables();
        }
        let mut out: Vec<String> = Vec::new();
        for p in &self.projection {
            if !out.contains(&p.name) {
                out.push(p.name.clone());
            }
        }
        out
    }

    /// Every triple pattern in every context, in textual order.
    pub fn triple_patterns(&self) -> Vec<TriplePattern> {
        let mut out = Vec::new();
        self.pattern.collect_triples(&mut out);
        out
    }

    pub fn to_sparql(&self) -> String {
        self.to_string()
    }
}

impl GroupPattern {
    pub fn collect_triples(&self, out: &mut Vec<TriplePattern>) {
        for element in &self.elements {
            match element {
                PatternElement::Triple(t) => out.push(t.clone()),
                PatternElement::Group(g)
                | PatternElement::Optional(g)
                | PatternElement::Minus(g) => g.collect_triples(out),
                PatternElement::Graph { pattern, .. } => pattern.collect_triples(out),
                PatternElement::Union(branches) => {
                    branches.iter().for_each(|b| b.collect_triples(out))
                }
                PatternElement::Filter { not_exists, .. } => {
                    not_exists.iter().for_each(|g| g.collect_triples(out))
                }
                PatternElement::SubSelect(sub) => sub.pattern.collect_triples(out),
                PatternElement::Bind { .. } | PatternElement::Values(_) => {}
            }
        }
    }

    /// Variables that can be bound by this group, first occurrence first.
    /// MINUS and FILTER NOT EXISTS groups do not bind.
    pub fn in_scope_variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.push_scope_vars(&mut out);
        out
    }

    fn push_scope_vars(&self, out: &mut Vec<String>) {
        let push = |v: &str, out: &mut Vec<String>| {
            if !out.iter().any(|x| x == v) {
                out.push(v.to_string());
            }
        };
        for element in &self.elements {
            match element {
                PatternElement::Triple(t) => {
                    for pos in [&t.subject, &t.predicate, &t.object] {
                        if let Some(v) = pos.as_var() {
                            push(v, out);
                        }
                    }
                }
                PatternElement::Group(g) | PatternElement::Optional(g) => g.push_scope_vars(out),
                PatternElement::Graph { name, pattern } => {
                    if let Some(v) = name.as_var() {
                        push(v, out);
                    }
                    pattern.push_scope_vars(out);
                }
                PatternElement::Union(branches) => {
                    branches.iter().for_each(|b| b.push_scope_vars(out))
                }
                PatternElement::Bind { variable, .. } => push(variable, out),
                PatternElement::Values(v) => v.variables.iter().for_each(|x| push(x, out)),
                PatternElement::SubSelect(sub) => {
                    let names = if sub.select_all {
                        sub.pattern.in_scope_variables()
                    } else {
                        sub.projection.iter().map(|p| p.name.clone()).collect()
                    };
                    names.iter().for_each(|x| push(x, out));
                }
                PatternElement::Minus(_) | PatternElement::Filter { .. } => {}
            }
        }
    }
}

fn write_group(out: &mut String, group: &GroupPattern, indent: usize) {
    out.push_str("{\n");
    for element in &group.elements {
        out.push_str(&"  ".repeat(indent + 1));
        write_element(out, element, indent + 1);
        out.push('\n');
    }
    out.push_str(&"  ".repeat(indent));
    out.push('}');
}

fn write_element(out: &mut String, element: &PatternElement, indent: usize) {
    match element {
        PatternElement::Triple(t) => {
            let _ = write!(out, "{} {} {} .", t.subject, t.predicate, t.object);
        }
        PatternElement::Group(g) => write_group(out, g, indent),
        PatternElement::Optional(g) => {
            out.push_str("OPTIONAL ");
            write_group(out, g, indent);
        }
        PatternElement::Minus(g) => {
            out.push_str("MINUS ");
            write_group(out, g, indent);
        }
        PatternElement::Union(branches) => {
            for (i, b) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(" UNION ");
                }
                write_group(out, b, indent);
            }
        }
        PatternElement::Graph { name, pattern } => {
            let _ = write!(out, "GRAPH {name} ");
            write_group(out, pattern, indent);
        }
        PatternElement::Filter { expression, .. } => {
            let _ = write!(out, "FILTER {expression}");
        }
        PatternElement::Bind {
            expression,
            variable,
        } => {
            let _ = write!(out, "BIND ({expression} AS ?{variable})");
        }
        PatternElement::Values(v) => out.push_str(&v.text),
        // The enclosing group supplies the braces.
        PatternElement::SubSelect(sub) => write_select(out, sub, indent),
    }
}

fn write_select(out: &mut String, sub: &SubSelect, indent: usize) {
    out.push_str("SELECT ");
    if sub.modifiers.distinct {
        out.push_str("DISTINCT ");
    } else if sub.modifiers.reduced {
        out.push_str("REDUCED ");
    }
    if sub.select_all {
        out.push('*');
    } else {
        let parts: Vec<String> = sub
            .projection
            .iter()
            .map(|p| match &p.expression {
                Some(expr) => format!("({expr} AS ?{})", p.name),
                None => format!("?{}", p.name),
            })
            .collect();
        out.push_str(&parts.join(" "));
    }
    out.push_str(" WHERE ");
    write_group(out, &sub.pattern, indent);
    let m = &sub.modifiers;
    if let Some(g) = &m.group_by {
        let _ = write!(out, "\nGROUP BY {g}");
    }
    if let Some(h) = &m.having {
        let _ = write!(out, "\nHAVING {h}");
    }
    if let Some(o) = &m.order_by {
        let _ = write!(out, "\nORDER BY {o}");
    }
    if let Some(l) = m.limit {
        let _ = write!(out, "\nLIMIT {l}");
    }
    if let Some(o) = m.offset {
        let _ = write!(out, "\nOFFSET {o}");
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        if let Some(base) = &self.base {
            let _ = writeln!(out, "BASE <{base}>");
        }
        for (prefix, ns) in self.prefixes.iter() {
            let _ = writeln!(out, "PREFIX {prefix}: <{ns}>");
        }
        let sub = SubSelect {
            projection: self.projection.clone(),
            select_all: self.select_all,
            pattern: self.pattern.clone(),
            modifiers: self.modifiers.clone(),
        };
        write_select(&mut out, &sub, 0);
        if let Some(v) = &self.values {
            let _ = write!(out, "\n{}", v.text);
        }
        out.push('\n');
        f.write_str(&out)
    }
}
