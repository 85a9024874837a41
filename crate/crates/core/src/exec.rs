//! A small in-memory SELECT evaluator and answer comparison.
//!
//! Supported: basic graph pattern joins, OPTIONAL, FILTER with comparisons
//! joined by `&&`, `||` and `!`, DISTINCT and LIMIT. Everything else is
//! reported as unsupported so callers can fall back to an external engine.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdf::{parse_nquads_as_graph, turtle, Graph, Literal, PrefixMap, RdfError, Term};
use crate::sparql::{
    tokenize, GroupPattern, PatternElement, ProjectionKind, QueryAst, Tok, Token, TriplePattern,
    VarOrTerm,
};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("unsupported for execution: {feature}")]
    UnsupportedForExecution { feature: String },
    #[error("external executor failed: {0}")]
    External(String),
}

fn unsupported(feature: &str) -> ExecError {
    ExecError::UnsupportedForExecution {
        feature: feature.to_string(),
    }
}

/// Plain instance data to run queries against.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub data: Graph,
}

impl Dataset {
    pub fn new(data: Graph) -> Self {
        Dataset { data }
    }

    /// `.nq`/`.nt` as N-Quads, anything else as Turtle.
    pub fn load(path: &Path) -> Result<Self, RdfError> {
        let text = std::fs::read_to_string(path).map_err(|e| RdfError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let data = match path.extension().and_then(|e| e.to_str()) {
            Some("nq" | "nt") => parse_nquads_as_graph(&text)?,
            _ => turtle::parse_turtle(&text, Some(&format!("file://{}", path.display())))?.0,
        };
        Ok(Dataset { data })
    }
}

/// Query results; `None` cells are unbound. Rows keep their multiplicity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<Term>>>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        ResultTable {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Runs queries the built-in evaluator cannot, e.g. against a SPARQL server.
pub trait ExternalExecutor: Send + Sync {
    fn execute(&self, query: &str) -> Result<ResultTable, ExecError>;
}

type Solution = BTreeMap<String, Term>;

pub fn evaluate(ast: &QueryAst, data: &Dataset) -> Result<ResultTable, ExecError> {
    let m = &ast.modifiers;
    if m.group_by.is_some() {
        return Err(unsupported("GROUP BY"));
    }
    if m.having.is_some() {
        return Err(unsupported("HAVING"));
    }
    if m.offset.is_some() {
        return Err(unsupported("OFFSET"));
    }
    if m.order_by.is_some() && m.limit.is_some() {
        return Err(unsupported("ORDER BY with LIMIT"));
    }
    if ast.values.is_some() {
        return Err(unsupported("VALUES"));
    }
    if ast
        .projection
        .iter()
        .any(|p| p.kind == ProjectionKind::Expression)
    {
        return Err(unsupported("projection expression"));
    }

    let eval = Evaluator {
        data: &data.data,
        prefixes: &ast.prefixes,
        base: ast.base.as_deref(),
    };
    let solutions = eval.group(&ast.pattern)?;

    let columns = ast.projected_variables();
    let mut table = ResultTable::new(columns.clone());
    let mut seen = BTreeSet::new();
    for sol in solutions {
        let row: Vec<Option<Term>> = columns.iter().map(|c| sol.get(c).cloned()).collect();
        if m.distinct && !seen.insert(row.clone()) {
            continue;
        }
        table.rows.push(row);
        if m.limit.is_some_and(|l| table.rows.len() as u64 >= l) {
            break;
        }
    }
    if m.limit == Some(0) {
        table.rows.clear();
    }
    Ok(table)
}

struct Evaluator<'a> {
    data: &'a Graph,
    prefixes: &'a PrefixMap,
    base: Option<&'a str>,
}

impl Evaluator<'_> {
    fn group(&self, g: &GroupPattern) -> Result<Vec<Solution>, ExecError> {
        let (mut sols, filters) = self.group_parts(g)?;
        sols.retain(|s| filters.iter().all(|f| f.holds(s)));
        Ok(sols)
    }

    /// Solutions of a group before its filters, plus those filters.
    fn group_parts(&self, g: &GroupPattern) -> Result<(Vec<Solution>, Vec<Filter>), ExecError> {
        let mut sols = vec![Solution::new()];
        let mut filters = Vec::new();
        for element in &g.elements {
            match element {
                PatternElement::Triple(t) => sols = self.join_pattern(sols, t),
                PatternElement::Group(inner) => {
                    let right = self.group(inner)?;
                    sols = join(&sols, &right);
                }
                PatternElement::Optional(inner) => {
                    let (right, opt_filters) = self.group_parts(inner)?;
                    sols = left_join(sols, &right, &opt_filters);
                }
                PatternElement::Filter {
                    expression,
                    not_exists,
                } => {
                    if !not_exists.is_empty() {
                        return Err(unsupported("FILTER NOT EXISTS"));
                    }
                    filters.push(self.parse_filter(expression)?);
                }
                PatternElement::Union(_) => return Err(unsupported("UNION")),
                PatternElement::Minus(_) => return Err(unsupported("MINUS")),
                PatternElement::Graph { .. } => return Err(unsupported("GRAPH")),
                PatternElement::Bind { .. } => return Err(unsupported("BIND")),
                PatternElement::Values(_) => return Err(unsupported("VALUES")),
                PatternElement::SubSelect(_) => return Err(unsupported("subquery")),
            }
        }
        Ok((sols, filters))
    }

    fn join_pattern(&self, sols: Vec<Solution>, t: &TriplePattern) -> Vec<Solution> {
        let mut out = Vec::new();
        for sol in &sols {
            let s = lookup(&t.subject, sol);
            let p = lookup(&t.predicate, sol);
            let o = lookup(&t.object, sol);
            for triple in self.data.matching(s.as_ref(), p.as_ref(), o.as_ref()) {
                let mut next = sol.clone();
                let ok = extend(&mut next, &t.subject, &triple.subject)
                    && extend(&mut next, &t.predicate, &triple.predicate)
                    && extend(&mut next, &t.object, &triple.object);
                if ok {
                    out.push(next);
                }
            }
        }
        out
    }

    fn parse_filter(&self, expression: &str) -> Result<Filter, ExecError> {
        let tokens = tokenize(expression).map_err(|_| unsupported("FILTER expression"))?;
        let mut parser = FilterParser {
            tokens: &tokens,
            pos: 0,
            prefixes: self.prefixes,
            base: self.base,
        };
        let filter = parser
            .or()
            .ok_or_else(|| unsupported("FILTER expression"))?;
        if parser.pos != tokens.len() {
            return Err(unsupported("FILTER expression"));
        }
        Ok(filter)
    }
}

/// Blank nodes in patterns behave like variables that cannot be projected.
fn slot_name(t: &VarOrTerm) -> Option<String> {
    match t {
        VarOrTerm::Var(v) => Some(v.clone()),
        VarOrTerm::Term(Term::BlankNode(b)) => Some(format!("_:{b}")),
        VarOrTerm::Term(_) => None,
    }
}

fn lookup(t: &VarOrTerm, sol: &Solution) -> Option<Term> {
    match slot_name(t) {
        Some(name) => sol.get(&name).cloned(),
        None => match t {
            VarOrTerm::Term(term) => Some(term.clone()),
            VarOrTerm::Var(_) => None,
        },
    }
}

fn extend(sol: &mut Solution, slot: &VarOrTerm, value: &Term) -> bool {
    let Some(name) = slot_name(slot) else {
        return true;
    };
    match sol.get(&name) {
        Some(bound) => bound == value,
        None => {
            sol.insert(name, value.clone());
            true
        }
    }
}

fn compatible(a: &Solution, b: &Solution) -> bool {
    a.iter().all(|(k, v)| b.get(k).is_none_or(|w| w == v))
}

fn merge(a: &Solution, b: &Solution) -> Solution {
    let mut out = a.clone();
    out.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
    out
}

fn join(left: &[Solution], right: &[Solution]) -> Vec<Solution> {
    let mut out = Vec::new();
    for l in left {
        for r in right {
            if compatible(l, r) {
                out.push(merge(l, r));
            }
        }
    }
    out
}

fn left_join(left: Vec<Solution>, right: &[Solution], filters: &[Filter]) -> Vec<Solution> {
    let mut out = Vec::new();
    for l in left {
        let mut matched = false;
        for r in right {
            if compatible(&l, r) {
                let m = merge(&l, r);
                if filters.iter().all(|f| f.holds(&m)) {
                    out.push(m);
                    matched = true;
                }
            }
        }
        if !matched {
            out.push(l);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CompareOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

#[derive(Clone, Debug)]
enum Operand {
    Var(String),
    Const(Term),
}

#[derive(Clone, Debug)]
enum Filter {
    Compare(Operand, CompareOp, Operand),
    Not(Box<Filter>),
    And(Box<Filter>, Box<Filter>),
    Or(Box<Filter>, Box<Filter>),
}

impl Filter {
    fn holds(&self, sol: &Solution) -> bool {
        self.eval(sol) == Some(true)
    }

    /// Three-valued: `None` is an evaluation error (e.g. an unbound variable).
    fn eval(&self, sol: &Solution) -> Option<bool> {
        match self {
            Filter::Compare(a, op, b) => {
                let value = |o: &Operand| match o {
                    Operand::Var(v) => sol.get(v).cloned(),
                    Operand::Const(t) => Some(t.clone()),
                };
                compare(&value(a)?, *op, &value(b)?)
            }
            Filter::Not(f) => f.eval(sol).map(|b| !b),
            Filter::And(a, b) => match (a.eval(sol), b.eval(sol)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Filter::Or(a, b) => match (a.eval(sol), b.eval(sol)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
        }
    }
}

fn numeric(t: &Term) -> Option<f64> {
    match t {
        Term::Literal(l) => l.as_number(),
        _ => None,
    }
}

fn compare(a: &Term, op: CompareOp, b: &Term) -> Option<bool> {
    use std::cmp::Ordering;
    let ordering: Option<Ordering> = match (a, b) {
        _ if numeric(a).is_some() && numeric(b).is_some() => {
            numeric(a).unwrap().partial_cmp(&numeric(b).unwrap())
        }
        (Term::Literal(x), Term::Literal(y))
            if x.datatype() == y.datatype() && x.language() == y.language() =>
        {
            Some(x.lexical().cmp(y.lexical()))
        }
        (Term::Iri(x), Term::Iri(y)) => Some(x.cmp(y)),
        _ => None,
    };
    match (op, ordering) {
        (CompareOp::Eq, Some(o)) => Some(o == Ordering::Equal),
        (CompareOp::Ne, Some(o)) => Some(o != Ordering::Equal),
        (CompareOp::Eq, None) => Some(a == b),
        (CompareOp::Ne, None) => Some(a != b),
        (CompareOp::Lt, o) => o.map(|o| o == Ordering::Less),
        (CompareOp::Gt, o) => o.map(|o| o == Ordering::Greater),
        (CompareOp::Le, o) => o.map(|o| o != Ordering::Greater),
        (CompareOp::Ge, o) => o.map(|o| o != Ordering::Less),
    }
}

struct FilterParser<'a> {
    tokens: &'a [Token],
    pos: usize,
    prefixes: &'a PrefixMap,
    base: Option<&'a str>,
}

impl FilterParser<'_> {
    fn peek_punct(&self, p: &str) -> bool {
        self.tokens.get(self.pos).is_some_and(|t| t.is_punct(p))
    }

    fn eat(&mut self, p: &str) -> bool {
        let hit = self.peek_punct(p);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn or(&mut self) -> Option<Filter> {
        let mut left = self.and()?;
        while self.eat("||") {
            left = Filter::Or(Box::new(left), Box::new(self.and()?));
        }
        Some(left)
    }

    fn and(&mut self) -> Option<Filter> {
        let mut left = self.unary()?;
        while self.eat("&&") {
            left = Filter::And(Box::new(left), Box::new(self.unary()?));
        }
        Some(left)
    }

    fn unary(&mut self) -> Option<Filter> {
        if self.eat("!") {
            return Some(Filter::Not(Box::new(self.unary()?)));
        }
        if self.eat("(") {
            let inner = self.or()?;
            return self.eat(")").then_some(inner);
        }
        let a = self.operand()?;
        let op = match &self.tokens.get(self.pos)?.tok {
            Tok::Punct("=") => CompareOp::Eq,
            Tok::Punct("!=") => CompareOp::Ne,
            Tok::Punct("<") => CompareOp::Lt,
            Tok::Punct(">") => CompareOp::Gt,
            Tok::Punct("<=") => CompareOp::Le,
            Tok::Punct(">=") => CompareOp::Ge,
            _ => return None,
        };
        self.pos += 1;
        let b = self.operand()?;
        Some(Filter::Compare(a, op, b))
    }

    fn operand(&mut self) -> Option<Operand> {
        if let Some(Tok::Var(v)) = self.tokens.get(self.pos).map(|t| &t.tok) {
            self.pos += 1;
            return Some(Operand::Var(v.clone()));
        }
        let (term, used) = parse_term(&self.tokens[self.pos..], self.prefixes, self.base)?;
        self.pos += used;
        Some(Operand::Const(term))
    }
}

/// A constant term at the start of `tokens` and the number of tokens used.
fn parse_term(tokens: &[Token], prefixes: &PrefixMap, base: Option<&str>) -> Option<(Term, usize)> {
    let expand = |tok: &Tok| -> Option<String> {
        match tok {
            Tok::Iri(iri) => Some(match base {
                Some(b) if !crate::rdf::is_absolute_iri(iri) => turtle::resolve_relative(b, iri),
                _ => iri.clone(),
            }),
            Tok::Prefixed { prefix, local } => prefixes.expand(&format!("{prefix}:{local}")).ok(),
            _ => None,
        }
    };
    let first = &tokens.first()?.tok;
    match first {
        Tok::Iri(_) | Tok::Prefixed { .. } => Some((Term::iri(expand(first)?), 1)),
        Tok::Str(s) => match tokens.get(1).map(|t| &t.tok) {
            Some(Tok::LangTag(lang)) => Some((Term::literal(Literal::lang(s, lang)), 2)),
            Some(Tok::Punct("^^")) => {
                let dt = expand(&tokens.get(2)?.tok)?;
                Some((Term::literal(Literal::typed(s, dt)), 3))
            }
            _ => Some((Term::literal(Literal::plain(s)), 1)),
        },
        Tok::Number { text, datatype } => Some((Term::literal(Literal::typed(text, *datatype)), 1)),
        Tok::Punct(sign @ ("-" | "+")) => match tokens.get(1).map(|t| &t.tok) {
            Some(Tok::Number { text, datatype }) => {
                let text = if *sign == "-" {
                    format!("-{text}")
                } else {
                    text.clone()
                };
                Some((Term::literal(Literal::typed(text, *datatype)), 2))
            }
            _ => None,
        },
        Tok::Word(w) if w == "true" || w == "false" => Some((
            Term::literal(Literal::typed(w, crate::rdf::vocab::XSD_BOOLEAN)),
            1,
        )),
        _ => None,
    }
}

fn row_counts<'a>(
    rows: impl Iterator<Item = Vec<&'a Option<Term>>>,
) -> BTreeMap<Vec<&'a Option<Term>>, usize> {
    let mut counts = BTreeMap::new();
    for row in rows {
        *counts.entry(row).or_insert(0) += 1;
    }
    counts
}

/// Largest column count for which every permutation is tried.
pub const MAX_PERMUTED_COLUMNS: usize = 8;

/// Equal as multisets of rows under some reordering of `actual`'s columns.
/// Column names are ignored.
pub fn results_match(actual: &ResultTable, expected: &ResultTable) -> bool {
    let n = expected.columns.len();
    if actual.columns.len() != n || actual.rows.len() != expected.rows.len() {
        return false;
    }
    if actual
        .rows
        .iter()
        .chain(&expected.rows)
        .any(|r| r.len() != n)
    {
        return false;
    }
    let target = row_counts(expected.rows.iter().map(|r| r.iter().collect()));
    fn column(t: &ResultTable, i: usize) -> Vec<&Option<Term>> {
        let mut values: Vec<&Option<Term>> = t.rows.iter().map(|r| &r[i]).collect();
        values.sort();
        values
    }
    let actual_cols: Vec<_> = (0..n).map(|i| column(actual, i)).collect();
    let expected_cols: Vec<_> = (0..n).map(|i| column(expected, i)).collect();

    let matches = |perm: &[usize]| {
        row_counts(
            actual
                .rows
                .iter()
                .map(|r| perm.iter().map(|&j| &r[j]).collect()),
        ) == target
    };
    if n > MAX_PERMUTED_COLUMNS {
        let identity: Vec<usize> = (0..n).collect();
        return matches(&identity);
    }

    // Backtracking over permutations; position i takes an actual column
    // holding the same multiset of values as expected column i.
    fn search(
        i: usize,
        perm: &mut Vec<usize>,
        used: &mut [bool],
        ok: &dyn Fn(usize, usize) -> bool,
        done: &dyn Fn(&[usize]) -> bool,
    ) -> bool {
        if i == used.len() {
            return done(perm);
        }
        for j in 0..used.len() {
            if !used[j] && ok(i, j) {
                used[j] = true;
                perm.push(j);
                if search(i + 1, perm, used, ok, done) {
                    return true;
                }
                perm.pop();
                used[j] = false;
            }
        }
        false
    }
    let ok = |i: usize, j: usize| actual_cols[j] == expected_cols[i];
    search(
        0,
        &mut Vec::with_capacity(n),
        &mut vec![false; n],
        &ok,
        &matches,
    )
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum AnswerError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("CSV error at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("JSON error: {0}")]
    Json(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    Width {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("unsupported answer format: {0}")]
    Format(String),
}

/// Read one answer cell: empty is unbound; IRIs, prefixed names, quoted
/// literals, numbers and booleans are read as terms; any other text is a
/// plain literal.
pub fn parse_cell(text: &str, prefixes: &PrefixMap) -> Option<Term> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Ok(tokens) = tokenize(text) {
        if let Some((term, used)) = parse_term(&tokens, prefixes, None) {
            if used == tokens.len() {
                return Some(term);
            }
        }
    }
    Some(Term::literal(Literal::plain(text)))
}

/// Header row names the columns.
pub fn parse_answer_csv(text: &str, prefixes: &PrefixMap) -> Result<ResultTable, AnswerError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let csv_err = |e: csv::Error| AnswerError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let columns: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().trim_start_matches(['?', '$']).to_string())
        .collect();
    let mut table = ResultTable::new(columns);
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != table.columns.len() {
            return Err(AnswerError::Width {
                row: i + 1,
                found: record.len(),
                expected: table.columns.len(),
            });
        }
        table
            .rows
            .push(record.iter().map(|c| parse_cell(c, prefixes)).collect());
    }
    Ok(table)
}

/// `{"columns": [...], "rows": [[cell or null, ...], ...]}`
pub fn parse_answer_json(text: &str, prefixes: &PrefixMap) -> Result<ResultTable, AnswerError> {
    #[derive(Deserialize)]
    struct Raw {
        columns: Vec<String>,
        rows: Vec<Vec<Option<serde_json::Value>>>,
    }
    let raw: Raw = serde_json::from_str(text).map_err(|e| AnswerError::Json(e.to_string()))?;
    let mut table = ResultTable::new(raw.columns);
    for (i, row) in raw.rows.into_iter().enumerate() {
        if row.len() != table.columns.len() {
            return Err(AnswerError::Width {
                row: i + 1,
                found: row.len(),
                expected: table.columns.len(),
            });
        }
        table.rows.push(
            row.into_iter()
                .map(|cell| match cell {
                    None => None,
                    Some(serde_json::Value::String(s)) => parse_cell(&s, prefixes),
                    Some(other) => parse_cell(&other.to_string(), prefixes),
                })
                .collect(),
        );
    }
    Ok(table)
}

pub fn load_answer(path: &Path, prefixes: &PrefixMap) -> Result<ResultTable, AnswerError> {
    let text = std::fs::read_to_string(path).map_err(|e| AnswerError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => parse_answer_csv(&text, prefixes),
        Some("json") => parse_answer_json(&text, prefixes),
        other => Err(AnswerError::Format(other.unwrap_or("").to_string())),
    }
}
