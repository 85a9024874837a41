//! Generators and independent oracles shared by the integration tests.
//!
//! The oracles deliberately avoid the library's indexes and helpers: rules
//! are nested loops over plain triple lists, the executor oracle enumerates
//! every variable assignment, and metrics are recomputed by counting.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use obqc::bench::{Classification, Quadrant};
use obqc::query_graph::{build_with, Built, ConjunctiveGraph, SkolemConfig};
use obqc::rdf::{vocab, Graph, Literal, Term, Triple};
use obqc::rules::{Bindings, CheckConfig, RuleId};
use obqc::sparql::{extract_bgps, parse_query};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

pub const EX: &str = "http://example.org/t#";

pub fn ex(local: &str) -> Term {
    Term::iri(format!("{EX}{local}"))
}

/// Runner with a fixed seed and exactly `cases` cases.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

/// Run a property, turning a failure into its message.
pub fn run_property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| match e {
        TestError::Fail(reason, value) => format!("{reason}; minimal input: {value:?}"),
        TestError::Abort(reason) => format!("aborted: {reason}"),
    })
}

// ---------------------------------------------------------------------------
// Random queries and ontologies for the rule oracle.

const CLASSES: [&str; 4] = ["C0", "C1", "C2", "C3"];
const PROPERTIES: [&str; 3] = ["p0", "p1", "p2"];
const VARIABLES: [&str; 5] = ["a", "b", "c", "Variable", "_x"];

fn iri_text(term: &Term) -> String {
    format!("<{}>", term.as_iri().unwrap())
}

fn query_subject() -> impl Strategy<Value = String> {
    prop_oneof![
        8 => prop::sample::select(&VARIABLES[..]).prop_map(|v| format!("?{v}")),
        1 => Just(iri_text(&ex("i0"))),
        1 => prop::sample::select(&CLASSES[..]).prop_map(|c| iri_text(&ex(c))),
        1 => Just("_:b0".to_string()),
    ]
}

fn query_predicate() -> impl Strategy<Value = String> {
    prop_oneof![
        8 => prop::sample::select(&PROPERTIES[..]).prop_map(|p| iri_text(&ex(p))),
        5 => Just(format!("<{}>", vocab::RDF_TYPE)),
        1 => Just(format!("<{}>", vocab::RDFS_LABEL)),
        1 => Just(format!("<{}prefLabel>", vocab::SKOS)),
        1 => Just(iri_text(&ex("undeclared"))),
        1 => Just("?p".to_string()),
    ]
}

fn query_object() -> impl Strategy<Value = String> {
    prop_oneof![
        6 => prop::sample::select(&VARIABLES[..]).prop_map(|v| format!("?{v}")),
        3 => prop::sample::select(&CLASSES[..]).prop_map(|c| iri_text(&ex(c))),
        1 => Just(iri_text(&ex("i0"))),
        1 => Just("\"v\"".to_string()),
        1 => Just("_:b0".to_string()),
    ]
}

/// A SELECT over 1..=`max_triples` patterns.
pub fn query_text(max_triples: usize) -> impl Strategy<Value = String> {
    (
        prop::collection::vec(
            (query_subject(), query_predicate(), query_object()),
            1..=max_triples,
        ),
        prop::collection::vec(any::<bool>(), VARIABLES.len()),
    )
        .prop_map(|(patterns, picks)| {
            let mut projected: Vec<String> = VARIABLES
                .iter()
                .zip(&picks)
                .filter(|(_, keep)| **keep)
                .map(|(v, _)| format!("?{v}"))
                .collect();
            if projected.is_empty() {
                projected.push("?a".into());
            }
            let body: Vec<String> = patterns
                .iter()
                .map(|(s, p, o)| format!("{s} {p} {o} ."))
                .collect();
            format!(
                "SELECT {} WHERE {{ {} }}",
                projected.join(" "),
                body.join(" ")
            )
        })
}

fn class_term() -> impl Strategy<Value = Term> {
    prop::sample::select(&CLASSES[..]).prop_map(ex)
}

fn property_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        8 => prop::sample::select(&PROPERTIES[..]).prop_map(ex),
        1 => Just(ex("undeclared")),
    ]
}

fn declared_type() -> impl Strategy<Value = Term> {
    prop_oneof![
        6 => class_term(),
        1 => Just(Term::iri(vocab::XSD_STRING)),
        1 => Just(Term::iri(format!("{}Literal", vocab::RDFS))),
        1 => Just(ex("DT")),
        1 => Just(Term::literal(Literal::plain("not an IRI"))),
        1 => Just(Term::blank("u")),
    ]
}

fn ontology_triple() -> impl Strategy<Value = Triple> {
    let t = |s: Term, p: &str, o: Term| Triple::new(s, Term::iri(p), o).unwrap();
    prop_oneof![
        6 => (property_term(), declared_type()).prop_map(move |(p, c)| t(p, vocab::RDFS_DOMAIN, c)),
        6 => (property_term(), declared_type()).prop_map(move |(p, c)| t(p, vocab::RDFS_RANGE, c)),
        3 => (class_term(), class_term()).prop_map(move |(a, b)| t(a, vocab::RDFS_SUBCLASS_OF, b)),
        2 => property_term().prop_map(move |p| t(p, vocab::RDF_TYPE, Term::iri(format!("{}ObjectProperty", vocab::OWL)))),
        1 => (property_term(), property_term()).prop_map(move |(a, b)| t(a, vocab::RDFS_SUBPROPERTY_OF, b)),
        1 => Just(t(ex("DT"), vocab::RDF_TYPE, Term::iri(format!("{}Datatype", vocab::RDFS)))),
    ]
}

pub fn ontology(max_triples: usize) -> impl Strategy<Value = Graph> {
    prop::collection::vec(ontology_triple(), 0..=max_triples)
        .prop_map(|ts| ts.into_iter().collect())
}

/// Parse and skolemize a query the way the validator does.
pub fn build_query(text: &str, ontology: &Graph, config: &SkolemConfig) -> Built {
    let ast = parse_query(text).unwrap_or_else(|e| panic!("{text}: {e}"));
    build_with(
        &extract_bgps(&ast),
        &ast.projected_variables(),
        ontology,
        config,
    )
}

// ---------------------------------------------------------------------------
// Rule oracle: the printed rule queries as nested loops.

fn iri_is(term: &Term, iri: &str) -> bool {
    term.as_iri() == Some(iri)
}

/// `a rdfs:subClassOf* b`: zero or more steps through the ontology.
pub fn sub_class_star(ontology: &[&Triple], a: &Term, b: &Term) -> bool {
    let mut seen = vec![a.clone()];
    let mut i = 0;
    while i < seen.len() {
        if &seen[i] == b {
            return true;
        }
        for t in ontology {
            if iri_is(&t.predicate, vocab::RDFS_SUBCLASS_OF)
                && t.subject == seen[i]
                && !seen.contains(&t.object)
            {
                seen.push(t.object.clone());
            }
        }
        i += 1;
    }
    false
}

fn compatible(ontology: &[&Triple], a: &Term, b: &Term) -> bool {
    sub_class_star(ontology, a, b) || sub_class_star(ontology, b, a)
}

fn bindings(pairs: &[(&str, &Term)]) -> Bindings {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), (*v).clone()))
        .collect()
}

fn declared<'a>(ontology: &[&'a Triple], p: &Term, axiom: &str) -> Vec<&'a Term> {
    ontology
        .iter()
        .filter(|t| t.subject == *p && iri_is(&t.predicate, axiom) && t.object.is_iri())
        .map(|t| &t.object)
        .collect()
}

/// Local name after the last `/` or `#`, with the skolem escape undone.
fn oracle_varname(iri: &str) -> Term {
    let local = iri.rsplit(['/', '#']).next().unwrap();
    let name = local.strip_prefix('_').unwrap_or(local);
    Term::literal(Literal::plain(name))
}

fn is_datatype(ontology: &[&Triple], range: &Term) -> bool {
    let iri = range.as_iri().unwrap_or("");
    iri.starts_with(vocab::XSD)
        || [
            "http://www.w3.org/2000/01/rdf-schema#Literal",
            "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString",
            "http://www.w3.org/1999/02/22-rdf-syntax-ns#PlainLiteral",
            "http://www.w3.org/1999/02/22-rdf-syntax-ns#XMLLiteral",
            "http://www.w3.org/1999/02/22-rdf-syntax-ns#HTML",
            "http://www.w3.org/1999/02/22-rdf-syntax-ns#JSON",
        ]
        .contains(&iri)
        || ontology.iter().any(|t| {
            t.subject == *range
                && iri_is(&t.predicate, vocab::RDF_TYPE)
                && iri_is(&t.object, "http://www.w3.org/2000/01/rdf-schema#Datatype")
        })
}

pub fn oracle_fire(rule: RuleId, g: &ConjunctiveGraph, config: &CheckConfig) -> BTreeSet<Bindings> {
    let marker_class = format!("{}Variable", g.config.namespace);
    let is_marker =
        |t: &Triple| iri_is(&t.predicate, vocab::RDF_TYPE) && iri_is(&t.object, &marker_class);
    let query: Vec<&Triple> = g.query.iter().filter(|t| !is_marker(t)).collect();
    let projected: Vec<&Term> = g
        .query
        .iter()
        .filter(|t| is_marker(t))
        .map(|t| &t.subject)
        .collect();
    let onto: Vec<&Triple> = g.ontology.iter().collect();
    let rdf_type = |t: &&&Triple| iri_is(&t.predicate, vocab::RDF_TYPE);
    let mut out = BTreeSet::new();
    match rule {
        RuleId::Domain | RuleId::Range => {
            let (axiom, node_key) = match rule {
                RuleId::Domain => (vocab::RDFS_DOMAIN, "s"),
                _ => (vocab::RDFS_RANGE, "o"),
            };
            let decl_key = if rule == RuleId::Domain {
                "dom"
            } else {
                "range"
            };
            for t1 in &query {
                let node = if rule == RuleId::Domain {
                    &t1.subject
                } else {
                    &t1.object
                };
                for t2 in query.iter().filter(rdf_type) {
                    if t2.subject != *node {
                        continue;
                    }
                    for d in declared(&onto, &t1.predicate, axiom) {
                        if !sub_class_star(&onto, &t2.object, d) {
                            out.insert(bindings(&[
                                ("p", &t1.predicate),
                                (decl_key, d),
                                (node_key, node),
                                ("class", &t2.object),
                            ]));
                        }
                    }
                }
            }
        }
        RuleId::DoubleDomain | RuleId::DoubleRange | RuleId::DomainRange => {
            for t1 in &query {
                for t2 in &query {
                    let (joined, first_axiom, second_axiom, keys) = match rule {
                        RuleId::DoubleDomain => (
                            t1.subject == t2.subject,
                            vocab::RDFS_DOMAIN,
                            vocab::RDFS_DOMAIN,
                            ["domp", "domq"],
                        ),
                        RuleId::DoubleRange => (
                            t1.object == t2.object,
                            vocab::RDFS_RANGE,
                            vocab::RDFS_RANGE,
                            ["rangep", "rangeq"],
                        ),
                        _ => (
                            t1.object == t2.subject,
                            vocab::RDFS_RANGE,
                            vocab::RDFS_DOMAIN,
                            ["rangep", "domq"],
                        ),
                    };
                    if !joined {
                        continue;
                    }
                    for a in declared(&onto, &t1.predicate, first_axiom) {
                        for b in declared(&onto, &t2.predicate, second_axiom) {
                            if !compatible(&onto, a, b) {
                                out.insert(bindings(&[
                                    ("p", &t1.predicate),
                                    (keys[0], a),
                                    ("q", &t2.predicate),
                                    (keys[1], b),
                                ]));
                            }
                        }
                    }
                }
            }
        }
        RuleId::IncorrectProperty => {
            let standard = [vocab::RDF, vocab::OWL, vocab::RDFS, vocab::SKOS];
            for t in &query {
                let p = t.predicate.as_iri().unwrap();
                if standard.iter().any(|ns| p.starts_with(ns)) {
                    continue;
                }
                if p.starts_with(&g.config.namespace) && p != marker_class {
                    continue;
                }
                let typed = onto
                    .iter()
                    .any(|o| o.subject == t.predicate && iri_is(&o.predicate, vocab::RDF_TYPE));
                let mentioned = config.accept_schema_mentions
                    && onto.iter().any(|o| {
                        o.subject == t.predicate
                            && [
                                vocab::RDFS_DOMAIN,
                                vocab::RDFS_RANGE,
                                vocab::RDFS_SUBPROPERTY_OF,
                            ]
                            .iter()
                            .any(|a| iri_is(&o.predicate, a))
                    });
                if !typed && !mentioned {
                    out.insert(bindings(&[("p", &t.predicate)]));
                }
            }
        }
        RuleId::IriOutput => {
            for t in &query {
                if !projected.contains(&&t.object) {
                    continue;
                }
                for o in &onto {
                    if o.subject == t.predicate
                        && iri_is(&o.predicate, vocab::RDFS_RANGE)
                        && o.object.is_iri()
                        && (config.include_datatype_ranges || !is_datatype(&onto, &o.object))
                    {
                        let name = oracle_varname(t.object.as_iri().unwrap());
                        out.insert(bindings(&[("varname", &name)]));
                    }
                }
            }
        }
        RuleId::SubjectOutput => {
            for t in &query {
                let excluded = config
                    .subject_output_exclusions
                    .iter()
                    .any(|x| iri_is(&t.predicate, x));
                if projected.contains(&&t.subject) && !excluded {
                    let name = oracle_varname(t.subject.as_iri().unwrap());
                    out.insert(bindings(&[("varname", &name)]));
                }
            }
        }
    }
    out
}

pub fn rule_configs() -> [CheckConfig; 3] {
    let mentions = CheckConfig {
        accept_schema_mentions: true,
        ..CheckConfig::default()
    };
    [
        CheckConfig::default(),
        CheckConfig::paper_strict(),
        mentions,
    ]
}

/// Compare `fire` with the oracle on `cases` random instances of one rule.
/// Returns how many cases fired under the default configuration.
pub fn rule_oracle_equivalence(rule: RuleId, cases: u32) -> Result<usize, String> {
    let fired = std::cell::Cell::new(0);
    run_property(cases, (query_text(6), ontology(10)), |(text, onto)| {
        let built = build_query(&text, &onto, &SkolemConfig::default());
        for (i, config) in rule_configs().into_iter().enumerate() {
            let actual: BTreeSet<Bindings> = obqc::rules::fire(rule, &built.graph, &config)
                .into_iter()
                .collect();
            let expected = oracle_fire(rule, &built.graph, &config);
            if i == 0 && !expected.is_empty() {
                fired.set(fired.get() + 1);
            }
            prop_assert_eq!(actual, expected, "{} {:?}", text, config);
        }
        Ok(())
    })?;
    if fired.get() == 0 {
        return Err(format!("{rule:?} never fired; the generator is too weak"));
    }
    Ok(fired.get())
}

// ---------------------------------------------------------------------------
// Executor oracle: exhaustive variable assignment.

const NODES: [&str; 4] = ["n0", "n1", "n2", "n3"];
const EDGES: [&str; 3] = ["e0", "e1", "e2"];

fn data_object() -> impl Strategy<Value = Term> {
    prop_oneof![
        3 => prop::sample::select(&NODES[..]).prop_map(ex),
        1 => Just(Term::literal(Literal::plain("x"))),
        1 => Just(Term::literal(Literal::typed("1", vocab::XSD_INTEGER))),
    ]
}

pub fn dataset(max: usize) -> impl Strategy<Value = Graph> {
    prop::collection::vec(
        (
            prop::sample::select(&NODES[..]).prop_map(ex),
            prop::sample::select(&EDGES[..]).prop_map(ex),
            data_object(),
        ),
        0..=max,
    )
    .prop_map(|ts| {
        ts.into_iter()
            .map(|(s, p, o)| Triple::new(s, p, o).unwrap())
            .collect()
    })
}

#[derive(Clone, Debug)]
pub enum Slot {
    Var(String),
    Blank(String),
    Const(Term),
}

fn slot_text(slot: &Slot) -> String {
    match slot {
        Slot::Var(v) => format!("?{v}"),
        Slot::Blank(b) => format!("_:{b}"),
        Slot::Const(Term::Literal(l)) if l.datatype() == Some(vocab::XSD_INTEGER) => {
            l.lexical().to_string()
        }
        Slot::Const(Term::Literal(l)) => format!("\"{}\"", l.lexical()),
        Slot::Const(t) => iri_text(t),
    }
}

#[derive(Clone, Debug)]
pub struct BgpQuery {
    pub patterns: Vec<[Slot; 3]>,
    pub projected: Vec<String>,
    pub distinct: bool,
}

impl BgpQuery {
    pub fn text(&self) -> String {
        let body: Vec<String> = self
            .patterns
            .iter()
            .map(|p| {
                format!(
                    "{} {} {} .",
                    slot_text(&p[0]),
                    slot_text(&p[1]),
                    slot_text(&p[2])
                )
            })
            .collect();
        let vars: Vec<String> = self.projected.iter().map(|v| format!("?{v}")).collect();
        format!(
            "SELECT {}{} WHERE {{ {} }}",
            if self.distinct { "DISTINCT " } else { "" },
            vars.join(" "),
            body.join(" ")
        )
    }
}

fn var_slot() -> impl Strategy<Value = Slot> {
    prop::sample::select(&["v0", "v1", "v2"][..]).prop_map(|v| Slot::Var(v.to_string()))
}

pub fn bgp_query() -> impl Strategy<Value = BgpQuery> {
    let subject = prop_oneof![
        3 => var_slot(),
        1 => prop::sample::select(&NODES[..]).prop_map(|n| Slot::Const(ex(n))),
        1 => Just(Slot::Blank("z".into())),
    ];
    let predicate = prop_oneof![
        3 => prop::sample::select(&EDGES[..]).prop_map(|e| Slot::Const(ex(e))),
        1 => var_slot(),
    ];
    let object = prop_oneof![
        3 => var_slot(),
        2 => data_object().prop_map(Slot::Const),
        1 => Just(Slot::Blank("z".into())),
    ];
    (
        prop::collection::vec((subject, predicate, object), 1..=3),
        prop::collection::vec(any::<bool>(), 3),
        any::<bool>(),
    )
        .prop_map(|(patterns, picks, distinct)| {
            let mut projected: Vec<String> = ["v0", "v1", "v2"]
                .iter()
                .zip(&picks)
                .filter(|(_, keep)| **keep)
                .map(|(v, _)| v.to_string())
                .collect();
            if projected.is_empty() {
                projected.push("v0".into());
            }
            BgpQuery {
                patterns: patterns.into_iter().map(|(s, p, o)| [s, p, o]).collect(),
                projected,
                distinct,
            }
        })
}

/// Rows as a sorted multiset, columns in projection order.
pub fn oracle_evaluate(query: &BgpQuery, data: &Graph) -> Vec<Vec<Option<Term>>> {
    let mut names: Vec<String> = Vec::new();
    for p in &query.patterns {
        for slot in p {
            let name = match slot {
                Slot::Var(v) => v.clone(),
                Slot::Blank(b) => format!("_:{b}"),
                Slot::Const(_) => continue,
            };
            if !names.contains(&name) {
                names.push(name);
            }
        }
    }
    let mut domain: Vec<Term> = Vec::new();
    for t in data.iter() {
        for term in [&t.subject, &t.predicate, &t.object] {
            if !domain.contains(term) {
                domain.push(term.clone());
            }
        }
    }
    let triples: Vec<&Triple> = data.iter().collect();
    let mut rows = Vec::new();
    let total = domain.len().pow(names.len() as u32);
    for index in 0..total {
        let mut assignment = BTreeMap::new();
        let mut rest = index;
        for name in &names {
            assignment.insert(name.clone(), domain[rest % domain.len()].clone());
            rest /= domain.len();
        }
        let value = |slot: &Slot| match slot {
            Slot::Var(v) => assignment[v].clone(),
            Slot::Blank(b) => assignment[&format!("_:{b}")].clone(),
            Slot::Const(t) => t.clone(),
        };
        let holds = query.patterns.iter().all(|p| {
            triples.iter().any(|t| {
                t.subject == value(&p[0]) && t.predicate == value(&p[1]) && t.object == value(&p[2])
            })
        });
        if holds {
            rows.push(
                query
                    .projected
                    .iter()
                    .map(|v| assignment.get(v).cloned())
                    .collect::<Vec<_>>(),
            );
        }
    }
    if query.distinct {
        let set: BTreeSet<_> = rows.into_iter().collect();
        rows = set.into_iter().collect();
    }
    rows.sort();
    rows
}

// ---------------------------------------------------------------------------
// Metrics recomputation.

pub fn classification() -> impl Strategy<Value = Classification> {
    prop::sample::select(
        &[
            Classification::AccurateFirstTime,
            Classification::AccurateWithRepair,
            Classification::Unknown,
            Classification::Inaccurate,
            Classification::Unscorable,
        ][..],
    )
}

pub fn quadrant() -> impl Strategy<Value = Quadrant> {
    prop::sample::select(&Quadrant::ALL[..])
}

/// The four formulas, spreadsheet style: COUNTIF over a column of labels.
pub struct Recomputed {
    pub ea_first_time: Option<f64>,
    pub ea_with_repairs: Option<f64>,
    pub unknown: Option<f64>,
    pub achievable: Option<f64>,
}

pub fn recompute(labels: &[Classification]) -> Recomputed {
    let count_if = |c: Classification| labels.iter().filter(|l| **l == c).count() as f64;
    let aft = count_if(Classification::AccurateFirstTime);
    let awr = count_if(Classification::AccurateWithRepair);
    let unknown = count_if(Classification::Unknown);
    let total = labels.len() as f64 - count_if(Classification::Unscorable);
    let ratio = |num: f64, den: f64| {
        if den == 0.0 {
            None
        } else {
            Some(num / den * 100.0)
        }
    };
    Recomputed {
        ea_first_time: ratio(aft, total),
        ea_with_repairs: ratio(aft + awr, total),
        unknown: ratio(unknown, total),
        achievable: ratio(awr, total - aft),
    }
}

pub fn close(a: Option<f64>, b: Option<f64>, tolerance: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tolerance,
        (None, None) => true,
        _ => false,
    }
}

/// Compare built-in evaluation with exhaustive assignment on random BGPs.
/// Returns how many cases produced at least one row.
pub fn executor_oracle_equivalence(cases: u32) -> Result<usize, String> {
    use obqc::exec::{evaluate, Dataset};
    let nonempty = std::cell::Cell::new(0);
    run_property(cases, (bgp_query(), dataset(20)), |(query, data)| {
        let text = query.text();
        let ast = parse_query(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        let table = evaluate(&ast, &Dataset::new(data.clone()))
            .map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(&table.columns, &query.projected);
        let mut actual = table.rows.clone();
        actual.sort();
        let expected = oracle_evaluate(&query, &data);
        if !expected.is_empty() {
            nonempty.set(nonempty.get() + 1);
        }
        prop_assert_eq!(actual, expected, "{}", text);
        Ok(())
    })?;
    Ok(nonempty.get())
}

/// Result comparison ignores column names and order but nothing else.
pub fn results_match_contract(cases: u32) -> Result<(), String> {
    use obqc::exec::{results_match, ResultTable};
    let cell = prop_oneof![
        3 => data_object().prop_map(Some),
        1 => Just(None),
    ];
    let table = (1usize..=4).prop_flat_map(move |width| {
        prop::collection::vec(prop::collection::vec(cell.clone(), width), 0..6)
            .prop_map(move |rows| (width, rows))
    });
    run_property(
        cases,
        (table, any::<prop::sample::Index>(), any::<u64>()),
        |((width, rows), victim, seed)| {
            let columns: Vec<String> = (0..width).map(|i| format!("c{i}")).collect();
            let expected = ResultTable {
                columns,
                rows: rows.clone(),
            };
            // A rotation plus reversed rows and fresh names must still match.
            let shift = (seed as usize) % width;
            let perm: Vec<usize> = (0..width).map(|i| (i + shift) % width).collect();
            let mut permuted = ResultTable {
                columns: (0..width).map(|i| format!("renamed{i}")).collect(),
                rows: rows
                    .iter()
                    .rev()
                    .map(|r| perm.iter().map(|&j| r[j].clone()).collect())
                    .collect(),
            };
            prop_assert!(results_match(&permuted, &expected));
            // Changing one cell to a value that occurs nowhere breaks the match.
            if !permuted.rows.is_empty() {
                let i = victim.index(permuted.rows.len() * width);
                permuted.rows[i / width][i % width] = Some(ex("fresh"));
                prop_assert!(!results_match(&permuted, &expected));
            }
            // Dropping a row breaks it too.
            if !rows.is_empty() {
                let mut shorter = expected.clone();
                shorter.rows.pop();
                prop_assert!(!results_match(&shorter, &expected));
            }
            Ok(())
        },
    )
}

// ---------------------------------------------------------------------------
// Property suites.

/// Parsing the serialized form of a parsed query gives the same tree.
pub fn prop_sparql_round_trip(cases: u32) -> Result<(), String> {
    let text = prop_oneof![query_text(6), bgp_query().prop_map(|q| q.text())];
    run_property(cases, text, |text| {
        let first = parse_query(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        let printed = first.to_sparql();
        let second =
            parse_query(&printed).map_err(|e| TestCaseError::fail(format!("{printed}: {e}")))?;
        prop_assert_eq!(&first, &second, "{}", printed);
        prop_assert_eq!(printed, second.to_sparql());
        Ok(())
    })
}

fn lexical() -> impl Strategy<Value = String> {
    "[a-z \"\\\\\n\r\té<>]{0,8}"
}

fn any_literal() -> impl Strategy<Value = Term> {
    prop_oneof![
        lexical().prop_map(|s| Term::literal(Literal::plain(s))),
        (lexical(), prop::sample::select(&["en", "en-GB", "fr"][..]))
            .prop_map(|(s, l)| Term::literal(Literal::lang(s, l))),
        (
            lexical(),
            prop::sample::select(
                &[
                    vocab::XSD_INTEGER,
                    vocab::XSD_STRING,
                    "http://example.org/t#DT"
                ][..]
            )
        )
            .prop_map(|(s, d)| Term::literal(Literal::typed(s, d))),
    ]
}

fn resource() -> impl Strategy<Value = Term> {
    prop_oneof![
        3 => "[a-z][a-z0-9]{0,4}".prop_map(|s| ex(&s)),
        1 => "[a-z][a-z0-9]{0,4}".prop_map(Term::blank),
    ]
}

fn any_triple() -> impl Strategy<Value = Triple> {
    (
        resource(),
        "[a-z]{1,3}".prop_map(|s| ex(&s)),
        prop_oneof![resource(), any_literal()],
    )
        .prop_map(|(s, p, o)| Triple::new(s, p, o).unwrap())
}

/// N-Quads output reads back to the same quads and prints identically.
pub fn prop_nquads_round_trip(cases: u32) -> Result<(), String> {
    use obqc::rdf::{parse_nquads, serialize_nquads, Quad};
    let quads = prop::collection::vec(
        (
            any_triple(),
            "[a-z]{1,3}".prop_map(|g| ex(&format!("g/{g}"))),
        ),
        0..8,
    );
    run_property(cases, quads, |quads| {
        let quads: Vec<Quad> = quads
            .into_iter()
            .map(|(triple, graph)| Quad { triple, graph })
            .collect();
        let text = serialize_nquads(&quads);
        let back = parse_nquads(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        let expected: BTreeSet<_> = quads.into_iter().collect();
        let actual: BTreeSet<_> = back.iter().cloned().collect();
        prop_assert_eq!(actual, expected, "{}", text);
        prop_assert_eq!(serialize_nquads(&back), text);
        Ok(())
    })
}

/// N-Triples lines are valid Turtle with the same meaning.
pub fn prop_turtle_reads_ntriples(cases: u32) -> Result<(), String> {
    use obqc::rdf::parse_turtle;
    run_property(
        cases,
        prop::collection::vec(any_triple(), 0..8),
        |triples| {
            let text: String = triples
                .iter()
                .map(|t| format!("{} {} {} .\n", t.subject, t.predicate, t.object))
                .collect();
            let (graph, _) = parse_turtle(&text, None)
                .map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
            let expected: Graph = triples.into_iter().collect();
            prop_assert_eq!(graph, expected, "{}", text);
            Ok(())
        },
    )
}

/// Skolemization is injective and every skolem IRI maps back to its source,
/// both through the map and through the namespace alone.
pub fn prop_skolem_bijection(cases: u32) -> Result<(), String> {
    use obqc::query_graph::SkolemMap;
    let surfaces = prop::collection::vec(
        prop_oneof![
            "[A-Za-z_][A-Za-z0-9_]{0,5}".prop_map(|v| format!("?{v}")),
            Just("?Variable".to_string()),
            "[a-z][a-z0-9]{0,4}".prop_map(|b| format!("_:{b}")),
        ],
        0..12,
    );
    let namespace = prop_oneof![
        Just(obqc::rdf::DEFAULT_QQ_NAMESPACE.to_string()),
        Just("http://example.org/qq#".to_string()),
    ];
    run_property(cases, (surfaces, namespace), |(surfaces, namespace)| {
        let config = SkolemConfig {
            namespace: namespace.clone(),
            ..SkolemConfig::default()
        };
        let mut map = SkolemMap::new(&namespace);
        let mut iris = BTreeMap::new();
        for surface in &surfaces {
            let term = match surface.strip_prefix('?') {
                Some(name) => map.skolemize_variable(name),
                None => map.skolemize_blank(&surface[2..]),
            };
            let iri = term.as_iri().unwrap().to_string();
            prop_assert!(iri.starts_with(&namespace));
            prop_assert_ne!(
                Some(iri.clone()),
                config.variable_class().as_iri().map(String::from)
            );
            prop_assert_eq!(map.deskolemize(&iri), Some(surface.as_str()));
            prop_assert_eq!(config.surface_of(&iri), Some(surface.clone()));
            iris.insert(surface.clone(), iri);
        }
        let distinct_iris: BTreeSet<_> = iris.values().collect();
        prop_assert_eq!(distinct_iris.len(), iris.len());
        prop_assert_eq!(map.len(), iris.len());
        Ok(())
    })?;
    // The graph itself carries the map: quads and recovery are lossless.
    run_property(cases, (query_text(6), ontology(10)), |(text, onto)| {
        let built = build_query(&text, &onto, &SkolemConfig::default());
        let quads = built.graph.to_quads();
        let back = ConjunctiveGraph::from_quads(&quads, built.graph.config.clone())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&back, &built.graph);
        let recovered = obqc::query_graph::SkolemMap::recover(&back);
        let original: Vec<_> = built.skolem.iter().collect();
        let rebuilt: Vec<_> = recovered.iter().collect();
        prop_assert_eq!(original, rebuilt, "{}", text);
        Ok(())
    })
}

/// Reflexive, transitive, and equal to a breadth-first search.
pub fn prop_subclass_closure(cases: u32) -> Result<(), String> {
    use obqc::rdf::{subclass_closure, ClassHierarchy};
    const N: usize = 6;
    let edges = prop::collection::vec((0..N, 0..N), 0..14);
    run_property(cases, edges, |edges| {
        let class = |i: usize| ex(&format!("K{i}"));
        let graph: Graph = edges
            .iter()
            .map(|&(a, b)| {
                Triple::iris(
                    class(a).as_iri().unwrap(),
                    vocab::RDFS_SUBCLASS_OF,
                    class(b).as_iri().unwrap(),
                )
            })
            .collect();
        let triples: Vec<&Triple> = graph.iter().collect();
        let h = ClassHierarchy::from_graph(&graph);
        for a in 0..N {
            prop_assert!(h.is_subclass(&class(a), &class(a)));
            for b in 0..N {
                let ab = h.is_subclass(&class(a), &class(b));
                prop_assert_eq!(ab, sub_class_star(&triples, &class(a), &class(b)));
                prop_assert_eq!(ab, subclass_closure(&graph, &class(a), &class(b)));
                prop_assert_eq!(
                    h.incompatible(&class(a), &class(b)),
                    !ab && !h.is_subclass(&class(b), &class(a))
                );
                for c in 0..N {
                    if ab && h.is_subclass(&class(b), &class(c)) {
                        prop_assert!(h.is_subclass(&class(a), &class(c)));
                    }
                }
            }
        }
        Ok(())
    })
}

/// Query patterns plus a shuffled copy of the same patterns.
fn shuffled_query() -> impl Strategy<Value = (String, String)> {
    query_text(6).prop_flat_map(|text| {
        let head = text[..text.find('{').unwrap() + 1].to_string();
        let body: Vec<String> = text[head.len()..text.len() - 1]
            .split(" .")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| format!("{s} ."))
            .collect();
        Just(body)
            .prop_shuffle()
            .prop_map(move |shuffled| (text.clone(), format!("{head} {} }}", shuffled.join(" "))))
    })
}

/// Reports are sorted, free of repeated messages, and independent of the
/// order in which patterns are written.
pub fn prop_report_determinism(cases: u32) -> Result<(), String> {
    use obqc::rdf::PrefixMap;
    use obqc::rules::check;
    run_property(
        cases,
        (shuffled_query(), ontology(10)),
        |((text, shuffled), onto)| {
            let prefixes = PrefixMap::standard();
            let report = |q: &str| {
                let built = build_query(q, &onto, &SkolemConfig::default());
                check(
                    &built.graph,
                    &built.skolem,
                    &prefixes,
                    &CheckConfig::default(),
                )
            };
            let first = report(&text);
            prop_assert_eq!(&first, &report(&shuffled), "{} / {}", text, shuffled);
            prop_assert_eq!(&first, &report(&text));
            prop_assert_eq!(first.passed, first.violations.is_empty());
            let keys: Vec<_> = first
                .violations
                .iter()
                .map(|v| (v.rule, &v.bindings))
                .collect();
            let mut sorted = keys.clone();
            sorted.sort();
            prop_assert_eq!(keys, sorted);
            let messages: BTreeSet<_> = first
                .violations
                .iter()
                .map(|v| (v.rule, &v.message))
                .collect();
            prop_assert_eq!(messages.len(), first.violations.len());
            Ok(())
        },
    )
}

pub fn run_record(
    quadrant: Quadrant,
    repeat: usize,
    classification: Classification,
) -> obqc::bench::RunRecord {
    use obqc::repair::{Outcome, RepairSession};
    obqc::bench::RunRecord {
        item_id: "item".into(),
        quadrant,
        repeat,
        session: RepairSession {
            question: String::new(),
            ontology_ref: String::new(),
            cycle_limit: 3,
            cycles: Vec::new(),
            outcome: Outcome::Unknown,
            error: None,
        },
        executed: None,
        classification,
        note: None,
    }
}

/// Every run lands in exactly one class, quadrant rows partition the overall
/// row, and every rate matches a count-based recomputation.
pub fn prop_classification_partition(cases: u32) -> Result<(), String> {
    use obqc::bench::{compute_metrics, Aggregation, Counts, GroupBy};
    let runs = prop::collection::vec((classification(), quadrant()), 0..40);
    run_property(cases, runs, |runs| {
        let records: Vec<_> = runs.iter().map(|&(c, q)| run_record(q, 0, c)).collect();
        let labels: Vec<Classification> = runs.iter().map(|r| r.0).collect();
        let counts = Counts::tally(&labels);
        prop_assert_eq!(
            counts.accurate_first_time
                + counts.accurate_with_repair
                + counts.unknown
                + counts.inaccurate
                + counts.unscorable,
            runs.len()
        );
        prop_assert_eq!(counts.scored + counts.unscorable, runs.len());

        let report = compute_metrics(&records, GroupBy::Quadrant, Aggregation::Pooled);
        prop_assert_eq!(report.groups.len(), 5);
        prop_assert_eq!(report.groups[0].counts, counts);
        let mut summed = Counts::default();
        for (group, q) in report.groups[1..].iter().zip(Quadrant::ALL) {
            prop_assert_eq!(&group.group, q.name());
            let own: Vec<Classification> = runs.iter().filter(|r| r.1 == q).map(|r| r.0).collect();
            check_rates(&group.rates, &recompute(&own))?;
            summed.scored += group.counts.scored;
            summed.accurate_first_time += group.counts.accurate_first_time;
            summed.accurate_with_repair += group.counts.accurate_with_repair;
            summed.unknown += group.counts.unknown;
            summed.inaccurate += group.counts.inaccurate;
            summed.unscorable += group.counts.unscorable;
        }
        prop_assert_eq!(summed, counts);
        check_rates(&report.groups[0].rates, &recompute(&labels))?;
        Ok(())
    })
}

pub fn check_rates(rates: &obqc::bench::Rates, expected: &Recomputed) -> Result<(), TestCaseError> {
    const TOLERANCE: f64 = 1e-9;
    prop_assert!(close(
        rates.ea_first_time,
        expected.ea_first_time,
        TOLERANCE
    ));
    prop_assert!(close(
        rates.ea_with_repairs,
        expected.ea_with_repairs,
        TOLERANCE
    ));
    prop_assert!(close(
        rates.unknown_with_repairs,
        expected.unknown,
        TOLERANCE
    ));
    prop_assert!(close(
        rates.achievable_improvement,
        expected.achievable,
        TOLERANCE
    ));
    let plus = expected
        .ea_with_repairs
        .zip(expected.unknown)
        .map(|(a, u)| a + u);
    prop_assert!(close(rates.accuracy_plus_unknown, plus, TOLERANCE));
    prop_assert!(close(rates.error_rate, plus.map(|p| 100.0 - p), TOLERANCE));
    Ok(())
}

/// A named property suite taking its case count.
pub type Suite = (&'static str, fn(u32) -> Result<(), String>);

/// Every property suite, by name.
pub fn property_suites() -> Vec<Suite> {
    vec![
        ("sparql parse/serialize round trip", prop_sparql_round_trip),
        ("n-quads round trip", prop_nquads_round_trip),
        ("turtle reads n-triples", prop_turtle_reads_ntriples),
        ("skolem bijection", prop_skolem_bijection),
        ("subclass closure", prop_subclass_closure),
        ("report determinism", prop_report_determinism),
        ("classification partition", prop_classification_partition),
    ]
}
