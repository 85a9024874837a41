//! The ontology consistency rules and their English explanations.
//!
//! Each rule is a join over the conjunctive graph. Body rules compare the
//! query's triples with domain and range declarations; head rules look at
//! projected variables that are bound to IRIs. Marker triples for projected
//! variables are metadata and never take part in query-side matching.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::query_graph::{surface_form, ConjunctiveGraph, SkolemMap};
use crate::rdf::{vocab, ClassHierarchy, Literal, PrefixMap, Term, Triple};

pub type Bindings = BTreeMap<String, Term>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    Domain,
    Range,
    DoubleDomain,
    DoubleRange,
    DomainRange,
    IncorrectProperty,
    IriOutput,
    SubjectOutput,
}

impl RuleId {
    pub const ALL: [RuleId; 8] = [
        RuleId::Domain,
        RuleId::Range,
        RuleId::DoubleDomain,
        RuleId::DoubleRange,
        RuleId::DomainRange,
        RuleId::IncorrectProperty,
        RuleId::IriOutput,
        RuleId::SubjectOutput,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::Domain => "Domain",
            RuleId::Range => "Range",
            RuleId::DoubleDomain => "DoubleDomain",
            RuleId::DoubleRange => "DoubleRange",
            RuleId::DomainRange => "DomainRange",
            RuleId::IncorrectProperty => "IncorrectProperty",
            RuleId::IriOutput => "IriOutput",
            RuleId::SubjectOutput => "SubjectOutput",
        }
    }

    /// Human-readable label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            RuleId::Domain => "Domain",
            RuleId::Range => "Range",
            RuleId::DoubleDomain => "Double Domain",
            RuleId::DoubleRange => "Double Range",
            RuleId::DomainRange => "Domain Range",
            RuleId::IncorrectProperty => "Incorrect Property",
            RuleId::IriOutput => "IRI Output",
            RuleId::SubjectOutput => "Subject Output",
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            RuleId::Domain => "The property {p} has domain {dom}, but its subject {s} is a {class}, which isn't a subclass of {dom}.",
            RuleId::Range => "The property {p} has range {range}, but its object {o} is a {class}, which isn't a subclass of {range}.",
            RuleId::DoubleDomain => "The property {p} has domain {domp}, and {q} has domain {domq}, and these are incompatible.",
            RuleId::DoubleRange => "The property {p} has range {rangep}, and {q} has range {rangeq}, and these are incompatible.",
            RuleId::DomainRange => "The property {p} has range {rangep}, and {q} has domain {domq}, and these are incompatible with the query.",
            RuleId::IncorrectProperty => "The property {p} isn't defined in the ontology. Please only use properties from the ontology, or from a standard source like rdf:, rdfs:, owl:, or skos:",
            RuleId::IriOutput => "Your selected variable ?{varname} is an IRI; your output should be something human readable, an ID or a label.",
            RuleId::SubjectOutput => "Your selected variable ?{varname} is an IRI (the subject of a triple is always an IRI). Your output should be something human readable, an ID or a label.",
        }
    }

    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            RuleId::Domain => &["p", "dom", "s", "class"],
            RuleId::Range => &["p", "range", "o", "class"],
            RuleId::DoubleDomain => &["p", "domp", "q", "domq"],
            RuleId::DoubleRange => &["p", "rangep", "q", "rangeq"],
            RuleId::DomainRange => &["p", "rangep", "q", "domq"],
            RuleId::IncorrectProperty => &["p"],
            RuleId::IriOutput | RuleId::SubjectOutput => &["varname"],
        }
    }

    /// Head rules look at the SELECT clause rather than the body.
    pub fn is_head(self) -> bool {
        matches!(self, RuleId::IriOutput | RuleId::SubjectOutput)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s) || r.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown rule '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: RuleId,
    pub bindings: Bindings,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    /// Sort by rule then bindings and drop repeated (rule, message) pairs.
    pub fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort_by(|a, b| (a.rule, &a.bindings).cmp(&(b.rule, &b.bindings)));
        let mut seen = BTreeSet::new();
        violations.retain(|v| seen.insert((v.rule, v.message.clone())));
        CheckReport {
            passed: violations.is_empty(),
            violations,
        }
    }

    pub fn messages(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.message.as_str()).collect()
    }

    /// One message per line, as fed back to the rewriter.
    pub fn issues_text(&self) -> String {
        self.messages().join("\n")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Also accept properties that the ontology only mentions as the subject
    /// of a domain, range or subPropertyOf declaration.
    pub accept_schema_mentions: bool,
    /// Subject Output ignores occurrences under these predicates.
    pub subject_output_exclusions: Vec<String>,
    /// IRI Output also fires for datatype ranges such as `xsd:string`.
    pub include_datatype_ranges: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            accept_schema_mentions: false,
            subject_output_exclusions: vec![vocab::RDFS_LABEL.to_string()],
            include_datatype_ranges: false,
        }
    }
}

impl CheckConfig {
    /// The rules exactly as printed: no exclusions anywhere.
    pub fn paper_strict() -> Self {
        CheckConfig {
            accept_schema_mentions: false,
            subject_output_exclusions: Vec::new(),
            include_datatype_ranges: true,
        }
    }
}

const STANDARD_NAMESPACES: [&str; 4] = [vocab::RDF, vocab::OWL, vocab::RDFS, vocab::SKOS];

const DATATYPE_CLASSES: [&str; 6] = [
    "http://www.w3.org/2000/01/rdf-schema#Literal",
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString",
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#PlainLiteral",
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#XMLLiteral",
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#HTML",
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#JSON",
];
const RDFS_DATATYPE: &str = "http://www.w3.org/2000/01/rdf-schema#Datatype";

/// Whether a range names literal values rather than resources.
pub fn is_datatype_range(range: &Term, ontology: &crate::rdf::Graph) -> bool {
    let Some(iri) = range.as_iri() else {
        return false;
    };
    iri.starts_with(vocab::XSD)
        || DATATYPE_CLASSES.contains(&iri)
        || ontology
            .matching(
                Some(range),
                Some(&Term::iri(vocab::RDF_TYPE)),
                Some(&Term::iri(RDFS_DATATYPE)),
            )
            .next()
            .is_some()
}

fn is_standard(p: &Term) -> bool {
    p.as_iri()
        .is_some_and(|iri| STANDARD_NAMESPACES.iter().any(|ns| iri.starts_with(ns)))
}

/// Ontology lookups shared by all rules.
struct Schema<'g> {
    hierarchy: ClassHierarchy,
    domains: HashMap<&'g Term, Vec<&'g Term>>,
    ranges: HashMap<&'g Term, Vec<&'g Term>>,
    typed: BTreeSet<&'g Term>,
    schema_subjects: BTreeSet<&'g Term>,
}

impl<'g> Schema<'g> {
    fn new(g: &'g ConjunctiveGraph) -> Self {
        let mut schema = Schema {
            hierarchy: ClassHierarchy::from_graph(&g.ontology),
            domains: HashMap::new(),
            ranges: HashMap::new(),
            typed: BTreeSet::new(),
            schema_subjects: BTreeSet::new(),
        };
        for t in g.ontology.iter() {
            match t.predicate.as_iri() {
                Some(vocab::RDFS_DOMAIN) => {
                    schema.schema_subjects.insert(&t.subject);
                    if t.object.is_iri() {
                        schema
                            .domains
                            .entry(&t.subject)
                            .or_default()
                            .push(&t.object);
                    }
                }
                Some(vocab::RDFS_RANGE) => {
                    schema.schema_subjects.insert(&t.subject);
                    if t.object.is_iri() {
                        schema.ranges.entry(&t.subject).or_default().push(&t.object);
                    }
                }
                Some(vocab::RDFS_SUBPROPERTY_OF) => {
                    schema.schema_subjects.insert(&t.subject);
                }
                Some(vocab::RDF_TYPE) => {
                    schema.typed.insert(&t.subject);
                }
                _ => {}
            }
        }
        schema
    }

    fn domains(&self, p: &Term) -> &[&'g Term] {
        self.domains.get(p).map(Vec::as_slice).unwrap_or(&[])
    }

    fn ranges(&self, p: &Term) -> &[&'g Term] {
        self.ranges.get(p).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Query-side indexes over the non-marker triples.
struct QueryIndex<'g> {
    triples: Vec<&'g Triple>,
    by_subject: HashMap<&'g Term, Vec<&'g Triple>>,
    by_object: HashMap<&'g Term, Vec<&'g Triple>>,
    classes: HashMap<&'g Term, Vec<&'g Term>>,
    projected: BTreeSet<&'g Term>,
}

impl<'g> QueryIndex<'g> {
    fn new(g: &'g ConjunctiveGraph) -> Self {
        let mut index = QueryIndex {
            triples: Vec::new(),
            by_subject: HashMap::new(),
            by_object: HashMap::new(),
            classes: HashMap::new(),
            projected: g.projected().collect(),
        };
        for t in g.pattern_triples() {
            index.triples.push(t);
            index.by_subject.entry(&t.subject).or_default().push(t);
            index.by_object.entry(&t.object).or_default().push(t);
            if t.predicate.as_iri() == Some(vocab::RDF_TYPE) {
                index.classes.entry(&t.subject).or_default().push(&t.object);
            }
        }
        index
    }

    fn classes(&self, node: &Term) -> &[&'g Term] {
        self.classes.get(node).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn bind(pairs: &[(&str, &Term)]) -> Bindings {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), (*v).clone()))
        .collect()
}

fn varname(g: &ConjunctiveGraph, var: &Term) -> Option<Bindings> {
    let surface = g.config.surface_of(var.as_iri()?)?;
    let name = surface.strip_prefix('?')?;
    Some(bind(&[("varname", &Term::literal(Literal::plain(name)))]))
}

/// Raw binding sets for one rule, sorted and without duplicates.
pub fn fire(rule: RuleId, g: &ConjunctiveGraph, config: &CheckConfig) -> Vec<Bindings> {
    let schema = Schema::new(g);
    let index = QueryIndex::new(g);
    fire_with(rule, g, config, &schema, &index)
}

fn fire_with(
    rule: RuleId,
    g: &ConjunctiveGraph,
    config: &CheckConfig,
    schema: &Schema,
    index: &QueryIndex,
) -> Vec<Bindings> {
    let h = &schema.hierarchy;
    let mut out = BTreeSet::new();
    match rule {
        RuleId::Domain => {
            for t in &index.triples {
                for class in index.classes(&t.subject) {
                    for dom in schema.domains(&t.predicate) {
                        if !h.is_subclass(class, dom) {
                            out.insert(bind(&[
                                ("p", &t.predicate),
                                ("dom", dom),
                                ("s", &t.subject),
                                ("class", class),
                            ]));
                        }
                    }
                }
            }
        }
        RuleId::Range => {
            for t in &index.triples {
                for class in index.classes(&t.object) {
                    for range in schema.ranges(&t.predicate) {
                        if !h.is_subclass(class, range) {
                            out.insert(bind(&[
                                ("p", &t.predicate),
                                ("range", range),
                                ("o", &t.object),
                                ("class", class),
                            ]));
                        }
                    }
                }
            }
        }
        RuleId::DoubleDomain => {
            for t1 in &index.triples {
                for t2 in &index.by_subject[&t1.subject] {
                    for domp in schema.domains(&t1.predicate) {
                        for domq in schema.domains(&t2.predicate) {
                            if h.incompatible(domp, domq) {
                                out.insert(bind(&[
                                    ("p", &t1.predicate),
                                    ("domp", domp),
                                    ("q", &t2.predicate),
                                    ("domq", domq),
                                ]));
                            }
                        }
                    }
                }
            }
        }
        RuleId::DoubleRange => {
            for t1 in &index.triples {
                for t2 in &index.by_object[&t1.object] {
                    for rangep in schema.ranges(&t1.predicate) {
                        for rangeq in schema.ranges(&t2.predicate) {
                            if h.incompatible(rangep, rangeq) {
                                out.insert(bind(&[
                                    ("p", &t1.predicate),
                                    ("rangep", rangep),
                                    ("q", &t2.predicate),
                                    ("rangeq", rangeq),
                                ]));
                            }
                        }
                    }
                }
            }
        }
        RuleId::DomainRange => {
            for t1 in &index.triples {
                for t2 in index.by_subject.get(&t1.object).into_iter().flatten() {
                    for rangep in schema.ranges(&t1.predicate) {
                        for domq in schema.domains(&t2.predicate) {
                            if h.incompatible(rangep, domq) {
                                out.insert(bind(&[
                                    ("p", &t1.predicate),
                                    ("rangep", rangep),
                                    ("q", &t2.predicate),
                                    ("domq", domq),
                                ]));
                            }
                        }
                    }
                }
            }
        }
        RuleId::IncorrectProperty => {
            for t in &index.triples {
                let p = &t.predicate;
                let is_variable = p
                    .as_iri()
                    .is_some_and(|iri| g.config.surface_of(iri).is_some());
                let defined = schema.typed.contains(p)
                    || (config.accept_schema_mentions && schema.schema_subjects.contains(p));
                if !is_standard(p) && !is_variable && !defined {
                    out.insert(bind(&[("p", p)]));
                }
            }
        }
        RuleId::IriOutput => {
            for var in &index.projected {
                let resource_range = index.by_object.get(*var).into_iter().flatten().any(|t| {
                    schema.ranges(&t.predicate).iter().any(|r| {
                        config.include_datatype_ranges || !is_datatype_range(r, &g.ontology)
                    })
                });
                if resource_range {
                    out.extend(varname(g, var));
                }
            }
        }
        RuleId::SubjectOutput => {
            for var in &index.projected {
                let fires = index.by_subject.get(*var).into_iter().flatten().any(|t| {
                    !t.predicate
                        .as_iri()
                        .is_some_and(|p| config.subject_output_exclusions.iter().any(|x| x == p))
                });
                if fires {
                    out.extend(varname(g, var));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Substitute surface forms into a rule's template.
pub fn render(
    rule: RuleId,
    bindings: &Bindings,
    skolem: &SkolemMap,
    prefixes: &PrefixMap,
) -> String {
    let mut message = rule.template().to_string();
    for name in rule.placeholders() {
        let Some(term) = bindings.get(*name) else {
            continue;
        };
        let text = match term {
            Term::Literal(l) if *name == "varname" => l.lexical().to_string(),
            _ => surface_form(term, skolem, prefixes).unwrap_or_else(|_| term.to_string()),
        };
        message = message.replace(&format!("{{{name}}}"), &text);
    }
    message
}

/// Run every rule and merge the results into one ordered report.
pub fn check(
    g: &ConjunctiveGraph,
    skolem: &SkolemMap,
    prefixes: &PrefixMap,
    config: &CheckConfig,
) -> CheckReport {
    let schema = Schema::new(g);
    let index = QueryIndex::new(g);
    let violations = RuleId::ALL
        .into_iter()
        .flat_map(|rule| {
            fire_with(rule, g, config, &schema, &index)
                .into_iter()
                .map(move |bindings| (rule, bindings))
        })
        .map(|(rule, bindings)| Violation {
            rule,
            message: render(rule, &bindings, skolem, prefixes),
            bindings,
        })
        .collect();
    CheckReport::from_violations(violations)
}

#[cfg(test)]
mod tests;
