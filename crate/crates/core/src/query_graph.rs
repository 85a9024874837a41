//! Skolemized query graphs.
//!
//! Triple patterns become plain RDF by replacing every variable and blank
//! node with an IRI in a reserved namespace. The result sits next to the
//! ontology in a two-graph dataset that the rules join over.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdf::{nquads, vocab, Graph, PrefixMap, Quad, Term, Triple, DEFAULT_QQ_NAMESPACE};
use crate::sparql::{TriplePattern, VarOrTerm};

pub const DEFAULT_QUERY_GRAPH: &str = "tag:obqc,2024:graph/query";
pub const DEFAULT_ONTOLOGY_GRAPH: &str = "tag:obqc,2024:graph/ontology";

/// Local name of the marker class for projected variables.
const VARIABLE_CLASS: &str = "Variable";

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GraphError {
    #[error("skolem IRI <{0}> is not in the skolem map")]
    UnknownSkolem(String),
    #[error("quad in unexpected graph {0}")]
    UnexpectedGraph(String),
}

/// Namespace and graph names used when building a conjunctive graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkolemConfig {
    pub namespace: String,
    pub query_graph: String,
    pub ontology_graph: String,
}

impl Default for SkolemConfig {
    fn default() -> Self {
        SkolemConfig {
            namespace: DEFAULT_QQ_NAMESPACE.to_string(),
            query_graph: DEFAULT_QUERY_GRAPH.to_string(),
            ontology_graph: DEFAULT_ONTOLOGY_GRAPH.to_string(),
        }
    }
}

impl SkolemConfig {
    pub fn variable_class(&self) -> Term {
        Term::iri(format!("{}{VARIABLE_CLASS}", self.namespace))
    }

    /// Surface form encoded in a skolem IRI, by inverting the naming scheme.
    /// `None` for IRIs outside the namespace and for the marker class.
    pub fn surface_of(&self, iri: &str) -> Option<String> {
        let local = iri.strip_prefix(&self.namespace)?;
        if local == VARIABLE_CLASS || local.is_empty() {
            None
        } else if let Some(label) = local.strip_prefix('-') {
            Some(format!("_:{label}"))
        } else if let Some(name) = local.strip_prefix('_') {
            Some(format!("?{name}"))
        } else {
            Some(format!("?{local}"))
        }
    }
}

/// Bijection between query-surface names (`?x`, `_:b`) and skolem IRIs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SkolemMap {
    namespace: String,
    forward: BTreeMap<String, String>,
    reverse: BTreeMap<String, String>,
}

impl SkolemMap {
    pub fn new(namespace: impl Into<String>) -> Self {
        SkolemMap {
            namespace: namespace.into(),
            ..Default::default()
        }
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    /// IRI for a variable name. Names that could collide with the marker
    /// class (or with the escaped form itself) get a `_` prefix.
    fn variable_iri(&self, name: &str) -> String {
        if name == VARIABLE_CLASS || name.starts_with('_') {
            format!("{}_{name}", self.namespace)
        } else {
            format!("{}{name}", self.namespace)
        }
    }

    fn blank_iri(&self, label: &str) -> String {
        format!("{}-{label}", self.namespace)
    }

    fn insert(&mut self, surface: String, iri: String) -> Term {
        self.reverse
            .entry(iri.clone())
            .or_insert_with(|| surface.clone());
        self.forward.entry(surface).or_insert_with(|| iri.clone());
        Term::iri(iri)
    }

    pub fn skolemize_variable(&mut self, name: &str) -> Term {
        let iri = self.variable_iri(name);
        self.insert(format!("?{name}"), iri)
    }

    pub fn skolemize_blank(&mut self, label: &str) -> Term {
        let iri = self.blank_iri(label);
        self.insert(format!("_:{label}"), iri)
    }

    /// Skolem IRI for a surface form such as `?agent` or `_:b0`.
    pub fn get(&self, surface: &str) -> Option<&str> {
        self.forward.get(surface).map(String::as_str)
    }

    /// Surface form for a skolem IRI.
    pub fn deskolemize(&self, iri: &str) -> Option<&str> {
        self.reverse.get(iri).map(String::as_str)
    }

    /// The bare variable name (`agent`) for a skolemized variable.
    pub fn variable_name(&self, iri: &str) -> Option<&str> {
        self.deskolemize(iri).and_then(|s| s.strip_prefix('?'))
    }

    /// Whether an IRI lies in the skolem namespace (the marker class too).
    pub fn in_namespace(&self, iri: &str) -> bool {
        iri.starts_with(&self.namespace)
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.forward.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
    /// Rebuild the map for a graph that was not built here (for instance one
    /// read back from N-Quads).
    pub fn recover(graph: &ConjunctiveGraph) -> Self {
        let mut map = SkolemMap::new(&graph.config.namespace);
        for t in graph.query.iter() {
            for term in [&t.subject, &t.predicate, &t.object] {
                if let Some(iri) = term.as_iri() {
                    if let Some(surface) = graph.config.surface_of(iri) {
                        map.insert(surface, iri.to_string());
                    }
                }
            }
        }
        map
    }
}

/// The `:query` and `:ontology` graphs queried together.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjunctiveGraph {
    pub query: Graph,
    pub ontology: Graph,
    pub config: SkolemConfig,
}

impl ConjunctiveGraph {
    pub fn variable_class(&self) -> Term {
        self.config.variable_class()
    }

    /// `qq:v rdf:type qq:Variable`
    pub fn is_marker(&self, triple: &Triple) -> bool {
        triple.predicate.as_iri() == Some(vocab::RDF_TYPE)
            && triple
                .object
                .as_iri()
                .and_then(|o| o.strip_prefix(&self.config.namespace))
                == Some(VARIABLE_CLASS)
    }

    /// Query triples that came from the user's patterns.
    pub fn pattern_triples(&self) -> impl Iterator<Item = &Triple> {
        self.query.iter().filter(|t| !self.is_marker(t))
    }

    /// Skolem IRIs of the projected variables.
    pub fn projected(&self) -> impl Iterator<Item = &Term> {
        self.query
            .iter()
            .filter(|t| self.is_marker(t))
            .map(|t| &t.subject)
    }

    pub fn to_quads(&self) -> Vec<Quad> {
        let q = self
            .query
            .iter()
            .map(|t| t.clone().in_graph(&self.config.query_graph));
        let o = self
            .ontology
            .iter()
            .map(|t| t.clone().in_graph(&self.config.ontology_graph));
        q.chain(o).collect()
    }

    pub fn to_nquads(&self) -> String {
        nquads::serialize_nquads(&self.to_quads())
    }

    pub fn from_quads(quads: &[Quad], config: SkolemConfig) -> Result<Self, GraphError> {
        let mut query = Graph::new();
        let mut ontology = Graph::new();
        for quad in quads {
            match quad.graph.as_iri() {
                Some(g) if g == config.query_graph => query.insert(quad.triple.clone()),
                Some(g) if g == config.ontology_graph => ontology.insert(quad.triple.clone()),
                _ => return Err(GraphError::UnexpectedGraph(quad.graph.to_string())),
            };
        }
        Ok(ConjunctiveGraph {
            query,
            ontology,
            config,
        })
    }
}

/// Non-fatal observations made while building.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuildNotice {
    /// The predicate is a variable; the triple is kept but cannot match
    /// any ontology declaration.
    PredicateVariable { pattern: String },
    /// A literal in subject position cannot be represented as RDF.
    LiteralSubject { pattern: String },
}

impl std::fmt::Display for BuildNotice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BuildNotice::PredicateVariable { pattern } => {
                write!(f, "variable in predicate position: {pattern}")
            }
            BuildNotice::LiteralSubject { pattern } => {
                write!(f, "literal subject skipped: {pattern}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Built {
    pub graph: ConjunctiveGraph,
    pub skolem: SkolemMap,
    pub notices: Vec<BuildNotice>,
}

pub fn build(bgps: &[TriplePattern], projected: &[String], ontology: &Graph) -> Built {
    build_with(bgps, projected, ontology, &SkolemConfig::default())
}

pub fn build_with(
    bgps: &[TriplePattern],
    projected: &[String],
    ontology: &Graph,
    config: &SkolemConfig,
) -> Built {
    let mut skolem = SkolemMap::new(&config.namespace);
    let mut query = Graph::new();
    let mut notices = Vec::new();

    for pattern in bgps {
        let text = format!(
            "{} {} {}",
            pattern.subject, pattern.predicate, pattern.object
        );
        if matches!(pattern.predicate, VarOrTerm::Var(_)) {
            notices.push(BuildNotice::PredicateVariable {
                pattern: text.clone(),
            });
        }
        let s = skolem_term(&mut skolem, &pattern.subject);
        let p = skolem_term(&mut skolem, &pattern.predicate);
        let o = skolem_term(&mut skolem, &pattern.object);
        match Triple::new(s, p, o) {
            Ok(t) => {
                query.insert(t);
            }
            Err(_) => notices.push(BuildNotice::LiteralSubject { pattern: text }),
        }
    }

    let class = config.variable_class();
    for name in projected {
        let v = skolem.skolemize_variable(name);
        query.insert(Triple {
            subject: v,
            predicate: Term::iri(vocab::RDF_TYPE),
            object: class.clone(),
        });
    }

    Built {
        graph: ConjunctiveGraph {
            query,
            ontology: ontology.clone(),
            config: config.clone(),
        },
        skolem,
        notices,
    }
}

fn skolem_term(skolem: &mut SkolemMap, t: &VarOrTerm) -> Term {
    match t {
        VarOrTerm::Var(name) => skolem.skolemize_variable(name),
        VarOrTerm::Term(Term::BlankNode(label)) => skolem.skolemize_blank(label),
        VarOrTerm::Term(term) => term.clone(),
    }
}

/// Human-facing form of a term: skolem IRIs become `?name`, other IRIs are
/// compacted when a prefix matches.
pub fn surface_form(
    term: &Term,
    skolem: &SkolemMap,
    prefixes: &PrefixMap,
) -> Result<String, GraphError> {
    match term {
        Term::Iri(iri) if skolem.in_namespace(iri) => match skolem.deskolemize(iri) {
            Some(surface) => Ok(surface.to_string()),
            None if iri.strip_prefix(skolem.namespace()) == Some(VARIABLE_CLASS) => {
                Ok(prefixes.compact(iri).unwrap_or_else(|| format!("<{iri}>")))
            }
            None => Err(GraphError::UnknownSkolem(iri.clone())),
        },
        Term::Iri(iri) => Ok(prefixes.compact(iri).unwrap_or_else(|| format!("<{iri}>"))),
        other => Ok(other.to_string()),
    }
}

pub fn deskolemize_bindings(
    skolem: &SkolemMap,
    bindings: &BTreeMap<String, Term>,
    prefixes: &PrefixMap,
) -> Result<BTreeMap<String, String>, GraphError> {
    bindings
        .iter()
        .map(|(k, v)| Ok((k.clone(), surface_form(v, skolem, prefixes)?)))
        .collect()
}
