//! RDF data model, prefix handling, Turtle/N-Quads I/O and class-hierarchy
//! closure.

mod closure;
mod graph;
pub mod nquads;
mod prefix;
mod term;
pub mod turtle;

use std::path::Path;

use thiserror::Error;

pub use closure::{subclass_closure, ClassHierarchy};
pub use graph::{Graph, Quad, Triple};
pub use nquads::{parse_nquads, parse_nquads_as_graph, serialize_nquads};
pub use prefix::{PrefixMap, DEFAULT_QQ_NAMESPACE};
pub use term::{is_absolute_iri, vocab, Literal, Term};
pub use turtle::parse_turtle;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RdfError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared prefix '{0}:'")]
    UnknownPrefix(String),
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// A loaded ontology: its triples, the prefixes it declares and load warnings.
#[derive(Clone, Debug, Default)]
pub struct Ontology {
    pub graph: Graph,
    pub prefixes: PrefixMap,
    pub warnings: Vec<String>,
}

impl Ontology {
    pub fn from_turtle(text: &str, base: Option<&str>) -> Result<Self, RdfError> {
        let (graph, prefixes) = parse_turtle(text, base)?;
        Ok(Self::new(graph, prefixes))
    }

    pub fn new(graph: Graph, prefixes: PrefixMap) -> Self {
        let warnings = graph
            .iter()
            .filter(|t| t.predicate.as_iri() == Some(vocab::OWL_IMPORTS))
            .map(|t| format!("owl:imports {} ignored", t.object))
            .collect();
        Ontology {
            graph,
            prefixes,
            warnings,
        }
    }

    /// Load `.ttl` as Turtle, `.nq`/`.nt` as N-Quads (graph labels dropped).
    pub fn load(path: &Path) -> Result<Self, RdfError> {
        let text = std::fs::read_to_string(path).map_err(|e| RdfError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("nq" | "nt") => Ok(Self::new(
                parse_nquads_as_graph(&text)?,
                PrefixMap::standard(),
            )),
            _ => {
                let base = format!("file://{}", path.display());
                Self::from_turtle(&text, Some(&base))
            }
        }
    }
}
