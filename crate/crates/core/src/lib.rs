//! Ontology-based checking of generated SPARQL queries.
//!
//! A query is parsed, its basic graph patterns are skolemized into a
//! conjunctive graph next to the ontology, and a fixed rule suite reports
//! every place where the query contradicts the ontology's domain, range and
//! property declarations. The repair loop feeds those explanations back to a
//! query rewriter; the benchmark harness scores the outcome.

pub mod bench;
pub mod exec;
pub mod query_graph;
pub mod rdf;
pub mod repair;
pub mod rules;
pub mod sparql;
pub mod validate;
