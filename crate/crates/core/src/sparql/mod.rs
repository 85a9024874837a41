//! SPARQL SELECT parsing and basic-graph-pattern extraction.
//!
//! Only what the rule suite and the small executor need is analyzed; FILTER,
//! BIND, ORDER BY and friends survive as source text. `FILTER NOT EXISTS`
//! groups are the exception and are parsed like any other group.

mod ast;
mod lexer;
mod parser;

use thiserror::Error;

use crate::rdf::PrefixMap;

pub use ast::{
    Context, ContextFlag, GroupPattern, Modifiers, Notice, PatternElement, Projection,
    ProjectionKind, QueryAst, SubSelect, TriplePattern, ValuesBlock, VarOrTerm,
};
pub(crate) use lexer::{tokenize, Tok, Token};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum QueryError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported feature: {name}")]
    UnsupportedFeature { name: String },
    #[error("undeclared prefix '{0}:'")]
    UnknownPrefix(String),
}

/// Parse a SELECT query. Undeclared prefixes resolve only to the standard
/// ones (`rdf`, `rdfs`, `owl`, `skos`, `xsd`, `qq`).
pub fn parse_query(text: &str) -> Result<QueryAst, QueryError> {
    parse_query_with_prefixes(text, &PrefixMap::standard())
}

/// Parse a SELECT query, resolving prefixes the query does not declare
/// against `fallback`.
pub fn parse_query_with_prefixes(text: &str, fallback: &PrefixMap) -> Result<QueryAst, QueryError> {
    parser::parse(strip_code_fences(text), fallback)
}

/// Every triple pattern in the query, from every context, in textual order.
pub fn extract_bgps(ast: &QueryAst) -> Vec<TriplePattern> {
    ast.triple_patterns()
}

pub fn projected_variables(ast: &QueryAst) -> Vec<String> {
    ast.projected_variables()
}

/// Drop a surrounding Markdown code fence (```` ```sparql ... ``` ````).
pub fn strip_code_fences(text: &str) -> &str {
    let mut body = text.trim();
    if body.starts_with("```") {
        body = match body.find('\n') {
            Some(idx) => &body[idx + 1..],
            None => body.trim_start_matches('`'),
        };
    }
    if let Some(stripped) = body.trim_end().strip_suffix("```") {
        body = stripped;
    }
    body.trim()
}
