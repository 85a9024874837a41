//! Parse, build and check in one call.

use crate::query_graph::{build_with, Built, SkolemConfig};
use crate::rdf::{Ontology, PrefixMap};
use crate::rules::{check, CheckConfig, CheckReport};
use crate::sparql::{extract_bgps, parse_query_with_prefixes, QueryAst, QueryError};

/// Checks query text against one ontology.
#[derive(Clone, Debug)]
pub struct Validator {
    pub ontology: Ontology,
    pub config: CheckConfig,
    pub skolem: SkolemConfig,
}

/// Everything produced while checking one query.
#[derive(Clone, Debug)]
pub struct Validation {
    pub ast: QueryAst,
    pub built: Built,
    pub report: CheckReport,
}

impl Validation {
    /// Parser and builder notices as display strings.
    pub fn notices(&self) -> Vec<String> {
        self.ast
            .notices
            .iter()
            .map(ToString::to_string)
            .chain(self.built.notices.iter().map(ToString::to_string))
            .collect()
    }
}

impl Validator {
    pub fn new(ontology: Ontology) -> Self {
        Validator {
            ontology,
            config: CheckConfig::default(),
            skolem: SkolemConfig::default(),
        }
    }

    pub fn with_config(mut self, config: CheckConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_skolem_config(mut self, skolem: SkolemConfig) -> Self {
        self.skolem = skolem;
        self
    }

    /// Prefixes used to resolve undeclared query prefixes and to compact
    /// IRIs in messages.
    pub fn prefixes(&self) -> PrefixMap {
        let mut map = self.ontology.prefixes.clone();
        map.merge_missing(&PrefixMap::standard());
        map
    }

    pub fn check_query(&self, text: &str) -> Result<Validation, QueryError> {
        let ast = parse_query_with_prefixes(text, &self.prefixes())?;
        Ok(self.check_ast(ast))
    }

    pub fn check_ast(&self, ast: QueryAst) -> Validation {
        let built = build_with(
            &extract_bgps(&ast),
            &ast.projected_variables(),
            &self.ontology.graph,
            &self.skolem,
        );
        let mut render_prefixes = self.prefixes();
        render_prefixes.merge_missing(&ast.prefixes);
        let report = check(&built.graph, &built.skolem, &render_prefixes, &self.config);
        Validation { ast, built, report }
    }
}
