use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::term::vocab;
use super::RdfError;

/// Default namespace for skolemized query variables (the `qq:` prefix).
pub const DEFAULT_QQ_NAMESPACE: &str = "tag:obqc,2024:var/";

/// Prefix label to namespace IRI bindings.
///
/// `standard()` always carries `rdf:`, `rdfs:`, `owl:`, `skos:`, `xsd:` and `qq:`.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PrefixMap {
    bindings: BTreeMap<String, String>,
}

impl PrefixMap {
    pub fn empty() -> Self {
        PrefixMap::default()
    }

    pub fn standard() -> Self {
        Self::with_qq(DEFAULT_QQ_NAMESPACE)
    }

    pub fn with_qq(qq_namespace: &str) -> Self {
        let mut map = PrefixMap::empty();
        map.insert("rdf", vocab::RDF);
        map.insert("rdfs", vocab::RDFS);
        map.insert("owl", vocab::OWL);
        map.insert("skos", vocab::SKOS);
        map.insert("xsd", vocab::XSD);
        map.insert("qq", qq_namespace);
        map
    }

    pub fn insert(&mut self, prefix: impl Into<String>, namespace: impl Into<String>) {
        self.bindings.insert(prefix.into(), namespace.into());
    }

    pub fn get(&self, prefix: &str) -> Option<&str> {
        self.bindings.get(prefix).map(String::as_str)
    }

    pub fn contains(&self, prefix: &str) -> bool {
        self.bindings.contains_key(prefix)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.bindings
            .iter()
            .map(|(p, ns)| (p.as_str(), ns.as_str()))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Add every binding of `other` whose prefix is not bound here yet.
    pub fn merge_missing(&mut self, other: &PrefixMap) {
        for (prefix, ns) in other.iter() {
            self.bindings
                .entry(prefix.to_string())
                .or_insert_with(|| ns.to_string());
        }
    }

    /// Expand `prefix:local` into an absolute IRI.
    pub fn expand(&self, prefixed: &str) -> Result<String, RdfError> {
        let (prefix, local) = prefixed
            .split_once(':')
            .ok_or_else(|| RdfError::UnknownPrefix(prefixed.to_string()))?;
        let ns = self
            .get(prefix)
            .ok_or_else(|| RdfError::UnknownPrefix(prefix.to_string()))?;
        Ok(format!("{ns}{}", unescape_local(local)))
    }

    /// Shortest prefixed form of `iri`, if some namespace matches and the
    /// remaining local part is a plain name.
    pub fn compact(&self, iri: &str) -> Option<String> {
        self.bindings
            .iter()
            .filter(|(_, ns)| !ns.is_empty() && iri.starts_with(ns.as_str()))
            .filter(|(_, ns)| is_plain_local(&iri[ns.len()..]))
            .max_by(|(pa, na), (pb, nb)| na.len().cmp(&nb.len()).then(pb.cmp(pa)))
            .map(|(prefix, ns)| format!("{prefix}:{}", &iri[ns.len()..]))
    }
}

fn unescape_local(local: &str) -> String {
    if !local.contains('\\') {
        return local.to_string();
    }
    let mut out = String::with_capacity(local.len());
    let mut chars = local.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(next) = chars.next() {
                out.push(next);
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Local names that need no escaping in Turtle or SPARQL.
pub(crate) fn is_plain_local(local: &str) -> bool {
    let mut chars = local.chars();
    let Some(first) = chars.next() else {
        return true;
    };
    if !(first.is_alphanumeric() || first == '_') {
        return false;
    }
    if local.ends_with('.') {
        return false;
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}
