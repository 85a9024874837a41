use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::graph::Graph;
use super::term::{vocab, Term};

/// `rdfs:subClassOf` adjacency, built once per ontology.
///
/// Cycles are fine: traversal keeps a visited set, so classes on a cycle are
/// mutual subclasses.
#[derive(Clone, Debug, Default)]
pub struct ClassHierarchy {
    supers: BTreeMap<Term, BTreeSet<Term>>,
}

impl ClassHierarchy {
    pub fn from_graph(ontology: &Graph) -> Self {
        let mut supers: BTreeMap<Term, BTreeSet<Term>> = BTreeMap::new();
        for t in ontology.iter() {
            if t.predicate.as_iri() == Some(vocab::RDFS_SUBCLASS_OF) {
                supers
                    .entry(t.subject.clone())
                    .or_default()
                    .insert(t.object.clone());
            }
        }
        ClassHierarchy { supers }
    }

    /// `sub rdfs:subClassOf* sup`: reflexive, transitive.
    pub fn is_subclass(&self, sub: &Term, sup: &Term) -> bool {
        if sub == sup {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([sub]);
        seen.insert(sub);
        while let Some(current) = queue.pop_front() {
            for next in self.supers.get(current).into_iter().flatten() {
                if next == sup {
                    return true;
                }
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        false
    }

    /// Neither class reaches the other.
    pub fn incompatible(&self, a: &Term, b: &Term) -> bool {
        !self.is_subclass(a, b) && !self.is_subclass(b, a)
    }
}

/// True iff `sub` equals `sup` or a directed `rdfs:subClassOf` path leads from
/// `sub` to `sup` in `ontology`.
pub fn subclass_closure(ontology: &Graph, sub: &Term, sup: &Term) -> bool {
    ClassHierarchy::from_graph(ontology).is_subclass(sub, sup)
}
