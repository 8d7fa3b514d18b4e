//! Graph projection: a structure-preserving map from a general conceptual
//! graph into a specific one. Its existence means the general graph is
//! implied by the specific one's assertion, i.e. it generalizes it.
//!
//! The map is a homomorphism (two general nodes may share an image).
//! Categories and relation types map to equal-or-more-specific ones,
//! quantifiers follow every >= most >= some >= named, modality is ignored and
//! both graphs must carry the same negation flag.

use serde::{Deserialize, Serialize};

use crate::ids::ObjectId;
use crate::model::{ConceptNode, ConceptualGraph, EdgeTarget, GraphEdge};
use crate::ontology::Generality;
use crate::store::Store;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    /// `node_map[i]` is the image of general node `i`.
    pub node_map: Vec<usize>,
    /// `edge_map[e]` is the specific edge matching general edge `e`.
    pub edge_map: Vec<usize>,
}

pub fn node_fits<G: Generality>(order: &G, general: &ConceptNode, specific: &ConceptNode) -> bool {
    general.quantifier.generalizes(specific.quantifier)
        && order.generalizes(&general.category, &specific.category)
}

fn edge_fits<G: Generality>(
    order: &G,
    general: &GraphEdge,
    specific: &GraphEdge,
    map: &[usize],
) -> bool {
    if specific.from != map[general.from] || !order.generalizes(&general.relation, &specific.relation)
    {
        return false;
    }
    match (&general.to, &specific.to) {
        (EdgeTarget::Node(g), EdgeTarget::Node(s)) => map[*g] == *s,
        (EdgeTarget::Statement(g), EdgeTarget::Statement(s)) => g == s,
        _ => false,
    }
}

/// Finds a projection of `general` into `specific`, if any.
pub fn project<G: Generality>(
    order: &G,
    general: &ConceptualGraph,
    specific: &ConceptualGraph,
) -> Option<Projection> {
    if general.negated != specific.negated || general.nodes.is_empty() {
        return None;
    }
    let candidates: Vec<Vec<usize>> = general
        .nodes
        .iter()
        .map(|g| {
            specific
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, s)| node_fits(order, g, s))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return None;
    }
    // An edge is checked as soon as both of its endpoints are assigned.
    let n = general.nodes.len();
    let mut ready: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, edge) in general.edges.iter().enumerate() {
        let last = match edge.to {
            EdgeTarget::Node(t) => edge.from.max(t),
            EdgeTarget::Statement(_) => edge.from,
        };
        ready[last].push(e);
    }
    let mut map = vec![usize::MAX; n];
    let mut edge_map = vec![usize::MAX; general.edges.len()];
    if search(order, general, specific, &candidates, &ready, 0, &mut map, &mut edge_map) {
        Some(Projection {
            node_map: map,
            edge_map,
        })
    } else {
        None
    }
}

#[allow(clippy::too_many_arguments)]
fn search<G: Generality>(
    order: &G,
    general: &ConceptualGraph,
    specific: &ConceptualGraph,
    candidates: &[Vec<usize>],
    ready: &[Vec<usize>],
    i: usize,
    map: &mut [usize],
    edge_map: &mut [usize],
) -> bool {
    if i == map.len() {
        return true;
    }
    'next: for &c in &candidates[i] {
        map[i] = c;
        for &e in &ready[i] {
            let g = &general.edges[e];
            match specific
                .edges
                .iter()
                .position(|s| edge_fits(order, g, s, map))
            {
                Some(s) => edge_map[e] = s,
                None => continue 'next,
            }
        }
        if search(order, general, specific, candidates, ready, i + 1, map, edge_map) {
            return true;
        }
    }
    map[i] = usize::MAX;
    false
}

/// Whether statement `a` generalizes statement `b`: by projection when both
/// are formal, otherwise only through explicit specialization links.
pub fn generalizes<G: Generality>(store: &Store, order: &G, a: &ObjectId, b: &ObjectId) -> bool {
    if a == b {
        return store.exists(a);
    }
    let body = |o: &ObjectId| o.as_statement().and_then(|s| store.statement(s)).map(|s| &s.body);
    match (body(a), body(b)) {
        (Some(x), Some(y)) => match (x.as_graph(), y.as_graph()) {
            (Some(g), Some(h)) => project(order, g, h).is_some(),
            _ => store.reaches(a, b, crate::model::RelationFamily::Specialization),
        },
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::CategoryId;
    use crate::model::{Modality, Quantifier};
    use crate::ontology::CategoryOrder;

    fn cat(s: &str) -> CategoryId {
        CategoryId::parse(s).unwrap()
    }

    fn order() -> CategoryOrder {
        let c = |s| cat(s);
        let links = [
            (c("t#bird"), c("t#french_bird")),
            (c("t#french_bird"), c("t#healthy_french_bird")),
            (c("t#bird"), c("t#sparrow")),
            (c("t#part"), c("t#physical_part")),
        ];
        CategoryOrder::from_links([], links.iter().map(|(a, b)| (a, b)))
    }

    fn flies(bird: &str, q: Quantifier) -> ConceptualGraph {
        ConceptualGraph::default()
            .node(ConceptNode::new(cat(bird), q))
            .node(ConceptNode::new(cat("t#flight"), Quantifier::Some))
            .edge(cat("t#agent_of"), 0, 1)
    }

    #[test]
    fn refinement_of_the_bird_statement() {
        let o = order();
        let john = flies("t#bird", Quantifier::Every);
        let mut joe = flies("t#healthy_french_bird", Quantifier::Most);
        joe.nodes[0] = joe.nodes[0].clone().with_modality(Modality::Can);
        assert!(project(&o, &john, &joe).is_some());
        assert!(project(&o, &joe, &john).is_none());
    }

    #[test]
    fn identity_and_negation() {
        let o = order();
        let g = flies("t#bird", Quantifier::Every);
        let p = project(&o, &g, &g).unwrap();
        assert_eq!(p.node_map, vec![0, 1]);
        assert!(project(&o, &g, &g.clone().negate()).is_none());
    }

    #[test]
    fn edges_respect_relation_order() {
        let o = order();
        let part = |r| {
            ConceptualGraph::default()
                .node(ConceptNode::new(cat("t#bird"), Quantifier::Some))
                .node(ConceptNode::new(cat("t#bird"), Quantifier::Some))
                .edge(cat(r), 0, 1)
        };
        assert!(project(&o, &part("t#part"), &part("t#physical_part")).is_some());
        assert!(project(&o, &part("t#physical_part"), &part("t#part")).is_none());
    }

    #[test]
    fn homomorphism_may_merge_nodes() {
        let o = order();
        let two = ConceptualGraph::default()
            .node(ConceptNode::new(cat("t#bird"), Quantifier::Some))
            .node(ConceptNode::new(cat("t#flight"), Quantifier::Some))
            .node(ConceptNode::new(cat("t#flight"), Quantifier::Some))
            .edge(cat("t#agent_of"), 0, 1)
            .edge(cat("t#agent_of"), 0, 2);
        let one = flies("t#bird", Quantifier::Some);
        assert_eq!(project(&o, &two, &one).unwrap().node_map, vec![0, 1, 1]);
    }
}
