//! The admission workflow for statements, plus beliefs and free relations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::KbError;
use crate::ids::{ObjectId, RelationId, StatementId, UserId};
use crate::journal::{Connection, Payload};
use crate::kb::Kb;
use crate::model::{
    ConceptualGraph, EdgeTarget, Reading, RelationFamily, RelationInstance, Source, StatementBody,
};
use crate::ontology::{CategoryOrder, Generality};
use crate::projection::project;
use crate::store::Store;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    NeedsConnection,
    ConflictDetected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictKind {
    CompleteRedundancy,
    PartialRedundancy,
    Inconsistency,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Conflict {
    pub object: StatementId,
    pub kind: ConflictKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionResult {
    pub outcome: Outcome,
    /// Id of the admitted statement, or of the proposal when rejected.
    pub statement: StatementId,
    pub conflicts: Vec<Conflict>,
    pub required_action: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub user: UserId,
    pub body: StatementBody,
    pub source: Source,
    #[serde(default)]
    pub connections: Vec<Connection>,
}

/// Whether two graphs have the same skeleton: a bijection between their
/// nodes preserving categories and edges, quantifiers and negation ignored.
pub fn same_skeleton(a: &ConceptualGraph, b: &ConceptualGraph) -> bool {
    fn key(e: &crate::model::GraphEdge, map: &[usize]) -> (String, usize, Option<usize>, Option<String>) {
        match &e.to {
            EdgeTarget::Node(t) => (e.relation.to_string(), map[e.from], Some(map[*t]), None),
            EdgeTarget::Statement(s) => (e.relation.to_string(), map[e.from], None, Some(s.hex().to_string())),
        }
    }
    fn extend(a: &ConceptualGraph, b: &ConceptualGraph, i: usize, map: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
        if i == a.nodes.len() {
            let ident: Vec<usize> = (0..b.nodes.len()).collect();
            let mut ea: Vec<_> = a.edges.iter().map(|e| key(e, map)).collect();
            let mut eb: Vec<_> = b.edges.iter().map(|e| key(e, &ident)).collect();
            ea.sort();
            eb.sort();
            return ea == eb;
        }
        for j in 0..b.nodes.len() {
            if !used[j] && a.nodes[i].category == b.nodes[j].category {
                used[j] = true;
                map.push(j);
                if extend(a, b, i + 1, map, used) {
                    return true;
                }
                map.pop();
                used[j] = false;
            }
        }
        false
    }
    a.nodes.len() == b.nodes.len()
        && a.edges.len() == b.edges.len()
        && extend(a, b, 0, &mut Vec::new(), &mut vec![false; b.nodes.len()])
}

/// Inconsistency test: the same skeleton with opposite negation flags, where
/// the positive graph implies the body of the negated one.
pub fn inconsistent<G: Generality>(order: &G, a: &ConceptualGraph, b: &ConceptualGraph) -> bool {
    if a.negated == b.negated || !same_skeleton(a, b) {
        return false;
    }
    let (pos, neg) = if a.negated { (b, a) } else { (a, b) };
    let mut body = neg.clone();
    body.negated = false;
    project(order, pos, &body).is_some()
}

/// Classifies how `body` relates to one stored graph.
pub fn classify<G: Generality>(
    order: &G,
    body: &ConceptualGraph,
    stored: &ConceptualGraph,
) -> Option<ConflictKind> {
    let down = project(order, body, stored).is_some();
    let up = project(order, stored, body).is_some();
    match (down, up) {
        (true, true) => Some(ConflictKind::CompleteRedundancy),
        (true, false) | (false, true) => Some(ConflictKind::PartialRedundancy),
        _ if inconsistent(order, body, stored) => Some(ConflictKind::Inconsistency),
        _ => None,
    }
}

/// Compares a graph against every stored, non-archived formal statement.
pub fn detect_conflicts(store: &Store, body: &ConceptualGraph) -> Vec<Conflict> {
    detect_conflicts_with(store, &CategoryOrder::of_store(store), body)
}

pub fn detect_conflicts_with<G: Generality>(
    store: &Store,
    order: &G,
    body: &ConceptualGraph,
) -> Vec<Conflict> {
    let mut out = Vec::new();
    for s in store.statements() {
        if store.is_archived(&s.id.clone().into()) {
            continue;
        }
        if let Some(g) = s.body.as_graph() {
            if let Some(kind) = classify(order, body, g) {
                out.push(Conflict {
                    object: s.id.clone(),
                    kind,
                });
            }
        }
    }
    out
}

fn rejection(outcome: Outcome, statement: StatementId, conflicts: Vec<Conflict>, action: String) -> AdmissionResult {
    AdmissionResult {
        outcome,
        statement,
        conflicts,
        required_action: action,
        warnings: Vec::new(),
    }
}

/// Runs the admission gate and conflict detection, then commits the
/// statement together with its connections as one record.
pub fn propose_statement(kb: &mut Kb, p: Proposal) -> Result<AdmissionResult, KbError> {
    let store = kb.store();
    if store.user(&p.user).is_none() {
        return Err(KbError::UnknownUser(p.user));
    }
    for c in &p.connections {
        if store.relation_type(&c.relation).is_none() {
            return Err(KbError::UnknownRelationType(c.relation.to_string()));
        }
        if !store.exists(&c.existing) {
            return Err(KbError::DanglingConnection(c.existing.clone()));
        }
    }
    if let StatementBody::Graph(g) = &p.body {
        store.check_graph(g)?;
    }
    let id = p.body.content_id();
    let family = |c: &Connection| store.family_of(&c.relation).expect("checked above");
    if !p.connections.iter().any(|c| family(c).satisfies_gate()) {
        return Ok(rejection(
            Outcome::NeedsConnection,
            id,
            Vec::new(),
            "connect the statement to an existing object with a specialization or corrective relation".into(),
        ));
    }
    if store.statement(&id).is_some() {
        return Ok(rejection(
            Outcome::ConflictDetected,
            id.clone(),
            vec![Conflict {
                object: id.clone(),
                kind: ConflictKind::CompleteRedundancy,
            }],
            format!("this statement already exists: add_belief on {id} instead"),
        ));
    }
    let conflicts = match &p.body {
        StatementBody::Graph(g) => detect_conflicts(store, g),
        StatementBody::Informal(_) => Vec::new(),
    };
    let corrected: BTreeSet<&ObjectId> = p
        .connections
        .iter()
        .filter(|c| family(c) == RelationFamily::Corrective)
        .map(|c| &c.existing)
        .collect();
    let blocking: Vec<Conflict> = conflicts
        .iter()
        .filter(|c| c.kind != ConflictKind::PartialRedundancy)
        .filter(|c| !corrected.contains(&ObjectId::from(c.object.clone())))
        .cloned()
        .collect();
    if !blocking.is_empty() {
        let action = if blocking.iter().any(|c| c.kind == ConflictKind::CompleteRedundancy) {
            let first = blocking
                .iter()
                .find(|c| c.kind == ConflictKind::CompleteRedundancy)
                .expect("present");
            format!(
                "an equivalent statement exists: add_belief on {} instead, or refine the statement",
                first.object
            )
        } else {
            "the statement contradicts an existing one: refine it or connect it by a corrective relation".into()
        };
        return Ok(rejection(Outcome::ConflictDetected, id, conflicts, action));
    }
    let warnings = conflicts
        .iter()
        .map(|c| format!("{:?} with {}", c.kind, c.object))
        .collect();
    kb.commit(Payload::AddStatement {
        body: p.body,
        creator: p.user,
        source: p.source,
        connections: p.connections,
    })?;
    Ok(AdmissionResult {
        outcome: Outcome::Accepted,
        statement: id,
        conflicts,
        required_action: String::new(),
        warnings,
    })
}

/// Adds `user` to the believers of a statement or relation.
pub fn add_belief(kb: &mut Kb, user: UserId, object: ObjectId) -> Result<BTreeSet<UserId>, KbError> {
    let believers = kb
        .store()
        .believers_of(&object)
        .ok_or_else(|| KbError::UnknownObject(object.clone()))?;
    if kb.store().user(&user).is_none() {
        return Err(KbError::UnknownUser(user));
    }
    if !believers.contains(&user) {
        kb.commit(Payload::AddBelief {
            user,
            object: object.clone(),
        })?;
    }
    Ok(kb.store().believers_of(&object).expect("exists").clone())
}

/// Asserts a relation between two existing objects.
pub fn add_relation(
    kb: &mut Kb,
    user: UserId,
    relation: crate::ids::CategoryId,
    from: ObjectId,
    to: ObjectId,
) -> Result<RelationInstance, KbError> {
    let id = RelationId::for_triple(&relation, &from, &to);
    let payload = Payload::AddRelation {
        relation,
        from,
        to,
        creator: user,
        reading: Reading::default(),
    };
    if !kb.store().is_redundant(&payload) {
        kb.commit(payload)?;
    }
    Ok(kb.store().relation(&id).expect("just added").clone())
}

/// Statements that lack a specialization- or corrective-family link.
pub fn gate_audit(store: &Store) -> Vec<StatementId> {
    store
        .statements()
        .filter(|s| {
            let o: ObjectId = s.id.clone().into();
            !store
                .outgoing(&o)
                .chain(store.incoming(&o))
                .any(|r| store.family_of(&r.relation).is_some_and(|f| f.satisfies_gate()))
        })
        .map(|s| s.id.clone())
        .collect()
}
