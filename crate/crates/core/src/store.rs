//! In-memory store of the semantic network.
//!
//! The store is a pure function of the operation records applied to it:
//! every mutation goes through [`Store::apply_operation`], which validates a
//! payload completely before touching any state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{KbError, PersistError};
use crate::ids::{CategoryId, ObjectId, RelationId, StatementId, UserId};
use crate::journal::{Attachment, Connection, Direction, OpId, OperationRecord, Payload};
use crate::model::{
    Category, CategoryKind, ConceptualGraph, Dimension, EdgeTarget, ObjectKind, Quantifier,
    Reading, RelationFamily, RelationInstance, RelationType, Source, SourceKind, Statement,
    StatementBody, User,
};
use crate::seed;

const SNAPSHOT_FORMAT: &str = "coopkb-snapshot";
const SNAPSHOT_VERSION: u32 = 1;

/// Votes on one object: dimension → voter → value.
pub type VoteTable = BTreeMap<Dimension, BTreeMap<UserId, f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedOp {
    pub op_id: OpId,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct EdgeIndex {
    out: BTreeMap<ObjectId, BTreeSet<RelationId>>,
    inc: BTreeMap<ObjectId, BTreeSet<RelationId>>,
}

impl EdgeIndex {
    fn insert(&mut self, r: &RelationInstance) {
        self.out.entry(r.from.clone()).or_default().insert(r.id.clone());
        self.inc.entry(r.to.clone()).or_default().insert(r.id.clone());
    }
}

/// What [`Store::apply_operation`] did with a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Applied {
    Applied,
    /// The op id was seen before; nothing changed.
    Duplicate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Store {
    users: BTreeMap<UserId, User>,
    categories: BTreeMap<CategoryId, Category>,
    relation_types: BTreeMap<CategoryId, RelationType>,
    statements: BTreeMap<StatementId, Statement>,
    relations: BTreeMap<RelationId, RelationInstance>,
    votes: BTreeMap<ObjectId, VoteTable>,
    archived: BTreeSet<ObjectId>,
    sources: BTreeSet<Source>,
    seen: BTreeSet<OpId>,
    rejected: Vec<RejectedOp>,
    #[serde(skip)]
    index: EdgeIndex,
}

impl Store {
    /// A store with nothing in it, not even the seed ontology.
    pub fn empty() -> Self {
        Store::default()
    }

    /// A store holding the built-in ontology.
    pub fn seeded() -> Self {
        let mut store = Store::empty();
        let seed_user = seed::seed_user();
        let rel_user = seed::relation_user();
        for u in [&seed_user, &rel_user] {
            store.users.insert(
                u.clone(),
                User {
                    id: u.clone(),
                    attributes: BTreeMap::new(),
                },
            );
        }
        let subtype = seed::relation("subtype");
        let root = seed::root();
        store.insert_seed_category(root.clone(), &seed_user, CategoryKind::ConceptType);
        for (child, parent) in seed::SEED_CONCEPTS {
            let child = seed::seed_category(child);
            store.insert_seed_category(child.clone(), &seed_user, CategoryKind::ConceptType);
            store.insert_seed_relation(&subtype, seed::seed_category(parent), child, &seed_user);
        }
        let relation_root = seed::relation(seed::RELATION_ROOT);
        store.insert_seed_category(relation_root.clone(), &rel_user, CategoryKind::RelationType);
        store.insert_seed_relation(&subtype, root, relation_root, &seed_user);
        let types = seed::relation_types();
        for (rt, _) in &types {
            store.insert_seed_category(rt.id.clone(), &rel_user, CategoryKind::RelationType);
            store.relation_types.insert(rt.id.clone(), rt.clone());
        }
        for (rt, parent) in types {
            store.insert_seed_relation(&subtype, parent, rt.id, &rel_user);
        }
        store
    }

    fn insert_seed_category(&mut self, id: CategoryId, creator: &UserId, kind: CategoryKind) {
        self.categories.insert(
            id.clone(),
            Category {
                id,
                creator: creator.clone(),
                labels: Vec::new(),
                kind,
                seed: true,
            },
        );
    }

    fn insert_seed_relation(
        &mut self,
        relation: &CategoryId,
        from: CategoryId,
        to: CategoryId,
        creator: &UserId,
    ) {
        self.insert_relation(
            relation.clone(),
            from.into(),
            to.into(),
            creator,
            Reading::default(),
        );
    }

    pub fn user(&self, id: &UserId) -> Option<&User> {
        self.users.get(id)
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn category(&self, id: &CategoryId) -> Option<&Category> {
        self.categories.get(id)
    }

    pub fn categories(&self) -> impl Iterator<Item = &Category> {
        self.categories.values()
    }

    pub fn relation_type(&self, id: &CategoryId) -> Option<&RelationType> {
        self.relation_types.get(id)
    }

    pub fn relation_types(&self) -> impl Iterator<Item = &RelationType> {
        self.relation_types.values()
    }

    /// Resolves a bare relation name such as `subtype`.
    pub fn relation_type_named(&self, name: &str) -> Option<&RelationType> {
        let id = CategoryId::new(seed::relation_user(), name).ok()?;
        self.relation_types.get(&id)
    }

    pub fn statement(&self, id: &StatementId) -> Option<&Statement> {
        self.statements.get(id)
    }

    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.statements.values()
    }

    pub fn relation(&self, id: &RelationId) -> Option<&RelationInstance> {
        self.relations.get(id)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationInstance> {
        self.relations.values()
    }

    pub fn votes(&self, object: &ObjectId) -> Option<&VoteTable> {
        self.votes.get(object)
    }

    pub fn is_archived(&self, object: &ObjectId) -> bool {
        self.archived.contains(object)
    }

    pub fn sources(&self) -> impl Iterator<Item = &Source> {
        self.sources.iter()
    }

    /// Number of records this store has processed (applied or rejected).
    pub fn position(&self) -> u64 {
        self.seen.len() as u64
    }

    pub fn has_seen(&self, op: &OpId) -> bool {
        self.seen.contains(op)
    }

    /// Records rejected during replay, in replay order.
    pub fn rejected(&self) -> &[RejectedOp] {
        &self.rejected
    }

    pub fn kind_of(&self, object: &ObjectId) -> Option<ObjectKind> {
        match object {
            ObjectId::User(u) => self.users.contains_key(u).then_some(ObjectKind::User),
            ObjectId::Category(c) => self.categories.get(c).map(|c| c.kind.into()),
            ObjectId::Statement(s) => self
                .statements
                .contains_key(s)
                .then_some(ObjectKind::Statement),
            ObjectId::Relation(r) => self
                .relations
                .contains_key(r)
                .then_some(ObjectKind::Relation),
            ObjectId::Literal(_) => Some(ObjectKind::Literal),
        }
    }

    pub fn exists(&self, object: &ObjectId) -> bool {
        self.kind_of(object).is_some()
    }

    /// Creator of a recorded object; users are their own creators.
    pub fn creator_of(&self, object: &ObjectId) -> Option<&UserId> {
        match object {
            ObjectId::User(u) => self.users.get(u).map(|u| &u.id),
            ObjectId::Category(c) => self.categories.get(c).map(|c| &c.creator),
            ObjectId::Statement(s) => self.statements.get(s).map(|s| &s.creator),
            ObjectId::Relation(r) => self.relations.get(r).map(|r| &r.creator),
            ObjectId::Literal(_) => None,
        }
    }

    pub fn believers_of(&self, object: &ObjectId) -> Option<&BTreeSet<UserId>> {
        match object {
            ObjectId::Statement(s) => self.statements.get(s).map(|s| &s.believers),
            ObjectId::Relation(r) => self.relations.get(r).map(|r| &r.believers),
            _ => None,
        }
    }

    /// Relation instances leaving `object`, ordered by relation id.
    pub fn outgoing<'a>(&'a self, object: &ObjectId) -> impl Iterator<Item = &'a RelationInstance> + 'a {
        self.index
            .out
            .get(object)
            .into_iter()
            .flatten()
            .filter_map(move |id| self.relations.get(id))
    }

    /// Relation instances arriving at `object`, ordered by relation id.
    pub fn incoming<'a>(&'a self, object: &ObjectId) -> impl Iterator<Item = &'a RelationInstance> + 'a {
        self.index
            .inc
            .get(object)
            .into_iter()
            .flatten()
            .filter_map(move |id| self.relations.get(id))
    }

    pub fn family_of(&self, relation: &CategoryId) -> Option<RelationFamily> {
        self.relation_types.get(relation).map(|rt| rt.family)
    }

    /// Whether `target` is reachable from `start` along relations of `family`.
    pub fn reaches(&self, start: &ObjectId, target: &ObjectId, family: RelationFamily) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            if v == target {
                return true;
            }
            if !seen.insert(v) {
                continue;
            }
            for r in self.outgoing(v) {
                if self.family_of(&r.relation) == Some(family) {
                    stack.push(&r.to);
                }
            }
        }
        false
    }

    fn need_user(&self, user: &UserId) -> Result<(), KbError> {
        if self.users.contains_key(user) {
            Ok(())
        } else {
            Err(KbError::UnknownUser(user.clone()))
        }
    }

    fn need_relation_type(&self, id: &CategoryId) -> Result<&RelationType, KbError> {
        self.relation_types
            .get(id)
            .ok_or_else(|| KbError::UnknownRelationType(id.to_string()))
    }

    /// Checks a prospective relation `from --relation--> to`. Kinds may be
    /// supplied for endpoints that do not exist yet.
    pub fn check_relation(
        &self,
        relation: &CategoryId,
        from: &ObjectId,
        from_kind: Option<ObjectKind>,
        to: &ObjectId,
        to_kind: Option<ObjectKind>,
    ) -> Result<(), KbError> {
        let rt = self.need_relation_type(relation)?;
        let from_kind = match from_kind.or_else(|| self.kind_of(from)) {
            Some(k) => k,
            None => return Err(KbError::UnknownObject(from.clone())),
        };
        let to_kind = match to_kind.or_else(|| self.kind_of(to)) {
            Some(k) => k,
            None => return Err(KbError::UnknownObject(to.clone())),
        };
        let violation = |reason: String| KbError::SignatureViolation {
            relation: relation.clone(),
            from: from.clone(),
            to: to.clone(),
            reason,
        };
        if !rt.signature.domain.contains(from_kind.flag()) {
            return Err(violation(format!("a {from_kind:?} cannot be its source")));
        }
        if !rt.signature.range.contains(to_kind.flag()) {
            return Err(violation(format!("a {to_kind:?} cannot be its target")));
        }
        if rt.acyclic_required && (from == to || self.reaches(to, from, rt.family)) {
            return Err(KbError::CycleDetected {
                relation: relation.clone(),
                from: from.clone(),
                to: to.clone(),
            });
        }
        Ok(())
    }

    /// Checks a graph body against the ontology.
    pub fn check_graph(&self, graph: &ConceptualGraph) -> Result<(), KbError> {
        graph.check_structure().map_err(KbError::InvalidGraph)?;
        for node in &graph.nodes {
            let cat = self
                .categories
                .get(&node.category)
                .ok_or_else(|| KbError::UnknownObject(node.category.clone().into()))?;
            match (cat.kind, node.quantifier) {
                (CategoryKind::RelationType, _) => {
                    return Err(KbError::InvalidGraph(format!(
                        "{} is a relation type, not a concept",
                        cat.id
                    )))
                }
                (CategoryKind::Individual, Quantifier::Named) => {}
                (CategoryKind::ConceptType, q) if q != Quantifier::Named => {}
                (kind, q) => {
                    return Err(KbError::InvalidGraph(format!(
                        "quantifier {q:?} does not fit {} ({kind:?})",
                        cat.id
                    )))
                }
            }
        }
        for edge in &graph.edges {
            self.need_relation_type(&edge.relation)?;
            if let EdgeTarget::Statement(s) = &edge.to {
                if !self.statements.contains_key(s) {
                    return Err(KbError::UnknownObject(s.clone().into()));
                }
            }
        }
        Ok(())
    }

    fn connection_endpoints(new: &ObjectId, c: &Connection) -> (ObjectId, ObjectId) {
        match c.direction {
            Direction::FromExisting => (c.existing.clone(), new.clone()),
            Direction::ToExisting => (new.clone(), c.existing.clone()),
        }
    }

    /// Whether applying `payload` would change nothing: a relation or belief
    /// its author already holds.
    pub fn is_redundant(&self, payload: &Payload) -> bool {
        match payload {
            Payload::AddRelation {
                relation,
                from,
                to,
                creator,
                ..
            } => self
                .relations
                .get(&RelationId::for_triple(relation, from, to))
                .is_some_and(|r| r.believers.contains(creator)),
            Payload::AddBelief { user, object } => self
                .believers_of(object)
                .is_some_and(|b| b.contains(user)),
            _ => false,
        }
    }

    /// Validates a payload against the current state without changing it.
    pub fn check(&self, payload: &Payload) -> Result<(), KbError> {
        match payload {
            Payload::AddUser { name, .. } => {
                if self.users.contains_key(name) {
                    return Err(KbError::DuplicateUser(name.clone()));
                }
            }
            Payload::AddCategory {
                id,
                creator,
                kind,
                attachments,
                ..
            } => {
                self.need_user(creator)?;
                self.need_user(&id.prefix)?;
                if self.categories.contains_key(id) {
                    return Err(KbError::DuplicateId(id.clone().into()));
                }
                if attachments.is_empty() {
                    return Err(KbError::NoAttachment(id.clone()));
                }
                let new: ObjectId = id.clone().into();
                for Attachment { relation, parent } in attachments {
                    let family = self
                        .family_of(relation)
                        .ok_or_else(|| KbError::UnknownRelationType(relation.to_string()))?;
                    if !family.is_hierarchical() {
                        return Err(KbError::InvalidPayload(format!(
                            "{relation} cannot attach a category (family {family:?})"
                        )));
                    }
                    if parent == &new {
                        return Err(KbError::CycleDetected {
                            relation: relation.clone(),
                            from: new.clone(),
                            to: new.clone(),
                        });
                    }
                    self.check_relation(relation, parent, None, &new, Some((*kind).into()))?;
                }
            }
            Payload::AddStatement {
                body,
                creator,
                source,
                connections,
            } => {
                self.need_user(creator)?;
                if source.label.trim().is_empty() {
                    return Err(KbError::InvalidPayload("source label is empty".into()));
                }
                if let StatementBody::Graph(g) = body {
                    self.check_graph(g)?;
                }
                let id = body.content_id();
                let new: ObjectId = id.clone().into();
                if self.statements.contains_key(&id) {
                    return Err(KbError::DuplicateId(new));
                }
                for c in connections {
                    if !self.exists(&c.existing) {
                        return Err(KbError::UnknownObject(c.existing.clone()));
                    }
                    let (from, to) = Self::connection_endpoints(&new, c);
                    let (fk, tk) = match c.direction {
                        Direction::FromExisting => (None, Some(ObjectKind::Statement)),
                        Direction::ToExisting => (Some(ObjectKind::Statement), None),
                    };
                    self.check_relation(&c.relation, &from, fk, &to, tk)?;
                }
            }
            Payload::AddRelation {
                relation,
                from,
                to,
                creator,
                ..
            } => {
                self.need_user(creator)?;
                let id = RelationId::for_triple(relation, from, to);
                if !self.relations.contains_key(&id) {
                    self.check_relation(relation, from, None, to, None)?;
                }
            }
            Payload::AddBelief { user, object } => {
                self.need_user(user)?;
                if self.believers_of(object).is_none() {
                    return Err(KbError::UnknownObject(object.clone()));
                }
            }
            Payload::CastVote {
                voter,
                object,
                value,
                ..
            } => {
                self.need_user(voter)?;
                if !value.is_finite() || !(-1.0..=1.0).contains(value) {
                    return Err(KbError::OutOfRange(*value));
                }
                match object {
                    ObjectId::Category(_) | ObjectId::Statement(_) | ObjectId::Relation(_)
                        if self.exists(object) => {}
                    _ => return Err(KbError::UnknownObject(object.clone())),
                }
            }
            Payload::Archive { object, by } => {
                self.need_user(by)?;
                match object {
                    ObjectId::Literal(_) | ObjectId::User(_) => {
                        return Err(KbError::InvalidPayload(format!("{object} cannot be archived")))
                    }
                    _ if !self.exists(object) => {
                        return Err(KbError::UnknownObject(object.clone()))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Applies one record. Duplicate op ids are a successful no-op; an invalid
    /// payload leaves the store unchanged and returns `InvalidPayload`.
    pub fn apply_operation(&mut self, record: &OperationRecord) -> Result<Applied, KbError> {
        if self.seen.contains(&record.op_id) {
            return Ok(Applied::Duplicate);
        }
        self.check(&record.payload)
            .map_err(|e| KbError::InvalidPayload(e.to_string()))?;
        self.seen.insert(record.op_id.clone());
        self.mutate(&record.payload);
        Ok(Applied::Applied)
    }

    /// Replays a record, recording a deterministic rejection instead of
    /// failing. Used when rebuilding from a journal.
    pub fn replay(&mut self, record: &OperationRecord) -> Result<Applied, KbError> {
        let outcome = self.apply_operation(record);
        if let Err(e) = &outcome {
            self.seen.insert(record.op_id.clone());
            self.rejected.push(RejectedOp {
                op_id: record.op_id.clone(),
                reason: e.to_string(),
            });
        }
        outcome
    }

    /// Rebuilds a store by replaying records in the deterministic total order.
    pub fn rebuild<'a>(records: impl IntoIterator<Item = &'a OperationRecord>) -> Store {
        let mut sorted: Vec<&OperationRecord> = records.into_iter().collect();
        sorted.sort_by_key(|r| r.order_key());
        let mut store = Store::seeded();
        for r in sorted {
            let _ = store.replay(r);
        }
        store
    }

    fn mutate(&mut self, payload: &Payload) {
        match payload.clone() {
            Payload::AddUser { name, attributes } => {
                self.users.insert(
                    name.clone(),
                    User {
                        id: name,
                        attributes,
                    },
                );
            }
            Payload::AddCategory {
                id,
                creator,
                kind,
                labels,
                attachments,
            } => {
                self.categories.insert(
                    id.clone(),
                    Category {
                        id: id.clone(),
                        creator: creator.clone(),
                        labels,
                        kind,
                        seed: false,
                    },
                );
                for a in attachments {
                    self.insert_relation(
                        a.relation,
                        a.parent,
                        id.clone().into(),
                        &creator,
                        Reading::default(),
                    );
                }
            }
            Payload::AddStatement {
                body,
                creator,
                source,
                connections,
            } => {
                let id = body.content_id();
                let new: ObjectId = id.clone().into();
                self.register_source(&source);
                self.statements.insert(
                    id.clone(),
                    Statement {
                        id,
                        body,
                        creator: creator.clone(),
                        source,
                        believers: BTreeSet::from([creator.clone()]),
                    },
                );
                for c in &connections {
                    let (from, to) = Self::connection_endpoints(&new, c);
                    self.insert_relation(c.relation.clone(), from, to, &creator, Reading::default());
                }
            }
            Payload::AddRelation {
                relation,
                from,
                to,
                creator,
                reading,
            } => {
                self.insert_relation(relation, from, to, &creator, reading);
            }
            Payload::AddBelief { user, object } => match &object {
                ObjectId::Statement(s) => {
                    if let Some(st) = self.statements.get_mut(s) {
                        st.believers.insert(user);
                    }
                }
                ObjectId::Relation(r) => {
                    if let Some(rel) = self.relations.get_mut(r) {
                        rel.believers.insert(user);
                    }
                }
                _ => {}
            },
            Payload::CastVote {
                voter,
                object,
                dimension,
                value,
            } => {
                self.votes
                    .entry(object)
                    .or_default()
                    .entry(dimension)
                    .or_default()
                    .insert(voter, value);
            }
            Payload::Archive { object, .. } => {
                self.archived.insert(object);
            }
        }
    }

    fn register_source(&mut self, source: &Source) {
        if source.kind == SourceKind::Person {
            // Person sources that name a registered user need no separate entry.
            if let Ok(u) = UserId::new(source.label.clone()) {
                if self.users.contains_key(&u) {
                    return;
                }
            }
        }
        self.sources.insert(source.clone());
    }

    /// Inserts a relation, or adds `creator` as a believer of the existing one.
    fn insert_relation(
        &mut self,
        relation: CategoryId,
        from: ObjectId,
        to: ObjectId,
        creator: &UserId,
        reading: Reading,
    ) -> RelationId {
        let id = RelationId::for_triple(&relation, &from, &to);
        if let Some(existing) = self.relations.get_mut(&id) {
            existing.believers.insert(creator.clone());
            return id;
        }
        let instance = RelationInstance {
            id: id.clone(),
            relation,
            from,
            to,
            creator: creator.clone(),
            believers: BTreeSet::from([creator.clone()]),
            reading,
        };
        self.index.insert(&instance);
        self.relations.insert(id.clone(), instance);
        id
    }

    fn rebuild_index(&mut self) {
        let mut index = EdgeIndex::default();
        for r in self.relations.values() {
            index.insert(r);
        }
        self.index = index;
    }

    /// Serializes the whole store as one JSON document.
    pub fn snapshot(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            format: &'a str,
            version: u32,
            store: &'a Store,
        }
        serde_json::to_string_pretty(&Doc {
            format: SNAPSHOT_FORMAT,
            version: SNAPSHOT_VERSION,
            store: self,
        })
        .expect("store serializes")
    }

    pub fn restore(snapshot: &str) -> Result<Store, PersistError> {
        #[derive(Deserialize)]
        struct Doc {
            format: String,
            version: u32,
            store: Store,
        }
        let doc: Doc = serde_json::from_str(snapshot)
            .map_err(|e| PersistError::CorruptSnapshot(e.to_string()))?;
        if doc.format != SNAPSHOT_FORMAT || doc.version != SNAPSHOT_VERSION {
            return Err(PersistError::CorruptSnapshot(format!(
                "unsupported snapshot {} v{}",
                doc.format, doc.version
            )));
        }
        let mut store = doc.store;
        store.rebuild_index();
        Ok(store)
    }
}
