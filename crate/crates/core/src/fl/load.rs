//! Turns parsed FL into knowledge-base mutations.
//!
//! Each description (a line plus its continuation lines) is one transaction:
//! it is planned against a scratch copy of the store and only committed when
//! every mutation it needs is valid. Indented children are transactions of
//! their own, run after their parent.

use std::collections::BTreeMap;

use serde::Serialize;

use super::ast::{Block, Directives, FlDescription, FlDocument, FlSegment, Node, Span, TargetValue};
use super::lexer::FlError;
use super::parser::parse_segment;
use crate::error::KbError;
use crate::ids::{CategoryId, ObjectId, UserId};
use crate::journal::{Attachment, OpId, OperationRecord, Payload};
use crate::kb::{created_object, Kb};
use crate::model::{CategoryKind, ObjectKind, Quantifier, Reading, StatementBody};
use crate::seed;
use crate::store::Store;

/// A description that could not be loaded, located in its file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadFailure {
    pub line: usize,
    pub column: usize,
    /// Head of the failing description.
    pub head: String,
    #[serde(serialize_with = "display")]
    pub error: KbError,
}

fn display<S: serde::Serializer>(e: &KbError, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(e)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LoadReport {
    /// Descriptions attempted, children included.
    pub descriptions: usize,
    pub loaded: usize,
    /// Objects created or related, in commit order, without repeats.
    pub objects: Vec<ObjectId>,
    pub failures: Vec<LoadFailure>,
    #[serde(serialize_with = "display_all")]
    pub parse_errors: Vec<FlError>,
    #[serde(serialize_with = "display_all")]
    pub warnings: Vec<FlError>,
}

fn display_all<S: serde::Serializer>(errors: &[FlError], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(errors.iter().map(|e| {
        let sp = e.span();
        format!("{}:{}: {e}", sp.line, sp.column)
    }))
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty() && self.parse_errors.is_empty()
    }
}

type Failure = (Span, KbError);

/// Plans descriptions against a scratch store.
pub(crate) struct Planner {
    /// State after every transaction accepted so far.
    committed: Store,
    scratch: Store,
    seq: u64,
    user: UserId,
    default_prefix: UserId,
}

impl Planner {
    pub(crate) fn new(store: &Store, user: UserId) -> Self {
        Planner {
            committed: store.clone(),
            scratch: store.clone(),
            seq: 0,
            default_prefix: user.clone(),
            user,
        }
    }

    /// Registers `user` in the scratch state if it is unknown there.
    pub(crate) fn ensure_user(&mut self) {
        if self.committed.user(&self.user).is_none() {
            let name = self.user.clone();
            let _ = self.transaction(|p, plan| {
                p.stage(
                    Payload::AddUser {
                        name,
                        attributes: BTreeMap::new(),
                    },
                    Span::default(),
                    plan,
                )
            });
        }
    }

    pub(crate) fn reset_prefix(&mut self) {
        self.default_prefix = self.user.clone();
    }

    fn stage(&mut self, payload: Payload, span: Span, plan: &mut Vec<Payload>) -> Result<ObjectId, Failure> {
        if self.scratch.is_redundant(&payload) {
            return Ok(created_object(&payload));
        }
        self.scratch.check(&payload).map_err(|e| (span, e))?;
        self.seq += 1;
        let record = OperationRecord {
            op_id: OpId {
                server_id: String::from("~plan"),
                seq: self.seq,
            },
            logical_time: self.seq,
            payload: payload.clone(),
        };
        self.scratch
            .apply_operation(&record)
            .map_err(|e| (span, e))?;
        let id = created_object(&payload);
        plan.push(payload);
        Ok(id)
    }

    /// Runs `f` as one transaction; on failure the scratch store is reset.
    fn transaction<T>(
        &mut self,
        f: impl FnOnce(&mut Self, &mut Vec<Payload>) -> Result<T, Failure>,
    ) -> Result<(T, Vec<Payload>), Failure> {
        let mut plan = Vec::new();
        match f(self, &mut plan) {
            Ok(v) => {
                for p in &plan {
                    self.seq += 1;
                    let record = OperationRecord {
                        op_id: OpId {
                            server_id: String::from("~plan"),
                            seq: self.seq,
                        },
                        logical_time: self.seq,
                        payload: p.clone(),
                    };
                    let _ = self.committed.apply_operation(&record);
                }
                Ok((v, plan))
            }
            Err(e) => {
                self.scratch = self.committed.clone();
                Err(e)
            }
        }
    }

    fn user_id(&self, name: &str, span: Span) -> Result<UserId, Failure> {
        UserId::new(name).map_err(|e| (span, e.into()))
    }

    fn resolve_term(&self, prefix: &Option<String>, name: &str, span: Span) -> Result<CategoryId, Failure> {
        let id = |prefix: UserId| CategoryId::new(prefix, name).map_err(|e| (span, KbError::from(e)));
        if let Some(p) = prefix {
            return id(self.user_id(p, span)?);
        }
        let own = id(self.default_prefix.clone())?;
        if self.scratch.category(&own).is_some() {
            return Ok(own);
        }
        let seeded = id(seed::seed_user())?;
        if self.scratch.category(&seeded).is_some() {
            return Ok(seeded);
        }
        Ok(own)
    }

    fn resolve_relation(&self, name: &str, span: Span) -> Result<CategoryId, Failure> {
        let id = match name.split_once('#') {
            Some(_) => CategoryId::parse(name).map_err(|e| (span, KbError::from(e)))?,
            None => seed::relation(name),
        };
        if self.scratch.relation_type(&id).is_none() {
            return Err((span, KbError::UnknownRelationType(name.to_string())));
        }
        Ok(id)
    }

    /// A quoted term names the informal statement with that text if there is
    /// one, and is a literal otherwise.
    fn quoted(&self, text: &str) -> ObjectId {
        let sid = StatementBody::Informal(text.to_string()).content_id();
        if self.scratch.statement(&sid).is_some() {
            sid.into()
        } else {
            ObjectId::literal(text)
        }
    }

    fn creator(&self, names: [&Option<String>; 2], span: Span) -> Result<UserId, Failure> {
        match names.into_iter().flatten().next() {
            Some(n) => self.user_id(n, span),
            None => Ok(self.user.clone()),
        }
    }

    /// Resolves the head of a description. An unknown head is created under
    /// `parent`, which every unknown head needs.
    fn head(
        &mut self,
        d: &FlDescription,
        parent: Option<&ObjectId>,
        plan: &mut Vec<Payload>,
    ) -> Result<ObjectId, Failure> {
        let span = d.head.span();
        let (prefix, name) = match &d.head {
            Node::Quoted { text, .. } => {
                let id = self.quoted(text);
                if let Some(p) = parent {
                    self.relate_child(p, &id, d, span, plan)?;
                }
                return Ok(id);
            }
            Node::Term { prefix, name, .. } => (prefix, name),
        };
        let id = self.resolve_term(prefix, name, span)?;
        let obj: ObjectId = id.clone().into();
        match parent {
            Some(p) if self.scratch.category(&id).is_none() => {
                let (relation, kind) = self.child_link(p);
                let creator = self.creator([&d.head_creator, &None], span)?;
                self.stage(
                    Payload::AddCategory {
                        id,
                        creator,
                        kind,
                        labels: Vec::new(),
                        attachments: vec![Attachment {
                            relation,
                            parent: p.clone(),
                        }],
                    },
                    span,
                    plan,
                )?;
            }
            Some(p) => self.relate_child(p, &obj, d, span, plan)?,
            None if self.scratch.category(&id).is_none() => {
                return Err((span, KbError::NoAttachment(id)));
            }
            None => {}
        }
        Ok(obj)
    }

    /// The implicit relation from a parent line to an indented child, and the
    /// kind a new child gets.
    fn child_link(&self, parent: &ObjectId) -> (CategoryId, CategoryKind) {
        match self.scratch.kind_of(parent) {
            Some(ObjectKind::ConceptType) => (seed::relation("subtype"), CategoryKind::ConceptType),
            Some(ObjectKind::RelationType) => (seed::relation("subtype"), CategoryKind::RelationType),
            Some(ObjectKind::Individual) => (seed::relation("specialization"), CategoryKind::Individual),
            _ => (seed::relation("specialization"), CategoryKind::ConceptType),
        }
    }

    fn relate_child(
        &mut self,
        parent: &ObjectId,
        child: &ObjectId,
        d: &FlDescription,
        span: Span,
        plan: &mut Vec<Payload>,
    ) -> Result<(), Failure> {
        let (relation, _) = self.child_link(parent);
        let creator = self.creator([&d.head_creator, &None], span)?;
        self.stage(
            Payload::AddRelation {
                relation,
                from: parent.clone(),
                to: child.clone(),
                creator,
                reading: Reading::default(),
            },
            span,
            plan,
        )?;
        Ok(())
    }

    fn blocks(
        &mut self,
        head: &ObjectId,
        head_quantifier: Option<Quantifier>,
        blocks: &[Block],
        plan: &mut Vec<Payload>,
    ) -> Result<(), Failure> {
        for b in blocks {
            let relation = self.resolve_relation(&b.relation, b.span)?;
            let hierarchical = self
                .scratch
                .family_of(&relation)
                .is_some_and(|f| f.is_hierarchical());
            for t in &b.targets {
                let node = t.node();
                let span = node.span();
                let creator = self.creator([&t.creator, &b.creator], span)?;
                let target = match node {
                    Node::Quoted { text, .. } => self.quoted(text),
                    Node::Term { prefix, name, .. } => {
                        let id = self.resolve_term(prefix, name, span)?;
                        if self.scratch.category(&id).is_some() {
                            id.into()
                        } else if hierarchical {
                            let kind = if relation == seed::relation("instance") {
                                CategoryKind::Individual
                            } else {
                                match self.scratch.kind_of(head) {
                                    Some(ObjectKind::Individual) => CategoryKind::Individual,
                                    Some(ObjectKind::RelationType) => CategoryKind::RelationType,
                                    _ => CategoryKind::ConceptType,
                                }
                            };
                            self.stage(
                                Payload::AddCategory {
                                    id,
                                    creator,
                                    kind,
                                    labels: Vec::new(),
                                    attachments: vec![Attachment {
                                        relation: relation.clone(),
                                        parent: head.clone(),
                                    }],
                                },
                                span,
                                plan,
                            )?;
                            if let TargetValue::Nested(inner) = &t.value {
                                let obj = id_of(plan);
                                self.blocks(&obj, inner.head.quantifier(), &inner.blocks, plan)?;
                            }
                            continue;
                        } else {
                            return Err((span, KbError::UnknownObject(id.into())));
                        }
                    }
                };
                let reading = Reading {
                    source: head_quantifier.unwrap_or(Quantifier::Every),
                    target: node.quantifier().unwrap_or(Quantifier::Some),
                    ..Reading::default()
                };
                self.stage(
                    Payload::AddRelation {
                        relation: relation.clone(),
                        from: head.clone(),
                        to: target.clone(),
                        creator,
                        reading,
                    },
                    span,
                    plan,
                )?;
                if let TargetValue::Nested(inner) = &t.value {
                    self.blocks(&target, inner.head.quantifier(), &inner.blocks, plan)?;
                }
            }
        }
        Ok(())
    }

    pub(crate) fn directives(&mut self, d: &Directives, span: Span) -> Vec<(Result<Vec<Payload>, Failure>, String)> {
        let mut out = Vec::new();
        for (name, attributes) in &d.users {
            let r = self.transaction(|p, plan| {
                let id = p.user_id(name, span)?;
                if p.scratch.user(&id).is_none() {
                    p.stage(
                        Payload::AddUser {
                            name: id,
                            attributes: attributes.clone(),
                        },
                        span,
                        plan,
                    )?;
                }
                Ok(())
            });
            out.push((r.map(|(_, plan)| plan), format!("@user {name}")));
        }
        if let Some(c) = &d.creator {
            // Already validated by the parser.
            if let Ok(u) = UserId::new(c.as_str()) {
                self.default_prefix = u;
            }
        }
        out
    }

    /// Plans one description and, recursively, its children. `emit` receives
    /// each transaction's outcome in order.
    pub(crate) fn description(
        &mut self,
        d: &FlDescription,
        parent: Option<&ObjectId>,
        emit: &mut dyn FnMut(&FlDescription, Result<Vec<Payload>, Failure>),
    ) {
        let result = self.transaction(|p, plan| {
            let head = p.head(d, parent, plan)?;
            p.blocks(&head, d.head.quantifier(), &d.blocks, plan)?;
            Ok(head)
        });
        let head = match result {
            Ok((head, plan)) => {
                emit(d, Ok(plan));
                Some(head)
            }
            Err(e) => {
                emit(d, Err(e));
                None
            }
        };
        // Children of a head that does not exist fail on their own.
        let fallback = match (&head, &d.head) {
            (None, Node::Term { prefix, name, span, .. }) => {
                self.resolve_term(prefix, name, *span).ok().map(ObjectId::from)
            }
            _ => None,
        };
        let parent = head.or(fallback);
        for c in &d.children {
            match &parent {
                Some(p) => self.description(c, Some(p), emit),
                None => emit(
                    c,
                    Err((c.head.span(), KbError::UnknownObject(ObjectId::literal(d.head.text())))),
                ),
            }
        }
    }
}

fn id_of(plan: &[Payload]) -> ObjectId {
    created_object(plan.last().expect("a payload was just staged"))
}

fn to_file(seg: &FlSegment, mut e: FlError) -> FlError {
    let s = e.span_mut();
    *s = seg.to_file(*s);
    e
}

/// Parses every FL segment of a document, mapping spans to file positions.
pub(crate) fn parse_document(doc: &FlDocument) -> Vec<(&FlSegment, super::parser::ParseOutput)> {
    doc.fl_segments()
        .map(|seg| {
            let mut out = parse_segment(&seg.text);
            out.errors = out.errors.into_iter().map(|e| to_file(seg, e)).collect();
            out.warnings = out.warnings.into_iter().map(|e| to_file(seg, e)).collect();
            (seg, out)
        })
        .collect()
}

/// Loads every FL segment of `doc` on behalf of `user`.
///
/// Only a journal failure is returned as an error; everything else is
/// reported per description.
pub fn load_document(kb: &mut Kb, doc: &FlDocument, user: &UserId) -> Result<LoadReport, KbError> {
    let mut report = LoadReport::default();
    let mut planned: Vec<(bool, Result<Vec<Payload>, LoadFailure>)> = Vec::new();
    let mut planner = Planner::new(kb.store(), user.clone());
    for (seg, out) in parse_document(doc) {
        report.parse_errors.extend(out.errors);
        report.warnings.extend(out.warnings);
        let failure = |head: String, (span, error): Failure| {
            let at = seg.to_file(span);
            LoadFailure {
                line: at.line,
                column: at.column,
                head,
                error,
            }
        };
        let seg_span = Span::new(1, 1, 1);
        for (r, head) in planner.directives(&out.directives, seg_span) {
            planned.push((false, r.map_err(|f| failure(head, f))));
        }
        for d in &out.descriptions {
            planner.description(d, None, &mut |d, r| {
                planned.push((true, r.map_err(|f| failure(d.head.text(), f))));
            });
        }
        planner.reset_prefix();
    }
    let mut seen = BTreeMap::new();
    for (is_description, r) in planned {
        if is_description {
            report.descriptions += 1;
        }
        match r {
            Ok(plan) => {
                let mut ok = true;
                for p in plan {
                    let id = created_object(&p);
                    match kb.commit(p) {
                        Ok(_) => {
                            if seen.insert(id.clone(), ()).is_none() {
                                report.objects.push(id);
                            }
                        }
                        Err(KbError::Journal(m)) => return Err(KbError::Journal(m)),
                        Err(e) => {
                            ok = false;
                            report.failures.push(LoadFailure {
                                line: 0,
                                column: 0,
                                head: String::new(),
                                error: e,
                            });
                            break;
                        }
                    }
                }
                if ok && is_description {
                    report.loaded += 1;
                }
            }
            Err(f) => {
                report.failures.push(f);
            }
        }
    }
    Ok(report)
}

/// Loads FL text or an HTML page containing FL segments.
pub fn load_text(kb: &mut Kb, text: &str, user: &UserId) -> Result<LoadReport, KbError> {
    match super::html::document(text) {
        Ok(doc) => load_document(kb, &doc, user),
        Err(e) => Ok(LoadReport {
            parse_errors: vec![e],
            ..LoadReport::default()
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb_with(users: &[&str]) -> Kb {
        let mut kb = Kb::in_memory("t");
        for u in users {
            kb.commit(Payload::AddUser {
                name: UserId::new(*u).unwrap(),
                attributes: Default::default(),
            })
            .unwrap();
        }
        kb
    }

    fn cat(s: &str) -> CategoryId {
        CategoryId::parse(s).unwrap()
    }

    #[test]
    fn loads_hierarchy_and_annotations() {
        let mut kb = kb_with(&["pm"]);
        let text = "seed#entity instance: pm#France\npm#France physical_part: pm#Paris, url: 'http://paris.fr'\n";
        let r = load_text(&mut kb, text, &UserId::new("pm").unwrap()).unwrap();
        assert!(r.is_clean(), "{r:?}");
        assert_eq!(r.loaded, 2);
        let paris = kb.store().category(&cat("pm#Paris")).unwrap();
        assert_eq!(paris.kind, CategoryKind::Individual);
        assert!(kb.store().outgoing(&cat("pm#France").into()).any(|i| i.to == ObjectId::literal("http://paris.fr")));
    }

    #[test]
    fn failed_description_is_not_partially_applied() {
        let mut kb = kb_with(&["pm"]);
        let before = kb.records().len();
        // the second target is unknown under a non-hierarchical relation
        let r = load_text(&mut kb, "seed#thing subtype: pm#a, use: pm#nowhere\n", &UserId::new("pm").unwrap()).unwrap();
        assert_eq!(r.loaded, 0);
        assert_eq!(r.failures.len(), 1);
        assert!(matches!(r.failures[0].error, KbError::UnknownObject(_)));
        assert_eq!((r.failures[0].line, r.failures[0].column), (1, 32));
        assert_eq!(kb.records().len(), before);
        assert!(kb.store().category(&cat("pm#a")).is_none());
    }

    #[test]
    fn children_and_unprefixed_names() {
        let mut kb = kb_with(&["pm"]);
        let text = "@creator pm\nthing subtype: animal\n  bird agent_of: flight\n    sparrow\n";
        let r = load_text(&mut kb, text, &UserId::new("pm").unwrap()).unwrap();
        // flight is unknown, so bird is not created and sparrow has no parent
        assert_eq!(r.failures.len(), 2, "{r:?}");
        assert_eq!(r.loaded, 1);
        let mut kb = kb_with(&["pm"]);
        let text = "@creator pm\nthing subtype: animal, subtype: flight\n  bird agent_of: most flight\n    sparrow\n";
        let r = load_text(&mut kb, text, &UserId::new("pm").unwrap()).unwrap();
        assert!(r.is_clean(), "{r:?}");
        assert_eq!(r.loaded, 3);
        let s = kb.store();
        for general in ["seed#thing", "pm#bird"] {
            assert!(s.reaches(&cat(general).into(), &cat("pm#sparrow").into(), crate::model::RelationFamily::Specialization));
        }
        let agent = s
            .relations()
            .find(|i| i.relation == seed::relation("agent_of"))
            .unwrap();
        assert_eq!(agent.to, cat("pm#flight").into());
        assert_eq!(agent.reading.target, Quantifier::Most);
    }

    #[test]
    fn unknown_head_without_parent() {
        let mut kb = kb_with(&["pm"]);
        let r = load_text(&mut kb, "pm#ghost part: pm#limb\n", &UserId::new("pm").unwrap()).unwrap();
        assert!(matches!(r.failures[0].error, KbError::NoAttachment(_)));
    }

    #[test]
    fn user_directives_and_creators() {
        let mut kb = kb_with(&["pm"]);
        let text = "@user John degree=PhD\nseed#thing subtype: pm#bird (John)\n";
        let r = load_text(&mut kb, text, &UserId::new("pm").unwrap()).unwrap();
        assert!(r.is_clean(), "{r:?}");
        let bird = kb.store().category(&cat("pm#bird")).unwrap();
        assert_eq!(bird.creator.as_str(), "John");
        assert_eq!(kb.store().user(&UserId::new("John").unwrap()).unwrap().attributes["degree"], "PhD");
    }

    #[test]
    fn restating_known_facts_writes_nothing() {
        let mut kb = kb_with(&["pm", "Joe"]);
        let pm = UserId::new("pm").unwrap();
        let text = "pm#Paris specialization: pm#Paris_later\n  pm#Paris_later specialization: pm#Paris_1951\n";
        load_text(&mut kb, "seed#entity instance: pm#Paris\n", &pm).unwrap();
        load_text(&mut kb, text, &pm).unwrap();
        let n = kb.records().len();
        let again = load_text(&mut kb, text, &pm).unwrap();
        assert_eq!((again.loaded, again.objects.len(), kb.records().len()), (2, 0, n));
        // another author restating it becomes a believer
        load_text(&mut kb, "pm#Paris specialization: pm#Paris_later\n", &UserId::new("Joe").unwrap()).unwrap();
        let link = kb.store().outgoing(&cat("pm#Paris").into()).find(|r| r.to == cat("pm#Paris_later").into()).unwrap();
        assert_eq!(link.believers.len(), 2);
    }
}
