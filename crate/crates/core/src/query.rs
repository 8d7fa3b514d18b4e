//! Query commands over a store snapshot.
//!
//! ```text
//! spec <id> [depth] [+rel]
//! gen <id> [depth]
//! search <text>
//! subset [min=<usefulness>] [limit=<n>]
//! ```

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::KbError;
use crate::ids::{CategoryId, ObjectId, RelationId, StatementId, UserId};
use crate::model::{Dimension, ObjectKind, StatementBody};
use crate::ontology::{generalizations, specializations, CategoryOrder, SpecTree};
use crate::projection::generalizes;
use crate::protocol::{classify, ConflictKind};
use crate::seed;
use crate::store::Store;
use crate::valuation::Scorer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Query {
    Spec {
        target: String,
        depth: Option<usize>,
        relations: bool,
    },
    Gen {
        target: String,
        depth: Option<usize>,
    },
    Search {
        text: String,
    },
    Subset {
        min_usefulness: Option<f64>,
        limit: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}

fn usage(msg: impl Into<String>) -> QueryError {
    QueryError::Usage(msg.into())
}

impl Query {
    pub fn parse(text: &str) -> Result<Query, QueryError> {
        let text = text.trim();
        let (command, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
        let rest = rest.trim();
        let words: Vec<&str> = rest.split_whitespace().collect();
        let depth = |w: &str| {
            w.parse::<usize>()
                .map_err(|_| usage(format!("`{w}` is not a depth")))
        };
        match command {
            "spec" | "gen" => {
                let Some((target, more)) = words.split_first() else {
                    return Err(usage(format!("usage: {command} <id> [depth]")));
                };
                let mut d = None;
                let mut relations = false;
                for w in more {
                    match *w {
                        "+rel" if command == "spec" => relations = true,
                        w if d.is_none() => d = Some(depth(w)?),
                        w => return Err(usage(format!("unexpected `{w}`"))),
                    }
                }
                let target = target.to_string();
                Ok(if command == "spec" {
                    Query::Spec {
                        target,
                        depth: d,
                        relations,
                    }
                } else {
                    Query::Gen { target, depth: d }
                })
            }
            "search" => Ok(Query::Search {
                text: rest.to_string(),
            }),
            "subset" => {
                let mut min_usefulness = None;
                let mut limit = None;
                for w in words {
                    match w.split_once('=') {
                        Some(("min", v)) => {
                            min_usefulness = Some(v.parse().map_err(|_| usage(format!("bad score `{v}`")))?)
                        }
                        Some(("limit", v)) => limit = Some(depth(v)?),
                        _ => return Err(usage(format!("unknown subset criterion `{w}`"))),
                    }
                }
                Ok(Query::Subset {
                    min_usefulness,
                    limit,
                })
            }
            "" => Err(usage("empty query")),
            other => Err(usage(format!("unknown command `{other}`"))),
        }
    }
}

/// One object of a result list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub id: ObjectId,
    pub kind: ObjectKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creator: Option<UserId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub believers: Vec<UserId>,
    /// Informal text or labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// A relation as seen from one of its ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: RelationId,
    pub relation: CategoryId,
    pub other: ObjectId,
    pub creator: UserId,
    pub believers: Vec<UserId>,
}

/// Everything recorded about an object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectDetail {
    #[serde(flatten)]
    pub summary: ObjectSummary,
    pub archived: bool,
    pub outgoing: Vec<Link>,
    pub incoming: Vec<Link>,
    /// Statement bodies, categories and relations as stored.
    pub record: serde_json::Value,
    pub usefulness: f64,
    pub originality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QueryResult {
    Tree { tree: SpecTree, text: String },
    Objects { objects: Vec<ObjectSummary> },
    Statements { statements: Vec<ObjectSummary> },
    /// An unprefixed name matching several categories.
    Ambiguous { name: String, candidates: Vec<ObjectId> },
}

impl QueryResult {
    /// Plain-text form for terminals.
    pub fn to_text(&self) -> String {
        match self {
            QueryResult::Tree { text, .. } => text.clone(),
            QueryResult::Objects { objects: list } | QueryResult::Statements { statements: list } => {
                let mut out = String::new();
                for o in list {
                    let _ = write!(out, "{}", o.id);
                    if let Some(c) = &o.creator {
                        let _ = write!(out, " ({c})");
                    }
                    if let Some(t) = &o.text {
                        let _ = write!(out, " {}", crate::ids::quote(t));
                    }
                    out.push('\n');
                }
                out
            }
            QueryResult::Ambiguous { name, candidates } => {
                let mut out = format!("`{name}` is ambiguous:\n");
                for c in candidates {
                    let _ = writeln!(out, "  {c}");
                }
                out
            }
        }
    }
}

pub enum Resolved {
    One(ObjectId),
    Ambiguous(Vec<ObjectId>),
}

/// Resolves an identifier, or an unprefixed category name.
pub fn resolve(store: &Store, text: &str) -> Result<Resolved, KbError> {
    let text = text.trim();
    if text.contains('#') || text.contains(':') || text.starts_with('\'') {
        let id: ObjectId = text.parse()?;
        return if store.exists(&id) {
            Ok(Resolved::One(id))
        } else {
            Err(KbError::UnknownObject(id))
        };
    }
    let matches: Vec<ObjectId> = store
        .categories()
        .filter(|c| c.id.name == text)
        .map(|c| c.id.clone().into())
        .collect();
    match matches.len() {
        0 => Err(KbError::UnknownObject(ObjectId::literal(text))),
        1 => Ok(Resolved::One(matches.into_iter().next().expect("one match"))),
        _ => Ok(Resolved::Ambiguous(matches)),
    }
}

pub fn summary(store: &Store, id: &ObjectId) -> Option<ObjectSummary> {
    let kind = store.kind_of(id)?;
    let text = match id {
        ObjectId::Statement(s) => store.statement(s).map(|st| match &st.body {
            StatementBody::Informal(t) => t.clone(),
            StatementBody::Graph(_) => statement_text(store, s),
        }),
        ObjectId::Category(c) => store
            .category(c)
            .filter(|c| !c.labels.is_empty())
            .map(|c| c.labels.join(", ")),
        _ => None,
    };
    Some(ObjectSummary {
        id: id.clone(),
        kind,
        creator: store.creator_of(id).cloned(),
        believers: store
            .believers_of(id)
            .map(|b| b.iter().cloned().collect())
            .unwrap_or_default(),
        text,
    })
}

/// Reads a formal statement as `quantifier node relation quantifier node`.
pub fn statement_text(store: &Store, id: &StatementId) -> String {
    let Some(g) = store.statement(id).and_then(|s| s.body.as_graph()) else {
        return String::new();
    };
    let node = |i: usize| {
        let n = &g.nodes[i];
        match n.quantifier.keyword() {
            Some(k) => format!("{k} {}", n.category),
            None => n.category.to_string(),
        }
    };
    let mut parts = Vec::new();
    for e in &g.edges {
        let to = match &e.to {
            crate::model::EdgeTarget::Node(j) => node(*j),
            crate::model::EdgeTarget::Statement(s) => format!("stmt:{}", s.hex()),
        };
        parts.push(format!("{} {} {}", node(e.from), short_relation(&e.relation), to));
    }
    if parts.is_empty() {
        parts = (0..g.nodes.len()).map(node).collect();
    }
    let text = parts.join(", ");
    if g.negated {
        format!("not [{text}]")
    } else {
        text
    }
}

fn short_relation(r: &CategoryId) -> String {
    if r.prefix == seed::relation_user() {
        r.name.clone()
    } else {
        r.to_string()
    }
}

fn links<'a>(it: impl Iterator<Item = &'a crate::model::RelationInstance>, outgoing: bool) -> Vec<Link> {
    it.map(|r| Link {
        id: r.id.clone(),
        relation: r.relation.clone(),
        other: if outgoing { r.to.clone() } else { r.from.clone() },
        creator: r.creator.clone(),
        believers: r.believers.iter().cloned().collect(),
    })
    .collect()
}

pub fn describe(store: &Store, id: &ObjectId) -> Result<ObjectDetail, KbError> {
    let summary = summary(store, id).ok_or_else(|| KbError::UnknownObject(id.clone()))?;
    let record = match id {
        ObjectId::Category(c) => serde_json::to_value(store.category(c)),
        ObjectId::Statement(s) => serde_json::to_value(store.statement(s)),
        ObjectId::Relation(r) => serde_json::to_value(store.relation(r)),
        ObjectId::User(u) => serde_json::to_value(store.user(u)),
        ObjectId::Literal(_) => Ok(serde_json::Value::Null),
    }
    .unwrap_or(serde_json::Value::Null);
    let mut scorer: Scorer<f64, _> = Scorer::new(store);
    let score = |scorer: &mut Scorer<f64, _>, d| match id {
        ObjectId::User(u) => scorer.contributor(u, d).map(|s| s.value).unwrap_or(0.0),
        _ => scorer.score(id, d).map(|s| s.value).unwrap_or(0.0),
    };
    Ok(ObjectDetail {
        usefulness: score(&mut scorer, Dimension::Usefulness),
        originality: score(&mut scorer, Dimension::Originality),
        summary,
        archived: store.is_archived(id),
        outgoing: links(store.outgoing(id), true),
        incoming: links(store.incoming(id), false),
        record,
    })
}

fn node_text(store: &Store, id: &ObjectId) -> String {
    match id {
        ObjectId::Category(c) => c.to_string(),
        ObjectId::Literal(t) => crate::ids::quote(t),
        ObjectId::Statement(s) => crate::ids::quote(&summary(store, id).and_then(|o| o.text).unwrap_or_else(|| s.to_string())),
        other => crate::ids::quote(&other.to_string()),
    }
}

fn render_node(store: &Store, t: &SpecTree, depth: usize, out: &mut String) {
    out.push_str(&"  ".repeat(depth));
    out.push_str(&node_text(store, &t.object));
    if let (ObjectId::Category(c), Some(creator)) = (&t.object, store.creator_of(&t.object)) {
        if creator != &c.prefix {
            let _ = write!(out, " ({creator})");
        }
    }
    let mut first = true;
    let mut i = 0;
    while i < t.annotations.len() {
        let rel = &t.annotations[i].relation;
        out.push_str(if first { " " } else { ", " });
        first = false;
        let _ = write!(out, "{}:", short_relation(rel));
        while i < t.annotations.len() && &t.annotations[i].relation == rel {
            let a = &t.annotations[i];
            let _ = write!(out, " {} ({})", node_text(store, &a.target), a.creator);
            i += 1;
        }
    }
    if depth == 0 && t.children.is_empty() && t.annotations.is_empty() {
        out.push(';');
    }
    if t.repeated {
        out.push_str(" // (see above)");
    }
    out.push('\n');
    for c in &t.children {
        render_node(store, c, depth + 1, out);
    }
}

/// Indented FL-like text: one node per line, children two spaces deeper.
pub fn render_tree(store: &Store, tree: &SpecTree) -> String {
    let mut out = String::new();
    render_node(store, tree, 0, &mut out);
    out
}

/// Case-insensitive substring search over category ids and labels,
/// informal statements and the categories used in formal statements.
pub fn search(store: &Store, text: &str) -> Vec<ObjectSummary> {
    let needle = text.trim().to_lowercase();
    if needle.is_empty() {
        return Vec::new();
    }
    let hit = |s: &str| s.to_lowercase().contains(&needle);
    let mut found: BTreeSet<ObjectId> = BTreeSet::new();
    for c in store.categories() {
        if hit(&c.id.to_string()) || c.labels.iter().any(|l| hit(l)) {
            found.insert(c.id.clone().into());
        }
    }
    for s in store.statements() {
        let matched = match &s.body {
            StatementBody::Informal(t) => hit(t),
            StatementBody::Graph(g) => g.nodes.iter().any(|n| hit(&n.category.to_string())),
        };
        if matched {
            found.insert(s.id.clone().into());
        }
    }
    found
        .into_iter()
        .filter(|o| !store.is_archived(o))
        .filter_map(|o| summary(store, &o))
        .collect()
}

/// Greedy consistent selection of formal statements, most useful and most
/// specialized first.
pub fn consistent_subset(store: &Store, min_usefulness: Option<f64>, limit: Option<usize>) -> Vec<StatementId> {
    let order = CategoryOrder::of_store(store);
    let mut scorer: Scorer<f64, _> = Scorer::new(store);
    let candidates: Vec<&crate::model::Statement> = store
        .statements()
        .filter(|s| s.body.is_formal() && !store.is_archived(&s.id.clone().into()))
        .collect();
    let mut ranked: Vec<(f64, usize, StatementId)> = candidates
        .iter()
        .map(|s| {
            let id: ObjectId = s.id.clone().into();
            let score = scorer
                .score(&id, Dimension::Usefulness)
                .map(|s| s.value)
                .unwrap_or(0.0);
            let depth = candidates
                .iter()
                .filter(|t| {
                    let tid: ObjectId = t.id.clone().into();
                    t.id != s.id && generalizes(store, &order, &tid, &id) && !generalizes(store, &order, &id, &tid)
                })
                .count();
            (score, depth, s.id.clone())
        })
        .filter(|(score, _, _)| min_usefulness.is_none_or(|m| *score >= m))
        .collect();
    ranked.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(b.1.cmp(&a.1))
            .then(a.2.cmp(&b.2))
    });
    let mut selected: Vec<StatementId> = Vec::new();
    for (_, _, id) in ranked {
        if limit.is_some_and(|l| selected.len() >= l) {
            break;
        }
        let g = store.statement(&id).and_then(|s| s.body.as_graph()).expect("formal");
        let clash = selected.iter().any(|t| {
            let h = store.statement(t).and_then(|s| s.body.as_graph()).expect("formal");
            classify(&order, g, h) == Some(ConflictKind::Inconsistency)
        });
        if !clash {
            selected.push(id);
        }
    }
    selected
}

fn tree_result(store: &Store, tree: SpecTree, up: bool) -> QueryResult {
    let mut text = String::new();
    if up {
        text.push_str("// generalizations, most specific first\n");
    }
    text.push_str(&render_tree(store, &tree));
    QueryResult::Tree { tree, text }
}

pub fn run(store: &Store, q: &Query) -> Result<QueryResult, QueryError> {
    let target = |t: &str| -> Result<Result<ObjectId, QueryResult>, QueryError> {
        Ok(match resolve(store, t)? {
            Resolved::One(id) => Ok(id),
            Resolved::Ambiguous(candidates) => Err(QueryResult::Ambiguous {
                name: t.to_string(),
                candidates,
            }),
        })
    };
    match q {
        Query::Spec {
            target: t,
            depth,
            relations,
        } => Ok(match target(t)? {
            Ok(id) => tree_result(store, specializations(store, &id, *depth, *relations)?, false),
            Err(amb) => amb,
        }),
        Query::Gen { target: t, depth } => Ok(match target(t)? {
            Ok(id) => tree_result(store, generalizations(store, &id, *depth)?, true),
            Err(amb) => amb,
        }),
        Query::Search { text } => Ok(QueryResult::Objects {
            objects: search(store, text),
        }),
        Query::Subset {
            min_usefulness,
            limit,
        } => Ok(QueryResult::Statements {
            statements: consistent_subset(store, *min_usefulness, *limit)
                .into_iter()
                .filter_map(|s| summary(store, &s.into()))
                .collect(),
        }),
    }
}

/// Parses and runs a textual query.
pub fn query(store: &Store, text: &str) -> Result<QueryResult, QueryError> {
    run(store, &Query::parse(text)?)
}
