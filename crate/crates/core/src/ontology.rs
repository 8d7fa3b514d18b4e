//! Hierarchy maintenance: category admission, the generality order and
//! specialization trees.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::KbError;
use crate::ids::{CategoryId, ObjectId, UserId};
use crate::journal::{Attachment, Payload};
use crate::kb::Kb;
use crate::model::{Category, CategoryKind, RelationFamily};
use crate::store::Store;

/// Answers "is `general` equal to or more general than `specific`?".
pub trait Generality {
    fn generalizes(&self, general: &CategoryId, specific: &CategoryId) -> bool;
}

/// Reflexive-transitive closure of the specialization family over categories.
#[derive(Clone, Debug, Default)]
pub struct CategoryOrder {
    below: BTreeMap<CategoryId, BTreeSet<CategoryId>>,
}

impl CategoryOrder {
    /// Builds the order from explicit `(general, specific)` links.
    pub fn from_links<'a>(
        categories: impl IntoIterator<Item = &'a CategoryId>,
        links: impl IntoIterator<Item = (&'a CategoryId, &'a CategoryId)>,
    ) -> Self {
        let mut children: BTreeMap<&CategoryId, Vec<&CategoryId>> = BTreeMap::new();
        let mut all: BTreeSet<&CategoryId> = categories.into_iter().collect();
        for (g, s) in links {
            children.entry(g).or_default().push(s);
            all.insert(g);
            all.insert(s);
        }
        let mut below = BTreeMap::new();
        for &c in &all {
            let mut seen = BTreeSet::new();
            let mut stack = vec![c];
            while let Some(v) = stack.pop() {
                if seen.insert(v.clone()) {
                    stack.extend(children.get(v).into_iter().flatten().copied());
                }
            }
            below.insert(c.clone(), seen);
        }
        CategoryOrder { below }
    }

    pub fn of_store(store: &Store) -> Self {
        let links: Vec<(&CategoryId, &CategoryId)> = store
            .relations()
            .filter(|r| store.family_of(&r.relation) == Some(RelationFamily::Specialization))
            .filter_map(|r| Some((r.from.as_category()?, r.to.as_category()?)))
            .collect();
        Self::from_links(store.categories().map(|c| &c.id), links)
    }

    /// All categories at or below `c`.
    pub fn below(&self, c: &CategoryId) -> impl Iterator<Item = &CategoryId> {
        self.below.get(c).into_iter().flatten()
    }
}

impl Generality for CategoryOrder {
    fn generalizes(&self, general: &CategoryId, specific: &CategoryId) -> bool {
        general == specific || self.below.get(general).is_some_and(|s| s.contains(specific))
    }
}

/// Admits a category with the given hierarchy attachments.
pub fn add_category(
    kb: &mut Kb,
    id: CategoryId,
    creator: UserId,
    kind: CategoryKind,
    attachments: Vec<Attachment>,
) -> Result<Category, KbError> {
    kb.commit(Payload::AddCategory {
        id: id.clone(),
        creator,
        kind,
        labels: Vec::new(),
        attachments,
    })?;
    Ok(kb.store().category(&id).expect("just admitted").clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Towards more specific objects.
    Down,
    /// Towards more general objects.
    Up,
}

/// Which relations a tree walk follows and what it records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeQuery {
    pub max_depth: Option<usize>,
    pub families: BTreeSet<RelationFamily>,
    pub annotate: bool,
    pub direction: Direction,
}

impl TreeQuery {
    pub fn down() -> Self {
        TreeQuery {
            max_depth: None,
            families: BTreeSet::from([RelationFamily::Specialization]),
            annotate: false,
            direction: Direction::Down,
        }
    }

    pub fn up() -> Self {
        TreeQuery {
            direction: Direction::Up,
            ..TreeQuery::down()
        }
    }

    pub fn depth(mut self, depth: Option<usize>) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn annotated(mut self, annotate: bool) -> Self {
        self.annotate = annotate;
        self
    }
}

/// A relation of a tree node other than the ones the tree follows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub relation: CategoryId,
    pub target: ObjectId,
    pub creator: UserId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecTree {
    pub object: ObjectId,
    /// Relation linking this node to its tree parent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<CategoryId>,
    pub creators: Vec<UserId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
    /// Already expanded elsewhere in the tree; shown as a leaf here.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeated: bool,
    pub children: Vec<SpecTree>,
}

impl SpecTree {
    pub fn node_set(&self) -> BTreeSet<ObjectId> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<ObjectId>) {
        out.insert(self.object.clone());
        for c in &self.children {
            c.collect(out);
        }
    }

    /// Nodes in pre-order, repeats included.
    pub fn preorder(&self) -> Vec<&ObjectId> {
        let mut out = vec![&self.object];
        for c in &self.children {
            out.extend(c.preorder());
        }
        out
    }

    pub fn len(&self) -> usize {
        1 + self.children.iter().map(SpecTree::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Tree neighbours of `v`: `(relation, neighbour)` pairs sorted by neighbour.
fn neighbours(store: &Store, v: &ObjectId, q: &TreeQuery) -> Vec<(CategoryId, ObjectId)> {
    let follows = |rel: &CategoryId| {
        store
            .family_of(rel)
            .is_some_and(|f| q.families.contains(&f))
    };
    let mut out: BTreeMap<ObjectId, CategoryId> = BTreeMap::new();
    let mut add = |rel: &CategoryId, other: &ObjectId| {
        out.entry(other.clone())
            .and_modify(|r| {
                if rel < r {
                    *r = rel.clone()
                }
            })
            .or_insert_with(|| rel.clone());
    };
    match q.direction {
        Direction::Down => {
            for r in store.outgoing(v).filter(|r| follows(&r.relation)) {
                add(&r.relation, &r.to);
            }
        }
        Direction::Up => {
            for r in store.incoming(v).filter(|r| follows(&r.relation)) {
                add(&r.relation, &r.from);
            }
        }
    }
    out.into_iter().map(|(o, r)| (r, o)).collect()
}

fn node_creators(store: &Store, object: &ObjectId, via: Option<&(ObjectId, CategoryId)>) -> Vec<UserId> {
    let mut creators = BTreeSet::new();
    if let Some(c) = store.creator_of(object) {
        creators.insert(c.clone());
    }
    if let Some((parent, rel)) = via {
        let id = crate::ids::RelationId::for_triple(rel, parent, object);
        let id_up = crate::ids::RelationId::for_triple(rel, object, parent);
        for rid in [id, id_up] {
            if let Some(r) = store.relation(&rid) {
                creators.insert(r.creator.clone());
            }
        }
    }
    creators.into_iter().collect()
}

/// Walks the hierarchy from `root`. Each object is expanded once, at the
/// place where a breadth-first walk first reaches it; later occurrences are
/// leaves marked `repeated`.
pub fn walk(store: &Store, root: &ObjectId, q: &TreeQuery) -> Result<SpecTree, KbError> {
    if !store.exists(root) || matches!(root, ObjectId::Literal(_)) {
        return Err(KbError::UnknownObject(root.clone()));
    }
    let mut depth: BTreeMap<ObjectId, usize> = BTreeMap::new();
    let mut tree_parent: BTreeMap<ObjectId, ObjectId> = BTreeMap::new();
    let mut kids: BTreeMap<ObjectId, Vec<(CategoryId, ObjectId)>> = BTreeMap::new();
    depth.insert(root.clone(), 0);
    let mut queue = VecDeque::from([root.clone()]);
    while let Some(v) = queue.pop_front() {
        let d = depth[&v];
        if q.max_depth.is_some_and(|m| d >= m) {
            continue;
        }
        let next = neighbours(store, &v, q);
        for (_, w) in &next {
            if !depth.contains_key(w) {
                depth.insert(w.clone(), d + 1);
                tree_parent.insert(w.clone(), v.clone());
                queue.push_back(w.clone());
            }
        }
        kids.insert(v, next);
    }
    Ok(build(store, root, None, &kids, &tree_parent, q))
}

fn build(
    store: &Store,
    v: &ObjectId,
    via: Option<(ObjectId, CategoryId)>,
    kids: &BTreeMap<ObjectId, Vec<(CategoryId, ObjectId)>>,
    tree_parent: &BTreeMap<ObjectId, ObjectId>,
    q: &TreeQuery,
) -> SpecTree {
    let expanded_here = match &via {
        None => true,
        Some((p, _)) => tree_parent.get(v) == Some(p),
    };
    let annotations = if q.annotate && expanded_here {
        store
            .outgoing(v)
            .filter(|r| {
                !store
                    .family_of(&r.relation)
                    .is_some_and(|f| q.families.contains(&f))
            })
            .map(|r| Annotation {
                relation: r.relation.clone(),
                target: r.to.clone(),
                creator: r.creator.clone(),
            })
            .collect()
    } else {
        Vec::new()
    };
    let children = if expanded_here {
        kids.get(v)
            .into_iter()
            .flatten()
            .map(|(rel, w)| build(store, w, Some((v.clone(), rel.clone())), kids, tree_parent, q))
            .collect()
    } else {
        Vec::new()
    };
    SpecTree {
        object: v.clone(),
        creators: node_creators(store, v, via.as_ref()),
        relation: via.map(|(_, r)| r),
        annotations,
        repeated: !expanded_here,
        children,
    }
}

/// Specializations of `id` (objects below it).
pub fn specializations(
    store: &Store,
    id: &ObjectId,
    max_depth: Option<usize>,
    annotate: bool,
) -> Result<SpecTree, KbError> {
    walk(store, id, &TreeQuery::down().depth(max_depth).annotated(annotate))
}

/// Generalizations of `id` (objects above it).
pub fn generalizations(
    store: &Store,
    id: &ObjectId,
    max_depth: Option<usize>,
) -> Result<SpecTree, KbError> {
    walk(store, id, &TreeQuery::up().depth(max_depth))
}
