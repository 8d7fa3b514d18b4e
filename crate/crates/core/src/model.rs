//! Object model of the shared semantic network.
//!
//! Relation instances are directed. For every hierarchy-forming family the
//! `from` end is the more general (or containing) object and the `to` end the
//! more specific one: `seed#animal subtype: wn#bird` is stored as
//! `seed#animal --subtype--> wn#bird`. Corrective relations point from the
//! corrected object to its correction, argumentation relations from the
//! argued object to the argument or objection.

use std::collections::{BTreeMap, BTreeSet};

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use crate::ids::{CategoryId, ObjectId, RelationId, StatementId, UserId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    /// Free-form metadata such as `degree = PhD`, matched by creator filters.
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Person,
    Document,
    Language,
}

/// Where the creator read, and hence interpreted, a statement.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Source {
    pub kind: SourceKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locator: Option<String>,
}

impl Source {
    pub fn person(user: &UserId) -> Self {
        Source {
            kind: SourceKind::Person,
            label: user.to_string(),
            locator: None,
        }
    }

    pub fn document(label: impl Into<String>, locator: Option<String>) -> Self {
        Source {
            kind: SourceKind::Document,
            label: label.into(),
            locator,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryKind {
    ConceptType,
    RelationType,
    Individual,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: CategoryId,
    pub creator: UserId,
    #[serde(default)]
    pub labels: Vec<String>,
    pub kind: CategoryKind,
    /// Part of the built-in ontology; only the root has no attachment.
    #[serde(default)]
    pub seed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationFamily {
    Specialization,
    Corrective,
    Argumentation,
    Mereological,
    Descriptive,
}

impl RelationFamily {
    /// Families that give an object its place in a hierarchy.
    pub fn is_hierarchical(self) -> bool {
        matches!(self, RelationFamily::Specialization | RelationFamily::Mereological)
    }

    /// Families that satisfy the admission gate for statements.
    pub fn satisfies_gate(self) -> bool {
        matches!(self, RelationFamily::Specialization | RelationFamily::Corrective)
    }
}

/// The broad kind of an object, used by relation signatures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    ConceptType,
    RelationType,
    Individual,
    Statement,
    Relation,
    User,
    Literal,
}

impl ObjectKind {
    pub fn flag(self) -> Kinds {
        match self {
            ObjectKind::ConceptType => Kinds::CONCEPT_TYPE,
            ObjectKind::RelationType => Kinds::RELATION_TYPE,
            ObjectKind::Individual => Kinds::INDIVIDUAL,
            ObjectKind::Statement => Kinds::STATEMENT,
            ObjectKind::Relation => Kinds::RELATION,
            ObjectKind::User => Kinds::USER,
            ObjectKind::Literal => Kinds::LITERAL,
        }
    }
}

impl From<CategoryKind> for ObjectKind {
    fn from(kind: CategoryKind) -> Self {
        match kind {
            CategoryKind::ConceptType => ObjectKind::ConceptType,
            CategoryKind::RelationType => ObjectKind::RelationType,
            CategoryKind::Individual => ObjectKind::Individual,
        }
    }
}

bitflags! {
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
    pub struct Kinds: u8 {
        const CONCEPT_TYPE = 1;
        const RELATION_TYPE = 1 << 1;
        const INDIVIDUAL = 1 << 2;
        const STATEMENT = 1 << 3;
        const RELATION = 1 << 4;
        const USER = 1 << 5;
        const LITERAL = 1 << 6;

        const TYPES = Self::CONCEPT_TYPE.bits() | Self::RELATION_TYPE.bits();
        const CATEGORIES = Self::TYPES.bits() | Self::INDIVIDUAL.bits();
        const RECORDED = Self::CATEGORIES.bits()
            | Self::STATEMENT.bits()
            | Self::RELATION.bits()
            | Self::USER.bits();
    }
}

/// Which kinds of object a relation type may connect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub domain: Kinds,
    pub range: Kinds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationType {
    pub id: CategoryId,
    pub family: RelationFamily,
    pub transitive: bool,
    pub acyclic_required: bool,
    pub signature: Signature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    Every,
    Most,
    Some,
    /// The node denotes the individual named by its category.
    Named,
}

impl Quantifier {
    /// Position in the lattice every > most > some > named individual.
    pub fn rank(self) -> u8 {
        match self {
            Quantifier::Every => 3,
            Quantifier::Most => 2,
            Quantifier::Some => 1,
            Quantifier::Named => 0,
        }
    }

    /// Whether a node quantified by `self` may be mapped onto one quantified
    /// by `specific`.
    pub fn generalizes(self, specific: Quantifier) -> bool {
        self.rank() >= specific.rank()
    }

    pub fn keyword(self) -> Option<&'static str> {
        match self {
            Quantifier::Every => Some("every"),
            Quantifier::Most => Some("most"),
            Quantifier::Some => Some("some"),
            Quantifier::Named => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    May,
    Must,
    Can,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConceptNode {
    pub category: CategoryId,
    pub quantifier: Quantifier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
}

impl ConceptNode {
    pub fn new(category: CategoryId, quantifier: Quantifier) -> Self {
        ConceptNode {
            category,
            quantifier,
            modality: None,
        }
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = Some(modality);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeTarget {
    Node(usize),
    /// A relation on a statement.
    Statement(StatementId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphEdge {
    pub relation: CategoryId,
    pub from: usize,
    pub to: EdgeTarget,
}

/// A small conceptual graph: quantified concept nodes linked by typed edges.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConceptualGraph {
    pub nodes: Vec<ConceptNode>,
    #[serde(default)]
    pub edges: Vec<GraphEdge>,
    #[serde(default)]
    pub negated: bool,
}

impl ConceptualGraph {
    pub fn node(mut self, node: ConceptNode) -> Self {
        self.nodes.push(node);
        self
    }

    pub fn edge(mut self, relation: CategoryId, from: usize, to: usize) -> Self {
        self.edges.push(GraphEdge {
            relation,
            from,
            to: EdgeTarget::Node(to),
        });
        self
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    /// Checks internal structure: at least one node, edge endpoints in range,
    /// and the concept nodes connected through edges.
    pub fn check_structure(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("graph has no concept node".into());
        }
        let n = self.nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            if e.from >= n {
                return Err(format!("edge {i} starts at missing node {}", e.from));
            }
            if let EdgeTarget::Node(to) = e.to {
                if to >= n {
                    return Err(format!("edge {i} ends at missing node {to}"));
                }
                adjacency[e.from].push(to);
                adjacency[to].push(e.from);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().all(|s| *s) {
            Ok(())
        } else {
            Err("graph is not connected".into())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementBody {
    Informal(String),
    Graph(ConceptualGraph),
}

impl StatementBody {
    /// Content-hash identifier; identical bodies always get the same id.
    pub fn content_id(&self) -> StatementId {
        let bytes = serde_json::to_vec(self).expect("statement bodies serialize");
        StatementId::from_content(&bytes)
    }

    pub fn as_graph(&self) -> Option<&ConceptualGraph> {
        match self {
            StatementBody::Graph(g) => Some(g),
            StatementBody::Informal(_) => None,
        }
    }

    pub fn is_formal(&self) -> bool {
        matches!(self, StatementBody::Graph(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: StatementId,
    pub body: StatementBody,
    pub creator: UserId,
    pub source: Source,
    pub believers: BTreeSet<UserId>,
}

/// How a relation reads: "any `from` may have for R one or many `to`".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reading {
    pub source: Quantifier,
    /// `Some` in target position means "one or many".
    pub target: Quantifier,
    pub modality: Modality,
}

impl Default for Reading {
    fn default() -> Self {
        Reading {
            source: Quantifier::Every,
            target: Quantifier::Some,
            modality: Modality::May,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInstance {
    pub id: RelationId,
    pub relation: CategoryId,
    pub from: ObjectId,
    pub to: ObjectId,
    pub creator: UserId,
    pub believers: BTreeSet<UserId>,
    #[serde(default)]
    pub reading: Reading,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Usefulness,
    Originality,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::Usefulness, Dimension::Originality];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub voter: UserId,
    pub object: ObjectId,
    pub dimension: Dimension,
    pub value: f64,
}
