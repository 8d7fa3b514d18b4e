//! Built-in ontology every knowledge base starts from.
//!
//! It is not journaled: every server starts from the same seed, so only
//! user contributions are replicated.

use crate::ids::{CategoryId, UserId};
use crate::model::{Kinds, RelationFamily, RelationType, Signature};

/// Creator of the seed concept types.
pub const SEED_USER: &str = "seed";
/// Creator (and prefix) of all relation types.
pub const RELATION_USER: &str = "rel";
pub const ROOT: &str = "thing";
/// Root of the relation-type hierarchy.
pub const RELATION_ROOT: &str = "relation";

/// `(child, parent)` pairs of seed concept types, linked by `subtype`.
pub const SEED_CONCEPTS: &[(&str, &str)] = &[
    ("process", "thing"),
    ("task", "process"),
    ("entity", "thing"),
    ("characteristic", "thing"),
];

pub fn seed_user() -> UserId {
    UserId::new(SEED_USER).expect("valid seed user")
}

pub fn relation_user() -> UserId {
    UserId::new(RELATION_USER).expect("valid relation user")
}

pub fn root() -> CategoryId {
    seed_category(ROOT)
}

pub fn seed_category(name: &str) -> CategoryId {
    CategoryId::new(seed_user(), name).expect("valid seed name")
}

/// Id of the relation type called `name` (e.g. `rel#subtype`).
pub fn relation(name: &str) -> CategoryId {
    CategoryId::new(relation_user(), name).expect("valid relation name")
}

struct Spec {
    name: &'static str,
    family: RelationFamily,
    parent: Option<&'static str>,
    domain: Kinds,
    range: Kinds,
}

const fn spec(
    name: &'static str,
    family: RelationFamily,
    parent: Option<&'static str>,
    domain: Kinds,
    range: Kinds,
) -> Spec {
    Spec {
        name,
        family,
        parent,
        domain,
        range,
    }
}

const ATTACHABLE: Kinds = Kinds::CATEGORIES.union(Kinds::STATEMENT);
const CORRECTABLE: Kinds = ATTACHABLE.union(Kinds::RELATION);
const DESCRIBED: Kinds = Kinds::RECORDED;
const ANYTHING: Kinds = Kinds::all();

fn relation_specs() -> Vec<Spec> {
    use RelationFamily::*;
    let descriptive = |name| spec(name, Descriptive, None, DESCRIBED, ANYTHING);
    let mut specs = vec![
        spec("subtype", Specialization, None, Kinds::TYPES, Kinds::TYPES),
        spec(
            "instance",
            Specialization,
            None,
            Kinds::CONCEPT_TYPE,
            Kinds::INDIVIDUAL,
        ),
        spec("specialization", Specialization, None, ATTACHABLE, ATTACHABLE),
        spec("part", Mereological, None, ATTACHABLE, ATTACHABLE),
        spec("physical_part", Mereological, Some("part"), ATTACHABLE, ATTACHABLE),
        spec("subtask", Mereological, Some("part"), ATTACHABLE, ATTACHABLE),
        spec("correction", Corrective, None, CORRECTABLE, CORRECTABLE),
        spec(
            "corrective_restriction",
            Corrective,
            Some("correction"),
            CORRECTABLE,
            CORRECTABLE,
        ),
        spec(
            "corrective_generalization",
            Corrective,
            Some("correction"),
            CORRECTABLE,
            CORRECTABLE,
        ),
        spec(
            "argument",
            Argumentation,
            None,
            CORRECTABLE,
            Kinds::STATEMENT.union(Kinds::LITERAL),
        ),
        spec(
            "objection",
            Argumentation,
            None,
            CORRECTABLE,
            Kinds::STATEMENT.union(Kinds::LITERAL),
        ),
        spec(
            "definition",
            Descriptive,
            None,
            DESCRIBED,
            Kinds::LITERAL.union(Kinds::STATEMENT),
        ),
        spec("url", Descriptive, None, DESCRIBED, Kinds::LITERAL),
    ];
    for name in [
        "technique",
        "tool",
        "annotation",
        "use",
        "purpose",
        "rationale",
        "role",
        "origin",
        "example",
        "advantage",
        "disadvantage",
        "requirement",
        "agent",
        "agent_of",
        "object",
        "input",
        "output",
        "parameter",
        "attribute",
        "characteristic",
        "support",
    ] {
        specs.push(descriptive(name));
    }
    specs
}

/// Every seed relation type with its super-type in the relation hierarchy.
pub fn relation_types() -> Vec<(RelationType, CategoryId)> {
    relation_specs()
        .into_iter()
        .map(|s| {
            let hierarchical = s.family.is_hierarchical();
            let rt = RelationType {
                id: relation(s.name),
                family: s.family,
                transitive: hierarchical,
                acyclic_required: !matches!(s.family, RelationFamily::Descriptive),
                signature: Signature {
                    domain: s.domain,
                    range: s.range,
                },
            };
            (rt, relation(s.parent.unwrap_or(RELATION_ROOT)))
        })
        .collect()
}
