#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use coopkb_core::fl::{Block, FlDescription, Node, Target, TargetValue};
use coopkb_core::journal::{Attachment, Connection, Payload};
use coopkb_core::model::{
    CategoryKind, ConceptNode, ConceptualGraph, EdgeTarget, Quantifier, Source, StatementBody,
};
use coopkb_core::{seed, CategoryId, Kb, ObjectId, UserId};
use proptest::prelude::*;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn read_data(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn user(name: &str) -> UserId {
    UserId::new(name).unwrap()
}

pub fn cat(text: &str) -> CategoryId {
    CategoryId::parse(text).unwrap()
}

pub fn add_user(kb: &mut Kb, name: &str, attributes: &[(&str, &str)]) {
    kb.commit(Payload::AddUser {
        name: user(name),
        attributes: attributes
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    })
    .unwrap();
}

/// The small test ontology, written out by hand:
///
/// ```text
/// thing > animal > bird > sparrow, bird > tweety (individual)
/// thing > flight
/// part > physical_part, agent_of
/// ```
pub struct TestOntology {
    pub kb: Kb,
    /// Every (general, specific) pair, reflexive and transitive.
    pub above: BTreeMap<String, Vec<String>>,
}

pub const TYPES: [&str; 5] = ["t#thing", "t#animal", "t#bird", "t#sparrow", "t#flight"];
pub const TWEETY: &str = "t#tweety";

pub fn relation(name: &str) -> CategoryId {
    seed::relation(name)
}

impl TestOntology {
    pub fn new() -> Self {
        let mut kb = Kb::in_memory("oracle");
        add_user(&mut kb, "t", &[]);
        let links = [
            ("seed#thing", "t#thing", CategoryKind::ConceptType),
            ("t#thing", "t#animal", CategoryKind::ConceptType),
            ("t#animal", "t#bird", CategoryKind::ConceptType),
            ("t#bird", "t#sparrow", CategoryKind::ConceptType),
            ("t#thing", "t#flight", CategoryKind::ConceptType),
            ("t#bird", "t#tweety", CategoryKind::Individual),
        ];
        for (parent, child, kind) in links {
            let rel = if kind == CategoryKind::Individual { "instance" } else { "subtype" };
            kb.commit(Payload::AddCategory {
                id: cat(child),
                creator: user("t"),
                kind,
                labels: vec![],
                attachments: vec![Attachment {
                    relation: relation(rel),
                    parent: cat(parent).into(),
                }],
            })
            .unwrap();
        }
        // Warshall closure over the hand-written edges, relations included.
        let mut names: Vec<String> = TYPES.iter().map(|s| s.to_string()).collect();
        names.push(TWEETY.into());
        for r in ["agent_of", "part", "physical_part"] {
            names.push(relation(r).to_string());
        }
        let idx = |s: &str| names.iter().position(|n| n == s).unwrap();
        let n = names.len();
        let mut m = vec![vec![false; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = true;
        }
        for (g, s) in [
            ("t#thing", "t#animal"),
            ("t#animal", "t#bird"),
            ("t#bird", "t#sparrow"),
            ("t#thing", "t#flight"),
            ("t#bird", "t#tweety"),
            ("rel#part", "rel#physical_part"),
        ] {
            m[idx(g)][idx(s)] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if m[i][k] && m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
        let mut above = BTreeMap::new();
        for i in 0..n {
            let below: Vec<String> = (0..n).filter(|&j| m[i][j]).map(|j| names[j].clone()).collect();
            above.insert(names[i].clone(), below);
        }
        TestOntology { kb, above }
    }

    pub fn index(&self, c: &CategoryId) -> usize {
        let key = c.to_string();
        self.above.keys().position(|k| *k == key).unwrap_or_else(|| panic!("{c} outside the test ontology"))
    }

    /// `m[i][j]`: category `i` generalizes category `j`, indexed like `above`.
    pub fn matrix(&self) -> Vec<Vec<bool>> {
        self.above
            .values()
            .map(|below| self.above.keys().map(|k| below.contains(k)).collect())
            .collect()
    }

    pub fn generalizes(&self, general: &CategoryId, specific: &CategoryId) -> bool {
        self.above
            .get(&general.to_string())
            .is_some_and(|b| b.contains(&specific.to_string()))
    }
}

fn rank(q: Quantifier) -> u8 {
    match q {
        Quantifier::Every => 3,
        Quantifier::Most => 2,
        Quantifier::Some => 1,
        Quantifier::Named => 0,
    }
}

/// Whether `map` (general node → specific node) is a projection.
pub fn is_projection(o: &TestOntology, g: &ConceptualGraph, h: &ConceptualGraph, map: &[usize]) -> bool {
    if g.negated != h.negated {
        return false;
    }
    for (i, n) in g.nodes.iter().enumerate() {
        let img = &h.nodes[map[i]];
        if rank(n.quantifier) < rank(img.quantifier) || !o.generalizes(&n.category, &img.category) {
            return false;
        }
    }
    g.edges.iter().all(|e| {
        h.edges.iter().any(|f| {
            f.from == map[e.from]
                && o.generalizes(&e.relation, &f.relation)
                && match (&e.to, &f.to) {
                    (EdgeTarget::Node(a), EdgeTarget::Node(b)) => map[*a] == *b,
                    (EdgeTarget::Statement(a), EdgeTarget::Statement(b)) => a == b,
                    _ => false,
                }
        })
    })
}

/// Tries all `|h|^|g|` node maps.
pub fn brute_project(o: &TestOntology, g: &ConceptualGraph, h: &ConceptualGraph) -> bool {
    Compact::new(o, g).projects_into(&o.matrix(), &Compact::new(o, h))
}

/// A graph with categories replaced by indices into the closure matrix.
pub struct Compact {
    negated: bool,
    nodes: Vec<(u8, usize)>,
    edges: Vec<(usize, usize, Option<usize>, Option<String>)>,
}

impl Compact {
    pub fn new(o: &TestOntology, g: &ConceptualGraph) -> Self {
        let idx = |c: &CategoryId| o.index(c);
        Compact {
            negated: g.negated,
            nodes: g.nodes.iter().map(|n| (rank(n.quantifier), idx(&n.category))).collect(),
            edges: g
                .edges
                .iter()
                .map(|e| match &e.to {
                    EdgeTarget::Node(t) => (idx(&e.relation), e.from, Some(*t), None),
                    EdgeTarget::Statement(s) => (idx(&e.relation), e.from, None, Some(s.to_string())),
                })
                .collect(),
        }
    }

    pub fn projects_into(&self, m: &[Vec<bool>], h: &Compact) -> bool {
        let (n, k) = (self.nodes.len(), h.nodes.len());
        if self.negated != h.negated || n == 0 || k == 0 {
            return false;
        }
        let mut map = vec![0; n];
        for code in 0..k.pow(n as u32) {
            let mut c = code;
            for slot in map.iter_mut() {
                *slot = c % k;
                c /= k;
            }
            let nodes_ok = self.nodes.iter().zip(&map).all(|(&(r, a), &i)| {
                let (r2, b) = h.nodes[i];
                r >= r2 && m[a][b]
            });
            let edges_ok = nodes_ok
                && self.edges.iter().all(|(r, from, to, st)| {
                    h.edges.iter().any(|(r2, from2, to2, st2)| {
                        *from2 == map[*from]
                            && m[*r][*r2]
                            && match (to, to2) {
                                (Some(a), Some(b)) => map[*a] == *b,
                                (None, None) => st == st2,
                                _ => false,
                            }
                    })
                });
            if edges_ok {
                return true;
            }
        }
        false
    }
}

/// Same categories and edges under some node bijection.
pub fn brute_skeleton(a: &ConceptualGraph, b: &ConceptualGraph) -> bool {
    if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    let n = a.nodes.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let edges = |g: &ConceptualGraph, p: &[usize]| {
        let mut v: Vec<(String, usize, String)> = g
            .edges
            .iter()
            .map(|e| {
                let to = match &e.to {
                    EdgeTarget::Node(t) => p[*t].to_string(),
                    EdgeTarget::Statement(s) => s.to_string(),
                };
                (e.relation.to_string(), p[e.from], to)
            })
            .collect();
        v.sort();
        v
    };
    let ident: Vec<usize> = (0..n).collect();
    let target = edges(b, &ident);
    loop {
        if (0..n).all(|i| a.nodes[i].category == b.nodes[perm[i]].category) && edges(a, &perm) == target {
            return true;
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// `"complete-redundancy"`, `"partial-redundancy"`, `"inconsistency"` or none.
pub fn oracle_classify(o: &TestOntology, body: &ConceptualGraph, stored: &ConceptualGraph) -> Option<&'static str> {
    let down = brute_project(o, body, stored);
    let up = brute_project(o, stored, body);
    if down && up {
        return Some("complete-redundancy");
    }
    if down || up {
        return Some("partial-redundancy");
    }
    if body.negated != stored.negated && brute_skeleton(body, stored) {
        let (pos, neg) = if body.negated { (stored, body) } else { (body, stored) };
        let mut plain = neg.clone();
        plain.negated = false;
        if brute_project(o, pos, &plain) {
            return Some("inconsistency");
        }
    }
    None
}

pub fn node(category: &str, q: Quantifier) -> ConceptNode {
    ConceptNode::new(cat(category), q)
}

/// Canonical quantifier: `some` for types, named for the individual.
pub fn canonical(category: &str) -> ConceptNode {
    if category == TWEETY {
        node(category, Quantifier::Named)
    } else {
        node(category, Quantifier::Some)
    }
}

/// Every single-node label: a type under each quantifier, or the individual.
pub fn labels() -> Vec<ConceptNode> {
    let mut out = Vec::new();
    for t in TYPES {
        for q in [Quantifier::Every, Quantifier::Most, Quantifier::Some] {
            out.push(node(t, q));
        }
    }
    out.push(node(TWEETY, Quantifier::Named));
    out
}

fn graph(nodes: Vec<ConceptNode>, edges: &[(&str, usize, usize)], negated: bool) -> ConceptualGraph {
    let mut g = ConceptualGraph::default();
    for n in nodes {
        g = g.node(n);
    }
    for (r, a, b) in edges {
        g = g.edge(relation(r), *a, *b);
    }
    g.negated = negated;
    g
}

/// The graph universe of the projection oracle; see the README for sizes.
pub fn projection_universe() -> Vec<ConceptualGraph> {
    let mut out = Vec::new();
    let labels = labels();
    for l in &labels {
        out.push(graph(vec![l.clone()], &[], false));
        out.push(graph(vec![l.clone()], &[], true));
    }
    for a in &labels {
        for b in &labels {
            for r in ["agent_of", "part", "physical_part"] {
                out.push(graph(vec![a.clone(), b.clone()], &[(r, 0, 1)], false));
            }
        }
    }
    let all: Vec<&str> = TYPES.iter().copied().chain([TWEETY]).collect();
    for a in &all {
        for b in &all {
            for c in &all {
                for r1 in ["agent_of", "part"] {
                    for r2 in ["agent_of", "part"] {
                        out.push(graph(
                            vec![canonical(a), canonical(b), canonical(c)],
                            &[(r1, 0, 1), (r2, 1, 2)],
                            false,
                        ));
                    }
                }
            }
        }
    }
    let four = ["t#animal", "t#bird", "t#sparrow", TWEETY];
    for a in four {
        for b in four {
            for c in four {
                for d in four {
                    for last in ["part", "physical_part"] {
                        out.push(graph(
                            vec![canonical(a), canonical(b), canonical(c), canonical(d)],
                            &[("agent_of", 0, 1), ("agent_of", 1, 2), (last, 2, 3)],
                            false,
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Random small graph for conflict tests.
pub fn random_graph(rng: &mut impl rand::Rng) -> ConceptualGraph {
    let all = ["t#animal", "t#bird", "t#sparrow", "t#flight", TWEETY];
    let n = rng.random_range(1..=3);
    let quants = [Quantifier::Every, Quantifier::Most, Quantifier::Some];
    let nodes: Vec<ConceptNode> = (0..n)
        .map(|_| {
            let c = all[rng.random_range(0..all.len())];
            if c == TWEETY {
                node(c, Quantifier::Named)
            } else {
                node(c, quants[rng.random_range(0..3)])
            }
        })
        .collect();
    let rels = ["agent_of", "part", "physical_part"];
    let edges: Vec<(&str, usize, usize)> = (1..n).map(|i| (rels[rng.random_range(0..3)], i - 1, i)).collect();
    graph(nodes, &edges, rng.random_bool(0.3))
}

/// Commits a formal statement without running conflict detection.
pub fn store_statement(kb: &mut Kb, g: ConceptualGraph, by: &str) -> ObjectId {
    let body = StatementBody::Graph(g);
    let id = body.content_id();
    kb.commit(Payload::AddStatement {
        body,
        creator: user(by),
        source: Source::person(&user(by)),
        connections: vec![Connection::new(relation("specialization"), cat("t#thing"))],
    })
    .unwrap();
    id.into()
}

// FL abstract syntax trees for round-trip tests.

const RESERVED: &[&str] = &[
    "every", "most", "some", "a", "an", "any", "all", "no", "none", "each", "few", "many", "several", "one",
    "two", "three", "at_least", "at_most", "exactly", "only",
];

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}".prop_filter("reserved word", |s| {
        !RESERVED.contains(&s.as_str()) && !s.chars().all(|c| c.is_ascii_digit())
    })
}

fn prefix() -> impl Strategy<Value = Option<String>> {
    prop::option::of(prop::sample::select(vec!["pm", "wn", "s162557", "John"]).prop_map(String::from))
}

fn quantifier() -> impl Strategy<Value = Option<Quantifier>> {
    prop::option::of(prop::sample::select(vec![Quantifier::Every, Quantifier::Most, Quantifier::Some]))
}

fn term() -> impl Strategy<Value = Node> {
    (quantifier(), prefix(), name()).prop_map(|(quantifier, prefix, name)| Node::Term {
        quantifier,
        prefix,
        name,
        span: Default::default(),
    })
}

fn quoted() -> impl Strategy<Value = Node> {
    // '<' is left out: tags are stripped before tokenizing
    "[a-zA-Z0-9 ,.;:!?'\\\\()\\[\\]#/\n-]{0,16}".prop_map(|t| Node::quoted(&t))
}

fn node_any() -> impl Strategy<Value = Node> {
    prop_oneof![3 => term(), 1 => quoted()]
}

fn creator() -> impl Strategy<Value = Option<String>> {
    prop::option::weighted(0.3, prop::sample::select(vec!["pm", "John", "Joe"]).prop_map(String::from))
}

fn relation_name() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => prop::sample::select(vec!["part", "subtype", "agent_of", "url", "definition", "argument"]).prop_map(String::from),
        1 => name().prop_map(|n| format!("pm#{n}")),
    ]
}

fn block(target: BoxedStrategy<Target>) -> impl Strategy<Value = Block> {
    (relation_name(), creator(), prop::collection::vec(target, 1..3)).prop_map(|(relation, creator, targets)| Block {
        relation,
        span: Default::default(),
        creator,
        targets,
    })
}

fn plain_target() -> BoxedStrategy<Target> {
    (node_any(), creator())
        .prop_map(|(n, creator)| Target {
            value: TargetValue::Node(n),
            creator,
        })
        .boxed()
}

fn target() -> BoxedStrategy<Target> {
    let nested = (node_any(), creator(), prop::collection::vec(block(plain_target()), 1..3))
        .prop_map(|(head, head_creator, blocks)| {
            let mut d = FlDescription::new(head);
            d.head_creator = head_creator;
            d.blocks = blocks;
            d
        });
    prop_oneof![
        4 => plain_target(),
        1 => (nested, creator()).prop_map(|(d, creator)| Target {
            value: TargetValue::Nested(Box::new(d)),
            creator,
        }),
    ]
    .boxed()
}

fn description(depth: u32, top: bool) -> BoxedStrategy<FlDescription> {
    let children = if depth == 0 {
        Just(Vec::new()).boxed()
    } else {
        prop::collection::vec(description(depth - 1, false), 0..3).boxed()
    };
    (
        node_any(),
        creator(),
        prop::collection::vec(block(target()), 0..3),
        any::<bool>(),
        children,
    )
        .prop_map(move |(head, head_creator, blocks, terminated, children)| {
            let mut d = FlDescription::new(head);
            d.head_creator = head_creator;
            d.blocks = blocks;
            d.terminated = terminated;
            if d.can_take_children() {
                d.children = children;
            }
            if top && d.blocks.is_empty() && d.children.is_empty() {
                d.terminated = true;
            }
            d
        })
        .boxed()
}

pub fn fl_document() -> impl Strategy<Value = Vec<FlDescription>> {
    prop::collection::vec(description(2, true), 1..4)
}
