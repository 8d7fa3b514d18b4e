//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so every criterion reports even when an earlier one fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use coopkb_core::fl::{self, ErrorClass, Severity};
use coopkb_core::journal::{decode_journal, Connection, OperationRecord, Payload};
use coopkb_core::model::{ConceptualGraph, Dimension, Modality, Quantifier, Source, StatementBody};
use coopkb_core::ontology::CategoryOrder;
use coopkb_core::projection::project;
use coopkb_core::protocol::{self, detect_conflicts, gate_audit, ConflictKind, Outcome, Proposal};
use coopkb_core::query::{self, QueryResult};
use coopkb_core::replication::{self, SimConfig};
use coopkb_core::valuation::{cast_vote, filter_objects, FilterCriteria};
use coopkb_core::{seed, Kb, ObjectId, StatementId, Store};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcomes = Vec<(String, bool)>;

fn criterion(out: &mut Outcomes, name: &str, limit: Duration, f: impl FnOnce() -> Result<(), String>) {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let took = start.elapsed();
    let verdict = match result {
        Ok(Ok(())) if took <= limit => Ok(()),
        Ok(Ok(())) => Err(format!("took {took:.2?}, limit {limit:?}")),
        Ok(Err(e)) => Err(e),
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    match &verdict {
        Ok(()) => println!("PASS {name} ({took:.2?})"),
        Err(e) => println!("FAIL {name} ({took:.2?}): {e}"),
    }
    out.push((name.to_string(), verdict.is_ok()));
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn course_kb() -> Kb {
    let mut kb = Kb::in_memory("course");
    add_user(&mut kb, "pm", &[]);
    let doc = fl::document(&read_data("course.html")).unwrap();
    let report = fl::load_document(&mut kb, &doc, &user("pm")).unwrap();
    assert!(report.is_clean(), "course failed to load: {:?}", report.failures);
    kb
}

fn bird_walkthrough() -> Result<(), String> {
    let mut kb = course_kb();
    let bird_flight = ConceptualGraph::default()
        .node(node("pm#bird", Quantifier::Every))
        .node(node("pm#flight", Quantifier::Some))
        .edge(relation("agent_of"), 0, 1);
    let john = protocol::propose_statement(
        &mut kb,
        Proposal {
            user: user("John"),
            body: StatementBody::Graph(bird_flight),
            source: Source::person(&user("John")),
            connections: vec![Connection::new(relation("specialization"), cat("pm#bird"))],
        },
    )
    .unwrap();
    ensure(john.outcome == Outcome::Accepted, || format!("John: {john:?}"))?;

    let mut healthy = node("pm#healthy_French_bird", Quantifier::Most);
    healthy = healthy.with_modality(Modality::Can);
    let joe_body = StatementBody::Graph(
        ConceptualGraph::default()
            .node(healthy)
            .node(node("pm#flight", Quantifier::Some))
            .edge(relation("agent_of"), 0, 1),
    );
    let before = kb.records().len();
    let bare = protocol::propose_statement(
        &mut kb,
        Proposal {
            user: user("Joe"),
            body: joe_body.clone(),
            source: Source::person(&user("Joe")),
            connections: vec![],
        },
    )
    .unwrap();
    ensure(bare.outcome == Outcome::NeedsConnection, || format!("bare: {bare:?}"))?;
    ensure(kb.records().len() == before, || "rejected proposal was stored".into())?;

    let joe = protocol::propose_statement(
        &mut kb,
        Proposal {
            user: user("Joe"),
            body: joe_body,
            source: Source::person(&user("Joe")),
            connections: vec![Connection::new(
                relation("corrective_restriction"),
                john.statement.clone(),
            )],
        },
    )
    .unwrap();
    ensure(joe.outcome == Outcome::Accepted, || format!("Joe: {joe:?}"))?;

    let store = kb.store();
    for (id, who) in [(&john.statement, "John"), (&joe.statement, "Joe")] {
        let d = query::describe(store, &id.clone().into()).unwrap();
        ensure(d.summary.creator == Some(user(who)), || format!("creator of {id}: {:?}", d.summary.creator))?;
        ensure(d.summary.believers == vec![user(who)], || format!("believers of {id}: {:?}", d.summary.believers))?;
    }
    let john_detail = query::describe(store, &john.statement.clone().into()).unwrap();
    ensure(
        john_detail
            .outgoing
            .iter()
            .any(|l| l.relation == relation("corrective_restriction") && l.other == joe.statement.clone().into()),
        || "correction link missing".into(),
    )?;
    // the statements are reachable from the search command too
    match query::query(store, "search healthy_French_bird").unwrap() {
        QueryResult::Objects { objects } | QueryResult::Statements { statements: objects } => ensure(
            objects.iter().any(|o| o.id == joe.statement.clone().into()),
            || format!("search missed Joe's statement: {objects:?}"),
        ),
        other => Err(format!("search returned {other:?}")),
    }
}

fn tree_ids(r: QueryResult) -> Vec<String> {
    match r {
        QueryResult::Tree { tree, .. } => tree.preorder().into_iter().map(|o| o.to_string()).collect(),
        other => panic!("not a tree: {other:?}"),
    }
}

fn paris_chain() -> Result<(), String> {
    let kb = course_kb();
    let spec = tree_ids(query::query(kb.store(), "spec pm#Paris").unwrap());
    let chain = ["pm#Paris", "pm#Paris_between_1950_and_1960", "pm#Paris_in_1951"];
    ensure(spec == chain, || format!("spec: {spec:?}"))?;
    let gen = tree_ids(query::query(kb.store(), "gen pm#Paris_in_1951").unwrap());
    let reversed: Vec<&str> = chain.iter().rev().copied().collect();
    ensure(gen == reversed, || format!("gen: {gen:?}"))
}

fn projection_oracle() -> Result<(), String> {
    let oracle = TestOntology::new();
    let order = CategoryOrder::of_store(oracle.kb.store());
    let universe = projection_universe();
    for g in &universe {
        oracle.kb.store().check_graph(g).map_err(|e| format!("bad universe graph {g:?}: {e}"))?;
    }
    let matrix = oracle.matrix();
    let compact: Vec<Compact> = universe.iter().map(|g| Compact::new(&oracle, g)).collect();
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4);
    let disagreements: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (oracle, order, universe, compact, matrix) = (&oracle, &order, &universe, &compact, &matrix);
                s.spawn(move || {
                    let mut bad = Vec::new();
                    for (i, g) in universe.iter().enumerate().skip(t).step_by(threads) {
                        for (j, h) in universe.iter().enumerate() {
                            let fast = project(order, g, h);
                            let slow = compact[i].projects_into(matrix, &compact[j]);
                            if let Some(p) = &fast {
                                if !is_projection(oracle, g, h, &p.node_map) {
                                    bad.push(format!("#{i}: returned map is not a projection"));
                                }
                            }
                            if fast.is_some() != slow {
                                bad.push(format!("{g:?} -> {h:?}: project {} oracle {slow}", fast.is_some()));
                            }
                        }
                    }
                    bad
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    println!(
        "  {} graphs, {} ordered pairs, {} disagreements",
        universe.len(),
        universe.len() * universe.len(),
        disagreements.len()
    );
    ensure(disagreements.is_empty(), || disagreements.iter().take(3).cloned().collect::<Vec<_>>().join("\n"))
}

fn conflict_oracle() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checks = 0;
    let mut seen: BTreeMap<ConflictKind, usize> = BTreeMap::new();
    for trial in 0..200 {
        let mut base = TestOntology::new();
        let mut stored: Vec<(StatementId, ConceptualGraph)> = Vec::new();
        let n = rng.random_range(0..=10);
        while stored.len() < n {
            let g = random_graph(&mut rng);
            let id = StatementBody::Graph(g.clone()).content_id();
            if stored.iter().any(|(s, _)| *s == id) {
                continue;
            }
            store_statement(&mut base.kb, g.clone(), "t");
            stored.push((id, g));
        }
        let mut probes: Vec<ConceptualGraph> = stored.iter().map(|(_, g)| g.clone()).collect();
        probes.extend(stored.iter().map(|(_, g)| g.clone().negate()));
        probes.extend((0..10).map(|_| random_graph(&mut rng)));
        for probe in &probes {
            let got: BTreeSet<(StatementId, ConflictKind)> = detect_conflicts(base.kb.store(), probe)
                .into_iter()
                .map(|c| (c.object, c.kind))
                .collect();
            let want: BTreeSet<(StatementId, ConflictKind)> = stored
                .iter()
                .filter_map(|(id, g)| {
                    let kind = match oracle_classify(&base, probe, g)? {
                        "complete-redundancy" => ConflictKind::CompleteRedundancy,
                        "partial-redundancy" => ConflictKind::PartialRedundancy,
                        _ => ConflictKind::Inconsistency,
                    };
                    Some((id.clone(), kind))
                })
                .collect();
            ensure(got == want, || format!("trial {trial}, probe {probe:?}: got {got:?}, want {want:?}"))?;
            checks += 1;
            for (_, k) in want {
                *seen.entry(k).or_default() += 1;
            }
        }
    }
    println!("  {checks} probes over 200 knowledge bases, conflicts found: {seen:?}");
    ensure(seen.len() == 3, || "some conflict kind never occurred".into())
}

const GATE_RELATIONS: [&str; 6] = [
    "subtype",
    "instance",
    "specialization",
    "correction",
    "corrective_restriction",
    "corrective_generalization",
];

fn gate_audit_criterion() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut kb = TestOntology::new().kb;
    let relations = [
        "specialization",
        "subtype",
        "correction",
        "corrective_restriction",
        "corrective_generalization",
        "part",
        "agent_of",
        "argument",
        "objection",
        "definition",
    ];
    let mut accepted = 0;
    let mut attempts = 0;
    let mut gate_rejections = 0;
    while accepted < 1000 {
        attempts += 1;
        assert!(attempts < 100_000, "generator stalled at {accepted} accepted operations");
        if rng.random_bool(0.5) {
            let peer = rng.random_range(0..3);
            let payload = replication::random_payload(&mut rng, kb.store(), peer, attempts);
            let ok = match payload {
                Payload::AddStatement { body, creator, source, connections } => protocol::propose_statement(
                    &mut kb,
                    Proposal { user: creator, body, source, connections },
                )
                .is_ok_and(|r| r.outcome == Outcome::Accepted),
                p => kb.commit(p).is_ok(),
            };
            accepted += usize::from(ok);
            continue;
        }
        let existing: Vec<ObjectId> = kb
            .store()
            .categories()
            .filter(|c| c.kind != coopkb_core::model::CategoryKind::RelationType)
            .map(|c| ObjectId::from(c.id.clone()))
            .chain(kb.store().statements().map(|s| ObjectId::from(s.id.clone())))
            .collect();
        let k = rng.random_range(0..3);
        let connections: Vec<Connection> = (0..k)
            .map(|_| {
                let r = relations[rng.random_range(0..relations.len())];
                let c = Connection::new(relation(r), existing[rng.random_range(0..existing.len())].clone());
                if rng.random_bool(0.3) {
                    c.reversed()
                } else {
                    c
                }
            })
            .collect();
        let body = if rng.random_bool(0.7) {
            StatementBody::Graph(random_graph(&mut rng))
        } else {
            StatementBody::Informal(format!("note {attempts}"))
        };
        let Ok(r) = protocol::propose_statement(
            &mut kb,
            Proposal { user: user("t"), body, source: Source::person(&user("t")), connections },
        ) else {
            continue;
        };
        match r.outcome {
            Outcome::Accepted => accepted += 1,
            Outcome::NeedsConnection => gate_rejections += 1,
            Outcome::ConflictDetected => {}
        }
    }
    let store = kb.store();
    let audit = gate_audit(store);
    let gate: Vec<_> = GATE_RELATIONS.iter().map(|r| relation(r)).collect();
    let unlinked: Vec<&StatementId> = store
        .statements()
        .map(|s| &s.id)
        .filter(|id| {
            let o: ObjectId = (*id).clone().into();
            !store
                .relations()
                .any(|r| (r.from == o || r.to == o) && gate.contains(&r.relation))
        })
        .collect();
    println!(
        "  {} statements, {accepted} accepted operations, {gate_rejections} gate rejections",
        store.statements().count()
    );
    ensure(audit.is_empty(), || format!("gate_audit: {audit:?}"))?;
    ensure(unlinked.is_empty(), || format!("statements without a gate link: {unlinked:?}"))?;
    ensure(gate_rejections > 0, || "the generator never hit the gate".into())
}

fn ingest_one(kb: &mut Kb, r: &OperationRecord) {
    kb.ingest(vec![r.clone()]).unwrap();
}

fn replication_convergence() -> Result<(), String> {
    for seed in 0..100 {
        let report = replication::simulate(&SimConfig {
            seed,
            peers: 3,
            duplicate_rate: 0.3,
            ..SimConfig::default()
        });
        ensure(report.converged && report.pair_equal.iter().all(|p| p.2), || format!("seed {seed}: {report:?}"))?;
        ensure(report.messages_duplicated > 0 || report.messages_sent < 10, || format!("seed {seed}: no duplicates"))?;
    }

    // six records from two origins, with causal links across them
    let mut a = Kb::in_memory("a");
    let mut b = Kb::in_memory("b");
    a.commit(Payload::AddUser { name: user("ua"), attributes: Default::default() }).unwrap();
    a.commit(Payload::AddCategory {
        id: cat("ua#x"),
        creator: user("ua"),
        kind: coopkb_core::model::CategoryKind::ConceptType,
        labels: vec![],
        attachments: vec![coopkb_core::journal::Attachment { relation: relation("subtype"), parent: seed::root().into() }],
    })
    .unwrap();
    replication::pull(&mut b, &a).unwrap();
    b.commit(Payload::AddUser { name: user("ub"), attributes: Default::default() }).unwrap();
    b.commit(Payload::AddCategory {
        id: cat("ub#y"),
        creator: user("ub"),
        kind: coopkb_core::model::CategoryKind::ConceptType,
        labels: vec![],
        attachments: vec![coopkb_core::journal::Attachment { relation: relation("subtype"), parent: cat("ua#x").into() }],
    })
    .unwrap();
    let st = protocol::propose_statement(
        &mut b,
        Proposal {
            user: user("ub"),
            body: StatementBody::Informal("y is a kind of x".into()),
            source: Source::person(&user("ub")),
            connections: vec![Connection::new(relation("specialization"), cat("ub#y"))],
        },
    )
    .unwrap();
    replication::pull(&mut a, &b).unwrap();
    protocol::add_belief(&mut a, user("ua"), st.statement.clone().into()).unwrap();
    replication::pull(&mut b, &a).unwrap();

    let mut records: Vec<OperationRecord> = a.records().to_vec();
    records.sort_by_key(|r| r.order_key());
    ensure(records.len() == 6, || format!("script has {} records", records.len()))?;
    ensure(a.store() == b.store(), || "origins diverged".into())?;
    let expected = Store::rebuild(&records);
    let mut order: Vec<usize> = (0..6).collect();
    let mut orders = 0;
    loop {
        let mut c = Kb::in_memory("c");
        for &i in &order {
            ingest_one(&mut c, &records[i]);
        }
        ensure(c.pending().is_empty() && c.quarantine().is_empty(), || format!("order {order:?} left work behind"))?;
        ensure(*c.store() == expected, || format!("order {order:?} diverged"))?;
        orders += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }
    ensure(orders == 720, || format!("{orders} orders"))
}

fn filter_corpus() -> Result<(), String> {
    let corpus: serde_json::Value = serde_json::from_str(&read_data("filter_corpus.json")).unwrap();
    let mut kb = Kb::in_memory("corpus");
    for u in corpus["users"].as_array().unwrap() {
        let attrs: Vec<(&str, &str)> = u["attributes"]
            .as_object()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str().unwrap()))
            .collect();
        add_user(&mut kb, u["name"].as_str().unwrap(), &attrs);
    }
    let mut ids: BTreeMap<String, StatementId> = BTreeMap::new();
    let mut creators: BTreeMap<String, String> = BTreeMap::new();
    for s in corpus["statements"].as_array().unwrap() {
        let key = s["key"].as_str().unwrap().to_string();
        let creator = s["creator"].as_str().unwrap();
        let r = protocol::propose_statement(
            &mut kb,
            Proposal {
                user: user(creator),
                body: StatementBody::Informal(s["text"].as_str().unwrap().into()),
                source: Source::person(&user(creator)),
                connections: vec![Connection::new(relation("specialization"), seed::root())],
            },
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Accepted);
        ids.insert(key.clone(), r.statement);
        creators.insert(key, creator.to_string());
    }
    let pairs = |field: &str| -> Vec<(String, String)> {
        corpus[field]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| (p[0].as_str().unwrap().to_string(), p[1].as_str().unwrap().to_string()))
            .collect()
    };
    for (field, rel) in [("arguments", "argument"), ("objections", "objection")] {
        for (claim, child) in pairs(field) {
            protocol::add_relation(
                &mut kb,
                user(&creators[&child]),
                relation(rel),
                ids[&claim].clone().into(),
                ids[&child].clone().into(),
            )
            .unwrap();
        }
    }
    let mut votes: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for v in corpus["votes"].as_array().unwrap() {
        let key = v["object"].as_str().unwrap();
        let value = v["value"].as_f64().unwrap();
        cast_vote(&mut kb, user(v["voter"].as_str().unwrap()), ids[key].clone().into(), Dimension::Usefulness, value)
            .unwrap();
        votes.entry(key.to_string()).or_default().push(value);
    }
    let crit = &corpus["criteria"];
    let min = crit["min_usefulness"].as_f64().unwrap();
    let criteria = FilterCriteria {
        min_score: [(Dimension::Usefulness, min)].into(),
        arguments_without_objections: crit["arguments_without_objections"].as_bool().unwrap(),
        creator_attributes: crit["creator_attributes"]
            .as_object()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.as_str().unwrap().to_string()))
            .collect(),
        ..Default::default()
    };
    let got: BTreeSet<ObjectId> = filter_objects(kb.store(), &criteria).into_iter().collect();
    let designated: BTreeSet<ObjectId> = corpus["expected"]
        .as_object()
        .unwrap()
        .keys()
        .map(|k| ids[k].clone().into())
        .collect();

    // independent evaluation straight from the corpus file
    let args = pairs("arguments");
    let objs = pairs("objections");
    fn score(k: &str, votes: &BTreeMap<String, Vec<f64>>, args: &[(String, String)], objs: &[(String, String)]) -> f64 {
        let direct = votes.get(k).map_or(0.0, |v| v.iter().sum::<f64>() / v.len() as f64);
        let side = |list: &[(String, String)]| -> f64 {
            list.iter()
                .filter(|(c, _)| c == k)
                .map(|(_, a)| score(a, votes, args, objs).max(0.0))
                .sum()
        };
        (direct + 0.25 * (side(args) - side(objs))).clamp(-1.0, 1.0)
    }
    let attrs: BTreeMap<String, Option<String>> = corpus["users"]
        .as_array()
        .unwrap()
        .iter()
        .map(|u| (u["name"].as_str().unwrap().to_string(), u["attributes"]["degree"].as_str().map(String::from)))
        .collect();
    let oracle: BTreeSet<ObjectId> = ids
        .iter()
        .filter(|(k, _)| score(k, &votes, &args, &objs) >= min)
        .filter(|(k, _)| {
            let mine: Vec<&String> = args.iter().filter(|(c, _)| c == *k).map(|(_, a)| a).collect();
            !mine.is_empty() && mine.iter().all(|a| !objs.iter().any(|(c, _)| c == *a))
        })
        .filter(|(k, _)| attrs[&creators[*k]].as_deref() == Some("PhD"))
        .map(|(_, id)| id.clone().into())
        .collect();

    let universe = coopkb_core::valuation::universe(kb.store());
    println!("  {} statements, {} filterable objects, {} selected", ids.len(), universe.len(), got.len());
    ensure(oracle == designated, || format!("corpus annotations disagree with oracle: {oracle:?}"))?;
    ensure(got == designated, || format!("got {got:?}, designated {designated:?}"))
}

fn linter_taxonomy() -> Result<(), String> {
    let store = Store::seeded();
    let bad = fl::lint_text(&read_data("lint/bad.fl"), &store, None);
    for d in &bad {
        println!("  {}", d.render("bad.fl"));
    }
    for class in [ErrorClass::Lexical, ErrorClass::Syntactic, ErrorClass::Ontological, ErrorClass::Indentation] {
        ensure(
            bad.iter().any(|d| d.class == class && d.severity == Severity::Error),
            || format!("no {class:?} error"),
        )?;
    }
    for clean in ["lint/clean.fl", "lint/clean.html"] {
        let diags = fl::lint_text(&read_data(clean), &store, None);
        ensure(diags.is_empty(), || format!("{clean}: {}", fl::render(clean, &diags)))?;
    }
    Ok(())
}

fn fl_round_trip() -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&fl_document(), |doc| {
            let text = fl::serialize(&doc);
            let parsed = fl::parse(&text).map_err(|e| proptest::test_runner::TestCaseError::fail(format!("{e}\n{text}")))?;
            let strip = |d: &[fl::FlDescription]| serde_json::to_value(strip_spans(d)).unwrap();
            proptest::prop_assert_eq!(strip(&parsed), strip(&doc), "{}", text);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn strip_spans(ds: &[fl::FlDescription]) -> Vec<fl::FlDescription> {
    fn node(n: &fl::Node) -> fl::Node {
        let mut n = n.clone();
        match &mut n {
            fl::Node::Term { span, .. } | fl::Node::Quoted { span, .. } => *span = Default::default(),
        }
        n
    }
    fn desc(d: &fl::FlDescription) -> fl::FlDescription {
        let mut d = d.clone();
        d.head = node(&d.head);
        for b in &mut d.blocks {
            b.span = Default::default();
            for t in &mut b.targets {
                t.value = match &t.value {
                    fl::TargetValue::Node(n) => fl::TargetValue::Node(node(n)),
                    fl::TargetValue::Nested(inner) => fl::TargetValue::Nested(Box::new(desc(inner))),
                };
            }
        }
        d.children = d.children.iter().map(desc).collect();
        d
    }
    ds.iter().map(desc).collect()
}

fn crash_recovery() -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("journal.ndjson");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    {
        let mut kb = Kb::open(&path, "s1").unwrap();
        let mut n = 0;
        while kb.records().len() < 50 {
            n += 1;
            let p = replication::random_payload(&mut rng, kb.store(), 0, n);
            let _ = kb.commit(p);
        }
    }
    let bytes = std::fs::read(&path).unwrap();
    let all = decode_journal(&bytes).unwrap().records;
    ensure(all.len() == 50, || format!("{} records", all.len()))?;
    let cut = dir.path().join("cut.ndjson");
    for k in 0..=bytes.len() {
        let prefix = &bytes[..k];
        let complete = prefix.iter().filter(|&&b| b == b'\n').count();
        let committed = prefix.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        std::fs::write(&cut, prefix).unwrap();
        let kb = Kb::open(&cut, "s1").map_err(|e| format!("offset {k}: {e}"))?;
        ensure(kb.records().len() == complete, || format!("offset {k}: {} records", kb.records().len()))?;
        ensure(*kb.store() == Store::rebuild(&all[..complete]), || format!("offset {k}: state differs"))?;
        let len = std::fs::metadata(&cut).unwrap().len() as usize;
        ensure(len == committed, || format!("offset {k}: journal left at {len} bytes, expected {committed}"))?;
    }
    // a recovered journal keeps accepting writes
    std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    let mut kb = Kb::open(&cut, "s1").unwrap();
    kb.commit(Payload::AddUser { name: user("late"), attributes: Default::default() }).unwrap();
    drop(kb);
    let kb = Kb::open(&cut, "s1").unwrap();
    ensure(kb.records().len() == 50 && kb.store().user(&user("late")).is_some(), || "append after recovery lost".into())?;
    println!("  {} truncation offsets", bytes.len() + 1);
    Ok(())
}

fn main() {
    let mut out = Outcomes::new();
    let secs = Duration::from_secs;
    criterion(&mut out, "bird_example_walkthrough", secs(1), bird_walkthrough);
    criterion(&mut out, "paris_chain_spec_and_gen", secs(1), paris_chain);
    criterion(&mut out, "projection_matches_brute_force", secs(60), projection_oracle);
    criterion(&mut out, "conflict_detection_matches_oracle", secs(120), conflict_oracle);
    criterion(&mut out, "gate_audit_after_1000_operations", secs(120), gate_audit_criterion);
    criterion(&mut out, "replication_converges", secs(120), replication_convergence);
    criterion(&mut out, "filter_query_on_corpus", secs(10), filter_corpus);
    criterion(&mut out, "linter_covers_four_classes", secs(10), linter_taxonomy);
    criterion(&mut out, "fl_round_trip_500_documents", secs(120), fl_round_trip);
    criterion(&mut out, "journal_recovers_at_every_offset", secs(300), crash_recovery);
    let failed: Vec<&str> = out.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect();
    println!("{} passed, {} failed", out.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
