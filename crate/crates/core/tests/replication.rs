mod common;

use std::collections::BTreeSet;

use common::*;
use coopkb_core::journal::{Connection, OpId};
use coopkb_core::model::{ConceptualGraph, Quantifier, Source, StatementBody};
use coopkb_core::protocol::{self, Outcome, Proposal};
use coopkb_core::replication::{self, diff, make_digest, pull};
use coopkb_core::Kb;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ids(kb: &Kb) -> BTreeSet<OpId> {
    kb.records().iter().map(|r| r.op_id.clone()).collect()
}

fn grow(kb: &mut Kb, rng: &mut ChaCha8Rng, peer: usize, n: usize) {
    for i in 0..n {
        let p = replication::random_payload(rng, kb.store(), peer, i);
        let _ = kb.commit(p);
    }
}

#[test]
fn digests_count_local_operations() {
    let mut kb = Kb::in_memory("a");
    assert!(make_digest(&kb).vector.values().all(|v| *v == 0));
    for name in ["x", "y", "z"] {
        add_user(&mut kb, name, &[]);
    }
    let d = make_digest(&kb);
    assert_eq!(d.vector["a"], 3);
    assert_eq!(d, make_digest(&kb));
    assert!(diff(&kb, &d).records.is_empty());
}

#[test]
fn delta_holds_exactly_what_the_remote_lacks() {
    let mut a = Kb::in_memory("a");
    add_user(&mut a, "x", &[]);
    let mut b = Kb::in_memory("b");
    pull(&mut b, &a).unwrap();
    add_user(&mut a, "y", &[]);
    add_user(&mut a, "z", &[]);
    let delta = diff(&a, &make_digest(&b));
    let seqs: Vec<u64> = delta.records.iter().map(|r| r.op_id.seq).collect();
    assert_eq!(seqs, [2, 3]);
}

#[test]
fn exchange_yields_the_union_of_both_logs() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Kb::in_memory("a");
        let mut b = Kb::in_memory("b");
        grow(&mut a, &mut rng, 0, 15);
        grow(&mut b, &mut rng, 1, 15);
        let union: BTreeSet<OpId> = ids(&a).union(&ids(&b)).cloned().collect();
        pull(&mut a, &b).unwrap();
        pull(&mut b, &a).unwrap();
        assert_eq!(ids(&a), union, "seed {seed}");
        assert_eq!(ids(&b), union, "seed {seed}");
        assert_eq!(a.store(), b.store(), "seed {seed}");
        assert!(a.clock() >= b.records().iter().map(|r| r.logical_time).max().unwrap_or(0));
    }
}

#[test]
fn contradicting_statements_from_two_servers_both_survive() {
    let mut a = TestOntology::new().kb;
    let mut b = Kb::in_memory("b");
    pull(&mut b, &a).unwrap();
    add_user(&mut a, "ann", &[]);
    add_user(&mut b, "ben", &[]);
    let g = ConceptualGraph::default()
        .node(node("t#bird", Quantifier::Every))
        .node(node("t#flight", Quantifier::Some))
        .edge(relation("agent_of"), 0, 1);
    let propose = |kb: &mut Kb, who: &str, g: ConceptualGraph| {
        protocol::propose_statement(
            kb,
            Proposal {
                user: user(who),
                body: StatementBody::Graph(g),
                source: Source::person(&user(who)),
                connections: vec![Connection::new(relation("specialization"), cat("t#bird"))],
            },
        )
        .unwrap()
    };
    let yes = propose(&mut a, "ann", g.clone());
    let no = propose(&mut b, "ben", g.negate());
    assert_eq!((yes.outcome, no.outcome), (Outcome::Accepted, Outcome::Accepted));
    pull(&mut a, &b).unwrap();
    pull(&mut b, &a).unwrap();
    assert_eq!(a.store(), b.store());
    let s = a.store();
    assert_eq!(s.statement(&yes.statement).unwrap().creator, user("ann"));
    assert_eq!(s.statement(&no.statement).unwrap().creator, user("ben"));
    assert!(s.statement(&yes.statement).unwrap().believers.contains(&user("ann")));
    assert!(!s.statement(&yes.statement).unwrap().believers.contains(&user("ben")));
}

#[test]
fn single_server_simulation_is_trivially_converged() {
    let r = replication::simulate(&replication::SimConfig {
        peers: 1,
        ..Default::default()
    });
    assert!(r.converged);
    assert_eq!(r.messages_sent, 0);
}
