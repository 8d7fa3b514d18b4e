//! Digest/delta synchronization between servers and a seeded multi-server
//! simulator.
//!
//! A server's state is the set of operation records it holds. Two servers
//! exchange a digest (the sender's version vector); the receiver answers with
//! every record above it. Because stores are rebuilt in the total order of
//! records, the final state depends only on the set of records.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::KbError;
use crate::ids::{CategoryId, ObjectId, UserId};
use crate::journal::{Attachment, Connection, OperationRecord, Payload};
use crate::kb::{IngestReport, Kb, VersionVector};
use crate::model::{CategoryKind, Dimension, Reading, Source, StatementBody};
use crate::protocol::{propose_statement, Proposal};
use crate::seed;
use crate::store::Store;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digest {
    pub server_id: String,
    pub vector: VersionVector,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub server_id: String,
    pub records: Vec<OperationRecord>,
}

pub fn make_digest(kb: &Kb) -> Digest {
    Digest {
        server_id: kb.server_id().to_string(),
        vector: kb.version_vector().clone(),
    }
}

/// Records `kb` holds that `remote` does not cover, in replay order.
pub fn diff(kb: &Kb, remote: &Digest) -> Delta {
    let mut records: Vec<OperationRecord> = kb
        .records()
        .iter()
        .filter(|r| r.op_id.seq > remote.vector.get(&r.op_id.server_id).copied().unwrap_or(0))
        .cloned()
        .collect();
    records.sort_by_key(|r| r.order_key());
    Delta {
        server_id: kb.server_id().to_string(),
        records,
    }
}

pub fn ingest(kb: &mut Kb, delta: Delta) -> Result<IngestReport, KbError> {
    kb.ingest(delta.records)
}

/// Pulls everything `from` has that `to` lacks.
pub fn pull(to: &mut Kb, from: &Kb) -> Result<IngestReport, KbError> {
    let delta = diff(from, &make_digest(to));
    ingest(to, delta)
}

/// One scripted mutation, committed at `peer`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptOp {
    pub peer: usize,
    pub payload: Payload,
}

fn default_peers() -> usize {
    3
}

fn default_ops() -> usize {
    30
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_peers")]
    pub peers: usize,
    /// Random operations to generate when no script is given.
    #[serde(default = "default_ops")]
    pub ops: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Vec<ScriptOp>>,
    /// Chance that a step is a gossip exchange rather than a local write.
    #[serde(default = "half")]
    pub gossip_rate: f64,
    #[serde(default)]
    pub drop_rate: f64,
    #[serde(default)]
    pub duplicate_rate: f64,
    /// Upper bound on all-pairs rounds after the script ends.
    #[serde(default = "default_rounds")]
    pub max_quiescence_rounds: usize,
}

fn half() -> f64 {
    0.5
}

fn default_rounds() -> usize {
    16
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            peers: default_peers(),
            ops: default_ops(),
            script: None,
            gossip_rate: half(),
            drop_rate: 0.0,
            duplicate_rate: 0.0,
            max_quiescence_rounds: default_rounds(),
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<SimConfig, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub peers: usize,
    pub ops_committed: usize,
    /// Scripted payloads the origin peer rejected.
    pub ops_rejected: usize,
    pub messages_sent: usize,
    pub messages_dropped: usize,
    pub messages_duplicated: usize,
    pub quiescence_rounds: usize,
    /// `(a, b, equal)` for every pair of peers.
    pub pair_equal: Vec<(usize, usize, bool)>,
    pub converged: bool,
    pub records: usize,
}

/// Generates a payload that is valid on `store`, for the peer `peer`.
/// `n` keeps generated names unique.
pub fn random_payload(rng: &mut impl Rng, store: &Store, peer: usize, n: usize) -> Payload {
    let users: Vec<UserId> = store
        .users()
        .map(|u| u.id.clone())
        .filter(|u| u != &seed::seed_user() && u != &seed::relation_user())
        .collect();
    let own = UserId::new(format!("p{peer}")).expect("valid user");
    if store.user(&own).is_none() {
        return Payload::AddUser {
            name: own,
            attributes: Default::default(),
        };
    }
    let user = users.choose(rng).cloned().unwrap_or(own.clone());
    let categories: Vec<CategoryId> = store
        .categories()
        .filter(|c| c.kind == CategoryKind::ConceptType)
        .map(|c| c.id.clone())
        .collect();
    let pick = |rng: &mut dyn rand::RngCore| categories.choose(rng).cloned().expect("seed categories");
    let objects: Vec<ObjectId> = store
        .categories()
        .map(|c| ObjectId::from(c.id.clone()))
        .chain(store.statements().map(|s| ObjectId::from(s.id.clone())))
        .collect();
    match rng.random_range(0..7) {
        0 => Payload::AddUser {
            name: UserId::new(format!("p{peer}u{n}")).expect("valid user"),
            attributes: [(String::from("degree"), String::from(if n % 2 == 0 { "PhD" } else { "MSc" }))].into(),
        },
        1 | 2 => Payload::AddCategory {
            id: CategoryId::new(own, format!("c{peer}_{n}")).expect("valid id"),
            creator: user,
            kind: CategoryKind::ConceptType,
            labels: Vec::new(),
            attachments: vec![Attachment {
                relation: seed::relation("subtype"),
                parent: pick(rng).into(),
            }],
        },
        3 => {
            let rel = ["part", "use", "agent_of", "subtype"].choose(rng).copied().expect("non-empty");
            Payload::AddRelation {
                relation: seed::relation(rel),
                from: pick(rng).into(),
                to: pick(rng).into(),
                creator: user,
                reading: Reading::default(),
            }
        }
        4 => Payload::AddStatement {
            body: StatementBody::Informal(format!("claim {peer}/{n}")),
            creator: user.clone(),
            source: Source::person(&user),
            connections: vec![Connection::new(seed::relation("specialization"), pick(rng))],
        },
        5 => Payload::CastVote {
            voter: user,
            object: objects.choose(rng).cloned().expect("non-empty"),
            dimension: if rng.random_bool(0.5) {
                Dimension::Usefulness
            } else {
                Dimension::Originality
            },
            value: (rng.random_range(-4..=4) as f64) / 4.0,
        },
        _ => Payload::AddBelief {
            user,
            object: objects.choose(rng).cloned().expect("non-empty"),
        },
    }
}

/// Commits a payload, sending statements through the admission protocol.
fn commit(kb: &mut Kb, payload: Payload) -> bool {
    match payload {
        Payload::AddStatement {
            body,
            creator,
            source,
            connections,
        } => propose_statement(
            kb,
            Proposal {
                user: creator,
                body,
                source,
                connections,
            },
        )
        .is_ok_and(|r| r.outcome == crate::protocol::Outcome::Accepted),
        other => kb.commit(other).is_ok(),
    }
}

fn exchange(
    peers: &mut [Kb],
    a: usize,
    b: usize,
    rng: &mut ChaCha8Rng,
    cfg: &SimConfig,
    report: &mut SimReport,
    lossy: bool,
) -> bool {
    // a asks b for what it is missing
    let digest = make_digest(&peers[a]);
    let delta = diff(&peers[b], &digest);
    report.messages_sent += 2;
    if lossy && rng.random_bool(cfg.drop_rate.clamp(0.0, 1.0)) {
        report.messages_dropped += 1;
        return false;
    }
    let copies = if lossy && rng.random_bool(cfg.duplicate_rate.clamp(0.0, 1.0)) {
        report.messages_duplicated += 1;
        2
    } else {
        1
    };
    let mut changed = false;
    for _ in 0..copies {
        let before = peers[a].records().len();
        let _ = ingest(&mut peers[a], delta.clone());
        changed |= peers[a].records().len() != before;
    }
    changed
}

/// Runs the script (or random operations) with random gossip, then
/// all-pairs rounds without loss until nothing changes.
pub fn simulate(cfg: &SimConfig) -> SimReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.peers.max(1);
    let mut peers: Vec<Kb> = (0..n).map(|i| Kb::in_memory(format!("s{i}"))).collect();
    let mut report = SimReport {
        peers: n,
        ..SimReport::default()
    };
    let mut script = cfg.script.clone().map(|s| s.into_iter());
    let mut generated = 0;
    loop {
        let gossip = n > 1 && rng.random_bool(cfg.gossip_rate.clamp(0.0, 1.0));
        if gossip {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            exchange(&mut peers, a, b, &mut rng, cfg, &mut report, true);
            continue;
        }
        let op = match &mut script {
            Some(it) => match it.next() {
                Some(op) => op,
                None => break,
            },
            None if generated < cfg.ops => {
                generated += 1;
                let peer = rng.random_range(0..n);
                let payload = random_payload(&mut rng, peers[peer].store(), peer, generated);
                ScriptOp { peer, payload }
            }
            None => break,
        };
        let peer = op.peer % n;
        if commit(&mut peers[peer], op.payload) {
            report.ops_committed += 1;
        } else {
            report.ops_rejected += 1;
        }
    }
    for round in 0..cfg.max_quiescence_rounds {
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    changed |= exchange(&mut peers, a, b, &mut rng, cfg, &mut report, false);
                }
            }
        }
        report.quiescence_rounds = round + 1;
        if !changed {
            break;
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            report
                .pair_equal
                .push((a, b, peers[a].store() == peers[b].store()));
        }
    }
    report.converged = report.pair_equal.iter().all(|(_, _, eq)| *eq);
    report.records = peers[0].records().len();
    report
}
