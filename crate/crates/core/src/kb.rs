//! The serialized writer: a store plus the journal that feeds it.
//!
//! Local mutations are validated, appended to the journal and then applied.
//! Records from peers go through [`Kb::ingest`], which keeps the per-origin
//! sequence gap-free and replays in the deterministic total order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{KbError, PersistError};
use crate::ids::ObjectId;
use crate::journal::{recover_journal, JournalWriter, OpId, OperationRecord, Payload};
use crate::store::Store;

/// Per-origin highest contiguous sequence number held.
pub type VersionVector = BTreeMap<String, u64>;

/// Why an incoming record was not taken.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quarantined {
    pub record: OperationRecord,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub duplicates: usize,
    /// Held back until the gap before them is filled.
    pub pending: usize,
    pub quarantined: usize,
}

pub struct Kb {
    server_id: String,
    store: Store,
    /// Every record held, in arrival order.
    records: Vec<OperationRecord>,
    held: BTreeMap<OpId, usize>,
    vector: VersionVector,
    clock: u64,
    pending: Vec<OperationRecord>,
    quarantine: Vec<Quarantined>,
    journal: Option<(PathBuf, JournalWriter)>,
}

impl std::fmt::Debug for Kb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kb")
            .field("server_id", &self.server_id)
            .field("records", &self.records.len())
            .field("clock", &self.clock)
            .finish()
    }
}

impl Kb {
    /// A knowledge base that keeps its journal in memory only.
    pub fn in_memory(server_id: impl Into<String>) -> Self {
        Kb {
            server_id: server_id.into(),
            store: Store::seeded(),
            records: Vec::new(),
            held: BTreeMap::new(),
            vector: VersionVector::new(),
            clock: 0,
            pending: Vec::new(),
            quarantine: Vec::new(),
            journal: None,
        }
    }

    /// Opens (or creates) a journal file and replays it. An interrupted final
    /// append is truncated away.
    pub fn open(path: &Path, server_id: impl Into<String>) -> Result<Self, PersistError> {
        let contents = recover_journal(path)?;
        let mut kb = Kb::in_memory(server_id);
        for record in contents.records {
            kb.hold(record);
        }
        kb.store = Store::rebuild(&kb.records);
        kb.journal = Some((path.to_path_buf(), JournalWriter::append_to(path)?));
        Ok(kb)
    }

    pub fn server_id(&self) -> &str {
        &self.server_id
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn records(&self) -> &[OperationRecord] {
        &self.records
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal.as_ref().map(|(p, _)| p.as_path())
    }

    /// Journal position: number of records held.
    pub fn position(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn version_vector(&self) -> &VersionVector {
        &self.vector
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn quarantine(&self) -> &[Quarantined] {
        &self.quarantine
    }

    pub fn pending(&self) -> &[OperationRecord] {
        &self.pending
    }

    pub fn holds(&self, op: &OpId) -> bool {
        self.held.contains_key(op)
    }

    fn hold(&mut self, record: OperationRecord) {
        let entry = self.vector.entry(record.op_id.server_id.clone()).or_insert(0);
        *entry = (*entry).max(record.op_id.seq);
        self.clock = self.clock.max(record.logical_time);
        self.held.insert(record.op_id.clone(), self.records.len());
        self.records.push(record);
    }

    fn write(&mut self, record: &OperationRecord) -> Result<(), KbError> {
        if let Some((_, writer)) = &mut self.journal {
            writer
                .append(record)
                .map_err(|e| KbError::Journal(e.to_string()))?;
        }
        Ok(())
    }

    /// Validates, journals and applies a local mutation.
    pub fn commit(&mut self, payload: Payload) -> Result<OperationRecord, KbError> {
        self.store.check(&payload)?;
        let seq = self.vector.get(&self.server_id).copied().unwrap_or(0) + 1;
        let record = OperationRecord {
            op_id: OpId {
                server_id: self.server_id.clone(),
                seq,
            },
            logical_time: self.clock + 1,
            payload,
        };
        self.write(&record)?;
        self.store.apply_operation(&record)?;
        self.hold(record.clone());
        Ok(record)
    }

    /// Convenience for callers that only need the target of a fresh object.
    pub fn commit_object(&mut self, payload: Payload) -> Result<ObjectId, KbError> {
        let id = created_object(&payload);
        self.commit(payload)?;
        Ok(id)
    }

    /// Takes records from a peer. Duplicates are ignored, malformed records
    /// are quarantined, and records whose predecessors are missing wait.
    pub fn ingest(&mut self, delta: Vec<OperationRecord>) -> Result<IngestReport, KbError> {
        let mut report = IngestReport::default();
        let mut queue = std::mem::take(&mut self.pending);
        for record in delta {
            if self.holds(&record.op_id) || queue.iter().any(|r| r.op_id == record.op_id) {
                report.duplicates += 1;
            } else {
                queue.push(record);
            }
        }
        let mut newest = self.records.iter().map(|r| r.order_key()).max();
        let mut needs_rebuild = false;
        loop {
            queue.sort_by(|a, b| a.op_id.cmp(&b.op_id));
            let mut progressed = false;
            let mut rest = Vec::new();
            for record in queue {
                if let Err(reason) = record.check_well_formed() {
                    self.quarantine.push(Quarantined { record, reason });
                    report.quarantined += 1;
                    continue;
                }
                let have = self.vector.get(&record.op_id.server_id).copied().unwrap_or(0);
                if record.op_id.seq != have + 1 {
                    rest.push(record);
                    continue;
                }
                self.write(&record)?;
                let key = record.order_key();
                if newest.as_ref().is_some_and(|k| key < *k) {
                    needs_rebuild = true;
                } else {
                    if !needs_rebuild {
                        let _ = self.store.replay(&record);
                    }
                    newest = Some(key);
                }
                self.hold(record);
                report.accepted += 1;
                progressed = true;
            }
            queue = rest;
            if !progressed {
                break;
            }
        }
        if needs_rebuild {
            self.store = Store::rebuild(&self.records);
        }
        report.pending = queue.len();
        self.pending = queue;
        Ok(report)
    }
}

/// The id of the object a payload creates, if it creates one.
pub fn created_object(payload: &Payload) -> ObjectId {
    use crate::ids::RelationId;
    match payload {
        Payload::AddUser { name, .. } => name.clone().into(),
        Payload::AddCategory { id, .. } => id.clone().into(),
        Payload::AddStatement { body, .. } => body.content_id().into(),
        Payload::AddRelation {
            relation, from, to, ..
        } => RelationId::for_triple(relation, from, to).into(),
        Payload::AddBelief { object, .. }
        | Payload::CastVote { object, .. }
        | Payload::Archive { object, .. } => object.clone(),
    }
}
