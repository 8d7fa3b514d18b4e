//! Operation records and the newline-delimited JSON journal.
//!
//! One record per line, UTF-8. A record counts as committed only once its
//! terminating newline is on disk, so a crash in the middle of an append
//! leaves a partial last line that recovery discards.
//!
//! ```text
//! {"op_id":{"server_id":"a","seq":1},"logical_time":1,"payload":{"type":"add_user","name":"pm","attributes":{}}}
//! ```

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::PersistError;
use crate::ids::{CategoryId, ObjectId, UserId};
use crate::model::{CategoryKind, Dimension, Reading, Source, StatementBody};

/// Globally unique identifier of an operation: origin server plus sequence.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpId {
    pub server_id: String,
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationRecord {
    pub op_id: OpId,
    /// Lamport clock value at the origin server.
    pub logical_time: u64,
    pub payload: Payload,
}

/// Deterministic replay order: `(logical_time, server_id, seq)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OrderKey {
    pub logical_time: u64,
    pub op_id: OpId,
}

impl Ord for OrderKey {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.logical_time, &self.op_id.server_id, self.op_id.seq).cmp(&(
            other.logical_time,
            &other.op_id.server_id,
            other.op_id.seq,
        ))
    }
}

impl PartialOrd for OrderKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl OperationRecord {
    pub fn order_key(&self) -> OrderKey {
        OrderKey {
            logical_time: self.logical_time,
            op_id: self.op_id.clone(),
        }
    }

    /// Structural sanity checks applied to records arriving from peers.
    pub fn check_well_formed(&self) -> Result<(), String> {
        if self.op_id.server_id.is_empty() {
            return Err("empty server id".into());
        }
        if self.op_id.seq == 0 {
            return Err("sequence numbers start at 1".into());
        }
        if self.logical_time == 0 {
            return Err("logical time starts at 1".into());
        }
        Ok(())
    }
}

/// A hierarchy link given to a new category: `parent --relation--> new`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub relation: CategoryId,
    pub parent: ObjectId,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `existing --relation--> new`
    #[default]
    FromExisting,
    /// `new --relation--> existing`
    ToExisting,
}

/// A relation linking a proposed statement to an existing object.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connection {
    pub relation: CategoryId,
    pub existing: ObjectId,
    #[serde(default)]
    pub direction: Direction,
}

impl Connection {
    pub fn new(relation: CategoryId, existing: impl Into<ObjectId>) -> Self {
        Connection {
            relation,
            existing: existing.into(),
            direction: Direction::FromExisting,
        }
    }

    pub fn reversed(mut self) -> Self {
        self.direction = Direction::ToExisting;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    AddUser {
        name: UserId,
        #[serde(default)]
        attributes: BTreeMap<String, String>,
    },
    AddCategory {
        id: CategoryId,
        creator: UserId,
        kind: CategoryKind,
        #[serde(default)]
        labels: Vec<String>,
        attachments: Vec<Attachment>,
    },
    AddStatement {
        body: StatementBody,
        creator: UserId,
        source: Source,
        #[serde(default)]
        connections: Vec<Connection>,
    },
    AddRelation {
        relation: CategoryId,
        from: ObjectId,
        to: ObjectId,
        creator: UserId,
        #[serde(default)]
        reading: Reading,
    },
    AddBelief {
        user: UserId,
        object: ObjectId,
    },
    CastVote {
        voter: UserId,
        object: ObjectId,
        dimension: Dimension,
        value: f64,
    },
    /// Hides spam from default query results; nothing is ever deleted.
    Archive {
        object: ObjectId,
        by: UserId,
    },
}

/// Appends records to a journal file, one flushed line per record.
pub struct JournalWriter {
    out: BufWriter<File>,
}

impl JournalWriter {
    pub fn append_to(path: &Path) -> Result<Self, PersistError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(JournalWriter {
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, record: &OperationRecord) -> Result<(), PersistError> {
        let mut line = serde_json::to_vec(record).expect("records serialize");
        line.push(b'\n');
        self.out.write_all(&line)?;
        self.out.flush()?;
        self.out.get_ref().sync_data()?;
        Ok(())
    }
}

/// Result of decoding a journal.
#[derive(Debug, Default)]
pub struct JournalContents {
    pub records: Vec<OperationRecord>,
    /// Byte length of the committed prefix (up to the last newline).
    pub committed_len: usize,
    /// Bytes after the last newline, discarded as an interrupted append.
    pub discarded_tail: usize,
}

/// Decodes journal bytes. A partial final line is discarded; a complete line
/// that does not decode is corruption.
pub fn decode_journal(bytes: &[u8]) -> Result<JournalContents, PersistError> {
    let committed_len = bytes
        .iter()
        .rposition(|b| *b == b'\n')
        .map_or(0, |i| i + 1);
    let mut records = Vec::new();
    for (i, line) in bytes[..committed_len].split(|b| *b == b'\n').enumerate() {
        if line.iter().all(|b| b.is_ascii_whitespace()) {
            continue;
        }
        let record = serde_json::from_slice(line).map_err(|e| PersistError::CorruptJournal {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(JournalContents {
        records,
        committed_len,
        discarded_tail: bytes.len() - committed_len,
    })
}

/// Reads a journal file, truncating an interrupted final append in place.
/// A missing file reads as an empty journal.
pub fn recover_journal(path: &Path) -> Result<JournalContents, PersistError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(JournalContents::default()),
        Err(e) => return Err(e.into()),
    };
    let contents = decode_journal(&bytes)?;
    if contents.discarded_tail > 0 {
        let file = OpenOptions::new().write(true).open(path)?;
        file.set_len(contents.committed_len as u64)?;
        file.sync_all()?;
    }
    Ok(contents)
}

pub fn encode_journal(records: &[OperationRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        out.extend(serde_json::to_vec(r).expect("records serialize"));
        out.push(b'\n');
    }
    out
}
