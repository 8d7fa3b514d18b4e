use thiserror::Error;

use crate::ids::{CategoryId, ObjectId, UserId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("identifier is empty")]
    Empty,
    #[error("identifier `{text}` contains forbidden character {c:?}")]
    BadChar { text: String, c: char },
    #[error("`{0}` has no `prefix#` part")]
    MissingPrefix(String),
    #[error("`{0}` is not a valid content hash")]
    BadHash(String),
    #[error("`{0}` is not a valid quoted term")]
    BadLiteral(String),
}

/// Errors raised by knowledge-base mutations and queries.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KbError {
    #[error("bad identifier: {0}")]
    BadIdentifier(#[from] IdError),
    #[error("user {0} is already registered")]
    DuplicateUser(UserId),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("unknown relation type `{0}`")]
    UnknownRelationType(String),
    #[error("{0} already exists")]
    DuplicateId(ObjectId),
    #[error("{0} must be attached to an existing object by a hierarchy relation")]
    NoAttachment(CategoryId),
    #[error("{relation} from {from} to {to} would create a cycle")]
    CycleDetected {
        relation: CategoryId,
        from: ObjectId,
        to: ObjectId,
    },
    #[error("{relation} cannot relate {from} to {to}: {reason}")]
    SignatureViolation {
        relation: CategoryId,
        from: ObjectId,
        to: ObjectId,
        reason: String,
    },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("connection target {0} does not exist")]
    DanglingConnection(ObjectId),
    #[error("vote value {0} is outside [-1, 1]")]
    OutOfRange(f64),
    #[error("journal write failed: {0}")]
    Journal(String),
}

/// Errors raised while reading or writing journals and snapshots.
#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt journal at line {line}: {message}")]
    CorruptJournal { line: usize, message: String },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}
