//! Identifiers for everything the knowledge base records.
//!
//! Every object has a stable textual form which is also its JSON encoding:
//!
//! | object       | text form            |
//! |--------------|----------------------|
//! | user         | `user:pm`            |
//! | category     | `pm#Paris`           |
//! | statement    | `stmt:3f2a…` (hex)   |
//! | relation     | `rel:91bc…` (hex)    |
//! | literal term | `'ordered set'`      |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::IdError;

/// Length in hex digits of content-hash identifiers.
const HASH_HEX_LEN: usize = 16;

fn is_user_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Characters allowed in the name part of a category identifier.
pub fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

/// A registered contributor, e.g. `pm`, `wn` or `s162557`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(String);

impl UserId {
    pub fn new(name: impl Into<String>) -> Result<Self, IdError> {
        let name = name.into();
        if name.is_empty() {
            return Err(IdError::Empty);
        }
        if let Some(c) = name.chars().find(|c| !is_user_char(*c)) {
            return Err(IdError::BadChar { text: name, c });
        }
        Ok(UserId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for UserId {
    type Err = IdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UserId::new(s)
    }
}

/// A creator-prefixed category identifier, rendered `prefix#name`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryId {
    pub prefix: UserId,
    pub name: String,
}

impl CategoryId {
    pub fn new(prefix: UserId, name: impl Into<String>) -> Result<Self, IdError> {
        let name = name.into();
        validate_name(&name)?;
        Ok(CategoryId { prefix, name })
    }

    /// Parses `prefix#name`.
    pub fn parse(text: &str) -> Result<Self, IdError> {
        let (prefix, name) = text
            .split_once('#')
            .ok_or_else(|| IdError::MissingPrefix(text.to_string()))?;
        CategoryId::new(UserId::new(prefix)?, name)
    }
}

pub(crate) fn validate_name(name: &str) -> Result<(), IdError> {
    if name.is_empty() {
        return Err(IdError::Empty);
    }
    if let Some(c) = name.chars().find(|c| !is_name_char(*c)) {
        return Err(IdError::BadChar {
            text: name.to_string(),
            c,
        });
    }
    Ok(())
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.prefix, self.name)
    }
}

impl FromStr for CategoryId {
    type Err = IdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CategoryId::parse(s)
    }
}

fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(HASH_HEX_LEN);
    for b in digest.iter().take(HASH_HEX_LEN / 2) {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn validate_hex(text: &str) -> Result<(), IdError> {
    if text.len() == HASH_HEX_LEN && text.chars().all(|c| c.is_ascii_hexdigit()) {
        Ok(())
    } else {
        Err(IdError::BadHash(text.to_string()))
    }
}

/// Content-hash identifier of a statement.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StatementId(String);

impl StatementId {
    pub fn from_content(bytes: &[u8]) -> Self {
        StatementId(content_hash(bytes))
    }

    pub fn from_hex(hex: &str) -> Result<Self, IdError> {
        validate_hex(hex)?;
        Ok(StatementId(hex.to_ascii_lowercase()))
    }

    pub fn hex(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stmt:{}", self.0)
    }
}

/// Identifier of a relation instance, a hash of (type, from, to).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(String);

impl RelationId {
    pub fn for_triple(relation: &CategoryId, from: &ObjectId, to: &ObjectId) -> Self {
        let key = format!("{relation}\u{1f}{from}\u{1f}{to}");
        RelationId(content_hash(key.as_bytes()))
    }

    pub fn from_hex(hex: &str) -> Result<Self, IdError> {
        validate_hex(hex)?;
        Ok(RelationId(hex.to_ascii_lowercase()))
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rel:{}", self.0)
    }
}

/// Any object that can be the endpoint of a relation or the target of a vote.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectId {
    User(UserId),
    Category(CategoryId),
    Statement(StatementId),
    Relation(RelationId),
    /// An informal term such as a definition or a URL; always exists.
    Literal(String),
}

impl ObjectId {
    pub fn literal(text: impl Into<String>) -> Self {
        ObjectId::Literal(text.into())
    }

    pub fn as_category(&self) -> Option<&CategoryId> {
        match self {
            ObjectId::Category(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_statement(&self) -> Option<&StatementId> {
        match self {
            ObjectId::Statement(s) => Some(s),
            _ => None,
        }
    }
}

impl From<CategoryId> for ObjectId {
    fn from(c: CategoryId) -> Self {
        ObjectId::Category(c)
    }
}

impl From<StatementId> for ObjectId {
    fn from(s: StatementId) -> Self {
        ObjectId::Statement(s)
    }
}

impl From<RelationId> for ObjectId {
    fn from(r: RelationId) -> Self {
        ObjectId::Relation(r)
    }
}

impl From<UserId> for ObjectId {
    fn from(u: UserId) -> Self {
        ObjectId::User(u)
    }
}

/// Writes `text` as a single-quoted term, escaping `\`, `'` and newlines.
pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('\'');
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// Inverse of [`quote`]; `text` must include the surrounding quotes.
pub fn unquote(text: &str) -> Result<String, IdError> {
    let inner = text
        .strip_prefix('\'')
        .and_then(|t| t.strip_suffix('\''))
        .filter(|_| text.len() >= 2)
        .ok_or_else(|| IdError::BadLiteral(text.to_string()))?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('\\') => out.push('\\'),
                Some('\'') => out.push('\''),
                Some('n') => out.push('\n'),
                _ => return Err(IdError::BadLiteral(text.to_string())),
            },
            '\'' => return Err(IdError::BadLiteral(text.to_string())),
            c => out.push(c),
        }
    }
    Ok(out)
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectId::User(u) => write!(f, "user:{u}"),
            ObjectId::Category(c) => write!(f, "{c}"),
            ObjectId::Statement(s) => write!(f, "{s}"),
            ObjectId::Relation(r) => write!(f, "{r}"),
            ObjectId::Literal(t) => f.write_str(&quote(t)),
        }
    }
}

impl FromStr for ObjectId {
    type Err = IdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with('\'') {
            return unquote(s).map(ObjectId::Literal);
        }
        if let Some(rest) = s.strip_prefix("user:") {
            return UserId::new(rest).map(ObjectId::User);
        }
        if let Some(rest) = s.strip_prefix("stmt:") {
            return StatementId::from_hex(rest).map(ObjectId::Statement);
        }
        if let Some(rest) = s.strip_prefix("rel:") {
            return RelationId::from_hex(rest).map(ObjectId::Relation);
        }
        CategoryId::parse(s).map(ObjectId::Category)
    }
}

macro_rules! string_serde {
    ($($ty:ty),*) => {$(
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}

string_serde!(UserId, CategoryId, ObjectId);

impl Serialize for StatementId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StatementId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let hex = text
            .strip_prefix("stmt:")
            .ok_or_else(|| serde::de::Error::custom(format!("not a statement id: {text}")))?;
        StatementId::from_hex(hex).map_err(serde::de::Error::custom)
    }
}

impl Serialize for RelationId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RelationId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let hex = text
            .strip_prefix("rel:")
            .ok_or_else(|| serde::de::Error::custom(format!("not a relation id: {text}")))?;
        RelationId::from_hex(hex).map_err(serde::de::Error::custom)
    }
}
