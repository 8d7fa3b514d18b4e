//! Collaborative knowledge base: a creator-attributed semantic network grown
//! under a loss-less cooperation protocol.

pub mod error;
pub mod fl;
pub mod ids;
pub mod journal;
pub mod kb;
pub mod model;
pub mod ontology;
pub mod projection;
pub mod protocol;
pub mod query;
pub mod replication;
pub mod scalar;
pub mod seed;
pub mod store;
pub mod valuation;

pub use error::{IdError, KbError, PersistError};
pub use ids::{CategoryId, ObjectId, RelationId, StatementId, UserId};
pub use kb::Kb;
pub use store::Store;

/// Scores in double precision.
pub type Score = valuation::Score<f64>;
/// Scores computed with exact rational arithmetic.
pub type ExactScore = valuation::Score<num_rational::Ratio<i64>>;
