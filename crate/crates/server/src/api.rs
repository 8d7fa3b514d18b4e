use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{RwLockReadGuard, RwLockWriteGuard};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use coopkb_core::fl;
use coopkb_core::kb::VersionVector;
use coopkb_core::model::Dimension;
use coopkb_core::protocol::{self, Outcome, Proposal};
use coopkb_core::query::{self, Resolved};
use coopkb_core::replication::{self, Delta, Digest};
use coopkb_core::valuation::{self, Feature, FilterCriteria, Scorer};
use coopkb_core::{seed, CategoryId, Kb, ObjectId, UserId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, Envelope};
use crate::SharedState;

type ApiResult = Result<Response, ApiError>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/status", get(status))
        .route("/users", post(add_user))
        .route("/load", post(load))
        .route("/objects/{id}", get(object))
        .route("/query", get(run_query))
        .route("/statements", post(propose))
        .route("/relations", post(add_relation))
        .route("/beliefs", post(add_belief))
        .route("/votes", post(vote))
        .route("/filter", get(filter))
        .route("/lint", get(lint_get).post(lint_post))
        .route("/sync/digest", post(sync_digest))
        .route("/sync/delta", post(sync_delta))
        .with_state(state)
}

fn read(state: &SharedState) -> RwLockReadGuard<'_, Kb> {
    state.kb.read().unwrap_or_else(|p| p.into_inner())
}

fn write(state: &SharedState) -> RwLockWriteGuard<'_, Kb> {
    state.kb.write().unwrap_or_else(|p| p.into_inner())
}

fn reply<T: Serialize>(status: StatusCode, position: u64, data: T) -> ApiResult {
    Ok((
        status,
        Json(Envelope {
            position,
            data: Some(data),
            error: None,
        }),
    )
        .into_response())
}

fn body<T: DeserializeOwned>(b: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    b.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn relation_id(name: &str) -> Result<CategoryId, ApiError> {
    let parsed = if name.contains('#') {
        CategoryId::parse(name)
    } else {
        CategoryId::new(seed::relation_user(), name)
    };
    parsed.map_err(|e| ApiError::kb(&e.into()))
}

#[derive(Serialize)]
struct Status {
    server_id: String,
    records: usize,
    pending: usize,
    quarantined: usize,
    vector: VersionVector,
}

async fn status(State(s): State<SharedState>) -> ApiResult {
    let kb = read(&s);
    reply(
        StatusCode::OK,
        kb.position(),
        Status {
            server_id: kb.server_id().to_string(),
            records: kb.records().len(),
            pending: kb.pending().len(),
            quarantined: kb.quarantine().len(),
            vector: kb.version_vector().clone(),
        },
    )
}

#[derive(Deserialize)]
struct NewUser {
    name: UserId,
    #[serde(default)]
    attributes: BTreeMap<String, String>,
}

async fn add_user(State(s): State<SharedState>, b: Result<Json<NewUser>, JsonRejection>) -> ApiResult {
    let u = body(b)?;
    let mut kb = write(&s);
    let pos = kb.position();
    kb.commit(coopkb_core::journal::Payload::AddUser {
        name: u.name.clone(),
        attributes: u.attributes,
    })
    .map_err(|e| ApiError::kb(&e).at(pos))?;
    let user = kb.store().user(&u.name).expect("just added").clone();
    reply(StatusCode::CREATED, kb.position(), user)
}

#[derive(Deserialize)]
struct LoadRequest {
    text: String,
    user: UserId,
}

async fn load(State(s): State<SharedState>, b: Result<Json<LoadRequest>, JsonRejection>) -> ApiResult {
    let r = body(b)?;
    let mut kb = write(&s);
    let pos = kb.position();
    if kb.store().user(&r.user).is_none() {
        return Err(ApiError::kb(&coopkb_core::KbError::UnknownUser(r.user)).at(pos));
    }
    let doc = fl::document(&r.text).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "syntax", e.to_string()).at(pos))?;
    let report = fl::load_document(&mut kb, &doc, &r.user).map_err(|e| ApiError::kb(&e).at(pos))?;
    reply(StatusCode::OK, kb.position(), report)
}

async fn object(State(s): State<SharedState>, Path(id): Path<String>) -> ApiResult {
    let kb = read(&s);
    let pos = kb.position();
    let store = kb.store();
    match query::resolve(store, &id).map_err(|e| ApiError::kb(&e).at(pos))? {
        Resolved::One(o) => {
            let detail = query::describe(store, &o).map_err(|e| ApiError::kb(&e).at(pos))?;
            reply(StatusCode::OK, pos, detail)
        }
        Resolved::Ambiguous(candidates) => Err(ApiError {
            data: Some(serde_json::json!({ "candidates": candidates })),
            ..ApiError::new(StatusCode::CONFLICT, "ambiguous", format!("`{id}` names several categories")).at(pos)
        }),
    }
}

#[derive(Deserialize)]
struct QueryParams {
    q: String,
}

async fn run_query(State(s): State<SharedState>, q: Result<Query<QueryParams>, QueryRejection>) -> ApiResult {
    let Query(q) = q.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let kb = read(&s);
    let result = query::query(kb.store(), &q.q).map_err(|e| ApiError::query(&e).at(kb.position()))?;
    reply(StatusCode::OK, kb.position(), result)
}

async fn propose(State(s): State<SharedState>, b: Result<Json<Proposal>, JsonRejection>) -> ApiResult {
    let p = body(b)?;
    let mut kb = write(&s);
    let pos = kb.position();
    let r = protocol::propose_statement(&mut kb, p).map_err(|e| ApiError::kb(&e).at(pos))?;
    if r.outcome == Outcome::Accepted {
        reply(StatusCode::CREATED, kb.position(), r)
    } else {
        Err(ApiError::rejected(&r).at(pos))
    }
}

#[derive(Deserialize)]
struct RelationRequest {
    user: UserId,
    relation: String,
    from: ObjectId,
    to: ObjectId,
}

async fn add_relation(State(s): State<SharedState>, b: Result<Json<RelationRequest>, JsonRejection>) -> ApiResult {
    let r = body(b)?;
    let relation = relation_id(&r.relation)?;
    let mut kb = write(&s);
    let pos = kb.position();
    let rel = protocol::add_relation(&mut kb, r.user, relation, r.from, r.to).map_err(|e| ApiError::kb(&e).at(pos))?;
    reply(StatusCode::CREATED, kb.position(), rel)
}

#[derive(Deserialize)]
struct BeliefRequest {
    user: UserId,
    object: ObjectId,
}

#[derive(Serialize)]
struct Believers {
    object: ObjectId,
    believers: BTreeSet<UserId>,
}

async fn add_belief(State(s): State<SharedState>, b: Result<Json<BeliefRequest>, JsonRejection>) -> ApiResult {
    let r = body(b)?;
    let mut kb = write(&s);
    let pos = kb.position();
    let believers = protocol::add_belief(&mut kb, r.user, r.object.clone()).map_err(|e| ApiError::kb(&e).at(pos))?;
    reply(
        StatusCode::OK,
        kb.position(),
        Believers {
            object: r.object,
            believers,
        },
    )
}

#[derive(Deserialize)]
struct VoteRequest {
    voter: UserId,
    object: ObjectId,
    #[serde(default = "usefulness")]
    dimension: Dimension,
    value: f64,
}

fn usefulness() -> Dimension {
    Dimension::Usefulness
}

#[derive(Serialize)]
struct VoteReply {
    vote: coopkb_core::model::Vote,
    score: coopkb_core::Score,
}

async fn vote(State(s): State<SharedState>, b: Result<Json<VoteRequest>, JsonRejection>) -> ApiResult {
    let r = body(b)?;
    let mut kb = write(&s);
    let pos = kb.position();
    let vote = valuation::cast_vote(&mut kb, r.voter, r.object.clone(), r.dimension, r.value)
        .map_err(|e| ApiError::kb(&e).at(pos))?;
    let score = Scorer::new(kb.store())
        .score(&r.object, r.dimension)
        .map_err(|e| ApiError::kb(&e).at(pos))?;
    reply(StatusCode::CREATED, kb.position(), VoteReply { vote, score })
}

fn flag(key: &str, v: &str) -> Result<bool, ApiError> {
    match v {
        "" | "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ApiError::bad_request(format!("{key}: expected true or false, got `{v}`"))),
    }
}

fn number(key: &str, v: &str) -> Result<f64, ApiError> {
    v.parse()
        .map_err(|_| ApiError::bad_request(format!("{key}: `{v}` is not a number")))
}

/// `min_usefulness`, `min_originality`, `arguments_without_objections`,
/// `creator.<attribute>`, `features` (comma list), `most_specialized_only`,
/// `statements_only`.
fn criteria(params: &HashMap<String, String>) -> Result<FilterCriteria, ApiError> {
    let mut c = FilterCriteria::default();
    for (k, v) in params {
        match k.as_str() {
            "min_usefulness" => {
                c.min_score.insert(Dimension::Usefulness, number(k, v)?);
            }
            "min_originality" => {
                c.min_score.insert(Dimension::Originality, number(k, v)?);
            }
            "arguments_without_objections" => c.arguments_without_objections = flag(k, v)?,
            "most_specialized_only" => c.most_specialized_only = flag(k, v)?,
            "statements_only" => c.statements_only = flag(k, v)?,
            "features" => {
                let mut set = BTreeSet::new();
                for f in v.split(',').map(str::trim).filter(|f| !f.is_empty()) {
                    let feature: Feature = serde_json::from_value(serde_json::Value::String(f.into()))
                        .map_err(|_| ApiError::bad_request(format!("unknown feature `{f}`")))?;
                    set.insert(feature);
                }
                c.allowed_features = Some(set);
            }
            other => match other.strip_prefix("creator.") {
                Some(attr) if !attr.is_empty() => {
                    c.creator_attributes.insert(attr.to_string(), v.clone());
                }
                _ => return Err(ApiError::bad_request(format!("unknown filter parameter `{other}`"))),
            },
        }
    }
    Ok(c)
}

#[derive(Serialize)]
struct Objects {
    objects: Vec<query::ObjectSummary>,
}

async fn filter(State(s): State<SharedState>, Query(params): Query<HashMap<String, String>>) -> ApiResult {
    let kb = read(&s);
    let c = criteria(&params).map_err(|e| e.at(kb.position()))?;
    let store = kb.store();
    let objects = valuation::filter_objects(store, &c)
        .iter()
        .filter_map(|o| query::summary(store, o))
        .collect();
    reply(StatusCode::OK, kb.position(), Objects { objects })
}

#[derive(Deserialize)]
struct LintRequest {
    text: String,
    #[serde(default)]
    user: Option<UserId>,
    #[serde(default)]
    file: Option<String>,
}

#[derive(Serialize)]
struct LintReply {
    diagnostics: Vec<fl::LintDiagnostic>,
    text: String,
}

fn lint(s: &SharedState, r: LintRequest) -> ApiResult {
    let kb = read(s);
    let diagnostics = fl::lint_text(&r.text, kb.store(), r.user.as_ref());
    let text = fl::render(r.file.as_deref().unwrap_or("input"), &diagnostics);
    reply(StatusCode::OK, kb.position(), LintReply { diagnostics, text })
}

async fn lint_get(State(s): State<SharedState>, q: Result<Query<LintRequest>, QueryRejection>) -> ApiResult {
    let Query(r) = q.map_err(|e| ApiError::bad_request(e.body_text()))?;
    lint(&s, r)
}

async fn lint_post(State(s): State<SharedState>, b: Result<Json<LintRequest>, JsonRejection>) -> ApiResult {
    lint(&s, body(b)?)
}

/// Reply to a digest: what the caller lacks, plus our own digest so the
/// caller can push back what we lack.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyncReply {
    pub digest: Digest,
    pub delta: Delta,
}

async fn sync_digest(State(s): State<SharedState>, b: Result<Json<Digest>, JsonRejection>) -> ApiResult {
    let remote = body(b)?;
    let kb = read(&s);
    let delta = replication::diff(&kb, &remote);
    let digest = replication::make_digest(&kb);
    reply(StatusCode::OK, kb.position(), SyncReply { digest, delta })
}

async fn sync_delta(State(s): State<SharedState>, b: Result<Json<Delta>, JsonRejection>) -> ApiResult {
    let delta = body(b)?;
    let mut kb = write(&s);
    let pos = kb.position();
    let report = replication::ingest(&mut kb, delta).map_err(|e| ApiError::kb(&e).at(pos))?;
    reply(StatusCode::OK, kb.position(), report)
}
