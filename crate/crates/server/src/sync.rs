//! Client side of peer synchronization.

use std::time::Duration;

use coopkb_core::kb::IngestReport;
use coopkb_core::replication;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::api::SyncReply;
use crate::error::Envelope;
use crate::SharedState;

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("peer {peer}: {source}")]
    Http {
        peer: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("peer {peer} answered {status}: {message}")]
    Refused { peer: String, status: u16, message: String },
    #[error(transparent)]
    Kb(#[from] coopkb_core::KbError),
}

/// What one exchange moved in each direction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyncOutcome {
    pub pulled: IngestReport,
    pub pushed: IngestReport,
}

async fn post<B: Serialize, T: DeserializeOwned>(
    client: &reqwest::Client,
    peer: &str,
    path: &str,
    body: &B,
) -> Result<T, SyncError> {
    let http = |source| SyncError::Http {
        peer: peer.to_string(),
        source,
    };
    let url = format!("{}{path}", peer.trim_end_matches('/'));
    let resp = client.post(url).json(body).send().await.map_err(http)?;
    let status = resp.status();
    let env: Envelope<T> = resp.json().await.map_err(http)?;
    match (env.data, env.error) {
        (Some(data), None) if status.is_success() => Ok(data),
        (_, err) => Err(SyncError::Refused {
            peer: peer.to_string(),
            status: status.as_u16(),
            message: err.map(|e| e.message).unwrap_or_default(),
        }),
    }
}

/// One anti-entropy round with `peer`: pull what we lack, push what it lacks.
pub async fn sync_with(state: &SharedState, client: &reqwest::Client, peer: &str) -> Result<SyncOutcome, SyncError> {
    let digest = replication::make_digest(&state.kb.read().unwrap_or_else(|p| p.into_inner()));
    let reply: SyncReply = post(client, peer, "/sync/digest", &digest).await?;
    let (pulled, ours) = {
        let mut kb = state.kb.write().unwrap_or_else(|p| p.into_inner());
        let pulled = replication::ingest(&mut kb, reply.delta)?;
        (pulled, replication::diff(&kb, &reply.digest))
    };
    let pushed = if ours.records.is_empty() {
        IngestReport::default()
    } else {
        post(client, peer, "/sync/delta", &ours).await?
    };
    Ok(SyncOutcome { pulled, pushed })
}

pub(crate) async fn gossip_loop(state: SharedState, peers: Vec<String>, every: Duration) {
    let client = reqwest::Client::new();
    let mut tick = tokio::time::interval(every);
    loop {
        tick.tick().await;
        for peer in &peers {
            if let Err(e) = sync_with(&state, &client, peer).await {
                eprintln!("sync: {e}");
            }
        }
    }
}
