//! HTTP service over a coopkb knowledge base, with journal persistence and
//! periodic anti-entropy sync against peer servers.

mod api;
mod error;
pub mod sync;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use coopkb_core::{fl, Kb, PersistError, UserId};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::router;
pub use error::{ApiError, Envelope};

pub const JOURNAL_FILE: &str = "journal.ndjson";
pub const SERVER_ID_FILE: &str = "server_id";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    /// Taken from the data directory when absent; generated on first boot.
    #[serde(default)]
    pub server_id: Option<String>,
    /// FL or HTML document loaded once, into an empty journal.
    #[serde(default)]
    pub seed_ontology: Option<PathBuf>,
    /// Base URLs such as `http://10.0.0.2:7878`.
    #[serde(default)]
    pub peers: Vec<String>,
    #[serde(default = "default_interval")]
    pub sync_interval_ms: u64,
}

fn default_interval() -> u64 {
    5000
}

impl ApiConfig {
    pub fn new(listen: SocketAddr, data_dir: impl Into<PathBuf>) -> Self {
        ApiConfig {
            listen,
            data_dir: data_dir.into(),
            server_id: None,
            seed_ontology: None,
            peers: Vec::new(),
            sync_interval_ms: default_interval(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    PortBusy(SocketAddr),
    #[error("{0}")]
    CorruptJournal(String),
    #[error("data directory belongs to server `{found}`, not `{configured}`")]
    ServerIdMismatch { found: String, configured: String },
    #[error("seed ontology {path}: {message}")]
    Seed { path: PathBuf, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub struct AppState {
    pub kb: RwLock<Kb>,
}

pub type SharedState = Arc<AppState>;

fn fresh_server_id() -> String {
    let n: u32 = rand::rng().random();
    format!("srv{n:08x}")
}

/// Opens the journal in `dir`, pinning or checking the server id.
pub fn open_data_dir(dir: &Path, server_id: Option<&str>) -> Result<Kb, ServeError> {
    std::fs::create_dir_all(dir)?;
    let id_path = dir.join(SERVER_ID_FILE);
    let id = match std::fs::read_to_string(&id_path) {
        Ok(found) => {
            let found = found.trim().to_string();
            if let Some(configured) = server_id.filter(|c| *c != found) {
                return Err(ServeError::ServerIdMismatch {
                    found,
                    configured: configured.to_string(),
                });
            }
            found
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let id = server_id.map(str::to_string).unwrap_or_else(fresh_server_id);
            std::fs::write(&id_path, format!("{id}\n"))?;
            id
        }
        Err(e) => return Err(e.into()),
    };
    Kb::open(&dir.join(JOURNAL_FILE), id).map_err(|e| match e {
        PersistError::Io(io) => ServeError::Io(io),
        other => ServeError::CorruptJournal(other.to_string()),
    })
}

fn load_seed(kb: &mut Kb, path: &Path) -> Result<(), ServeError> {
    let fail = |message: String| ServeError::Seed {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let doc = fl::document(&text).map_err(|e| fail(e.to_string()))?;
    let report = fl::load_document(kb, &doc, &UserId::new(coopkb_core::seed::SEED_USER).expect("valid"))
        .map_err(|e| fail(e.to_string()))?;
    if let Some(f) = report.failures.first() {
        return Err(fail(format!("{}:{}: {}", f.line, f.column, f.error)));
    }
    if let Some(e) = report.parse_errors.first() {
        return Err(fail(e.to_string()));
    }
    Ok(())
}

/// A bound, not yet running service.
pub struct Service {
    state: SharedState,
    listener: TcpListener,
    peers: Vec<String>,
    interval: Duration,
}

impl Service {
    pub async fn start(config: ApiConfig) -> Result<Service, ServeError> {
        let mut kb = open_data_dir(&config.data_dir, config.server_id.as_deref())?;
        if let Some(seed) = &config.seed_ontology {
            if kb.records().is_empty() {
                load_seed(&mut kb, seed)?;
            }
        }
        let listener = TcpListener::bind(config.listen).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                ServeError::PortBusy(config.listen)
            } else {
                ServeError::Io(e)
            }
        })?;
        Ok(Service {
            state: Arc::new(AppState { kb: RwLock::new(kb) }),
            listener,
            peers: config.peers,
            interval: Duration::from_millis(config.sync_interval_ms.max(10)),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn state(&self) -> SharedState {
        self.state.clone()
    }

    pub async fn run(self) -> std::io::Result<()> {
        if !self.peers.is_empty() {
            tokio::spawn(sync::gossip_loop(self.state.clone(), self.peers, self.interval));
        }
        axum::serve(self.listener, router(self.state)).await
    }
}

pub async fn serve(config: ApiConfig) -> Result<(), ServeError> {
    let service = Service::start(config).await?;
    eprintln!("listening on {}", service.local_addr()?);
    service.run().await?;
    Ok(())
}
