use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use coopkb_core::journal::{decode_journal, Payload};
use coopkb_core::query::{self, QueryError};
use coopkb_core::replication::{self, SimConfig};
use coopkb_core::{fl, Kb, KbError, Store, UserId};
use coopkb_server::ApiConfig;
use serde::Serialize;

const OK: u8 = 0;
const DIAGNOSTICS: u8 = 1;
const USAGE: u8 = 2;
const INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "coopkb", version, about = "Cooperatively built knowledge base tools")]
struct Cli {
    /// Journal file to read and append to.
    #[arg(long, global = true, default_value = "coopkb.ndjson")]
    journal: PathBuf,
    /// Origin id for new records; defaults to the `server_id` file next to
    /// the journal, else `cli`.
    #[arg(long, global = true)]
    server_id: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Load FL or HTML files; each description is admitted or rejected on its own.
    Load {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Creator of the loaded objects; registered if unknown.
        #[arg(long = "as")]
        user: String,
    },
    /// Report lexical, syntactic, ontological and indentation problems.
    Lint {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long = "as")]
        user: Option<String>,
    },
    /// Run `spec <id> [depth] [+rel]`, `gen <id> [depth]`, `search <text>` or `subset [min=..] [limit=..]`.
    Query { text: Vec<String> },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: SocketAddr,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Peer base URL, repeatable.
        #[arg(long = "peer")]
        peers: Vec<String>,
        #[arg(long)]
        seed_ontology: Option<PathBuf>,
        #[arg(long, default_value_t = 5000)]
        sync_interval_ms: u64,
        /// JSON file with the same fields; flags given explicitly are ignored then.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the multi-server replication simulator.
    Simulate {
        /// JSON harness config; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        peers: Option<usize>,
        #[arg(long)]
        ops: Option<usize>,
        #[arg(long)]
        duplicate_rate: Option<f64>,
        #[arg(long)]
        drop_rate: Option<f64>,
    },
    /// Write the journal's state as one JSON document.
    Snapshot {
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

/// A failure with its exit code.
struct Failure(u8, String);

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(INTERNAL, e.to_string())
    }
}

type Run = Result<u8, Failure>;

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure(INTERNAL, e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure(USAGE, e.to_string())
}

fn server_id(cli: &Cli) -> String {
    if let Some(id) = &cli.server_id {
        return id.clone();
    }
    let beside = cli
        .journal
        .parent()
        .unwrap_or(Path::new("."))
        .join(coopkb_server::SERVER_ID_FILE);
    std::fs::read_to_string(beside)
        .map(|s| s.trim().to_string())
        .ok()
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "cli".into())
}

/// The journal's state without touching the file.
fn read_store(path: &Path) -> Result<Store, Failure> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(Store::rebuild(&decode_journal(&bytes).map_err(internal)?.records)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Store::seeded()),
        Err(e) => Err(e.into()),
    }
}

fn user_id(name: &str) -> Result<UserId, Failure> {
    UserId::new(name).map_err(usage)
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(value).expect("serializable")),
        Format::Text => write!(out, "{}", text()),
    }
}

#[derive(Serialize)]
struct FileLoad {
    file: String,
    report: fl::LoadReport,
}

fn load(cli: &Cli, files: &[PathBuf], user: &str) -> Run {
    let user = user_id(user)?;
    let docs = files
        .iter()
        .map(|f| {
            let text = std::fs::read_to_string(f).map_err(|e| internal(format!("{}: {e}", f.display())))?;
            let doc = fl::document(&text).map_err(|e| Failure(DIAGNOSTICS, format!("{}: {e}", f.display())))?;
            Ok((f.display().to_string(), doc))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let mut kb = Kb::open(&cli.journal, server_id(cli)).map_err(internal)?;
    if kb.store().user(&user).is_none() {
        kb.commit(Payload::AddUser {
            name: user.clone(),
            attributes: Default::default(),
        })
        .map_err(internal)?;
    }
    let mut results = Vec::new();
    for (file, doc) in docs {
        let report = fl::load_document(&mut kb, &doc, &user).map_err(internal)?;
        results.push(FileLoad { file, report });
    }
    let clean = results.iter().all(|r| r.report.is_clean());
    emit(cli.format, &results, || {
        let mut s = String::new();
        for FileLoad { file, report } in &results {
            for e in &report.parse_errors {
                let sp = e.span();
                s.push_str(&format!("{file}:{}:{}: error: {e}\n", sp.line, sp.column));
            }
            for f in &report.failures {
                s.push_str(&format!("{file}:{}:{}: error: {} (in `{}`)\n", f.line, f.column, f.error, f.head));
            }
            s.push_str(&format!(
                "{file}: {} of {} descriptions loaded, {} objects admitted\n",
                report.loaded,
                report.descriptions,
                report.objects.len()
            ));
        }
        s
    })?;
    Ok(if clean { OK } else { DIAGNOSTICS })
}

#[derive(Serialize)]
struct FileLint {
    file: String,
    diagnostics: Vec<fl::LintDiagnostic>,
}

fn lint(cli: &Cli, files: &[PathBuf], user: Option<&str>) -> Run {
    let user = user.map(user_id).transpose()?;
    let store = read_store(&cli.journal)?;
    let mut results = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| internal(format!("{}: {e}", f.display())))?;
        results.push(FileLint {
            file: f.display().to_string(),
            diagnostics: fl::lint_text(&text, &store, user.as_ref()),
        });
    }
    let found = results.iter().any(|r| !r.diagnostics.is_empty());
    emit(cli.format, &results, || {
        results.iter().map(|r| fl::render(&r.file, &r.diagnostics)).collect()
    })?;
    Ok(if found { DIAGNOSTICS } else { OK })
}

fn run_query(cli: &Cli, words: &[String]) -> Run {
    let store = read_store(&cli.journal)?;
    let text = words.join(" ");
    match query::query(&store, &text) {
        Ok(result) => {
            emit(cli.format, &result, || result.to_text())?;
            Ok(if matches!(result, query::QueryResult::Ambiguous { .. }) {
                DIAGNOSTICS
            } else {
                OK
            })
        }
        Err(QueryError::Usage(m)) => Err(usage(m)),
        Err(QueryError::Kb(KbError::Journal(m))) => Err(internal(m)),
        Err(QueryError::Kb(e)) => Err(Failure(DIAGNOSTICS, e.to_string())),
    }
}

fn simulate(cli: &Cli, cmd: &Command) -> Run {
    let Command::Simulate {
        config,
        seed,
        peers,
        ops,
        duplicate_rate,
        drop_rate,
    } = cmd
    else {
        unreachable!()
    };
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            SimConfig::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.peers = peers.unwrap_or(cfg.peers);
    cfg.ops = ops.unwrap_or(cfg.ops);
    cfg.duplicate_rate = duplicate_rate.unwrap_or(cfg.duplicate_rate);
    cfg.drop_rate = drop_rate.unwrap_or(cfg.drop_rate);
    if cfg.peers == 0 {
        return Err(usage("--peers must be at least 1"));
    }
    let report = replication::simulate(&cfg);
    emit(cli.format, &report, || {
        format!(
            "peers {}, ops {} committed / {} rejected, messages {} sent / {} dropped / {} duplicated, \
             quiescence after {} rounds, {} records: {}\n",
            report.peers,
            report.ops_committed,
            report.ops_rejected,
            report.messages_sent,
            report.messages_dropped,
            report.messages_duplicated,
            report.quiescence_rounds,
            report.records,
            if report.converged { "converged" } else { "DIVERGED" }
        )
    })?;
    Ok(if report.converged { OK } else { DIAGNOSTICS })
}

fn serve(cmd: &Command) -> Run {
    let Command::Serve {
        listen,
        data_dir,
        peers,
        seed_ontology,
        sync_interval_ms,
        config,
    } = cmd
    else {
        unreachable!()
    };
    let config = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => ApiConfig {
            peers: peers.clone(),
            seed_ontology: seed_ontology.clone(),
            sync_interval_ms: *sync_interval_ms,
            ..ApiConfig::new(*listen, data_dir)
        },
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(coopkb_server::serve(config)).map_err(internal)?;
    Ok(OK)
}

fn snapshot(cli: &Cli, output: Option<&Path>) -> Run {
    let store = read_store(&cli.journal)?;
    let doc = store.snapshot();
    match output {
        Some(path) => std::fs::write(path, doc + "\n")?,
        None => println!("{doc}"),
    }
    Ok(OK)
}

fn dispatch(cli: &Cli) -> Run {
    match &cli.command {
        Command::Load { files, user } => load(cli, files, user),
        Command::Lint { files, user } => lint(cli, files, user.as_deref()),
        Command::Query { text } if text.is_empty() => Err(usage("query text is missing")),
        Command::Query { text } => run_query(cli, text),
        cmd @ Command::Serve { .. } => serve(cmd),
        cmd @ Command::Simulate { .. } => simulate(cli, cmd),
        Command::Snapshot { output } => snapshot(cli, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, message)) => {
            eprintln!("coopkb: {message}");
            ExitCode::from(code)
        }
    }
}
