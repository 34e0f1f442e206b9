use std::io::IsTerminal;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use scout_client::ScoutClient;
use scout_core::api::{SearchRequest, SearchResponse};
use scout_core::catalog::{self, Catalog, WriterLock};
use scout_core::config::ScoutConfig;
use scout_core::corpus::load_corpus;
use scout_core::engine::{build_indexes, Engine};
use scout_core::enrich::{Enricher, Journal};
use scout_core::index::write_bundle;
use scout_core::llm::LlmGateway;
use scout_core::search::{FilterSet, TaskType};
use scout_server::{serve, AppState};

#[derive(Parser)]
#[command(name = "scout", version, about = "Semantic dataset discovery")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "SCOUT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a JSON-lines corpus into a new catalog snapshot.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Augment and embed every pending dataset in a catalog.
    Enrich {
        #[arg(long)]
        catalog: PathBuf,
        /// Continue from the journal left by an interrupted run.
        #[arg(long)]
        resume: bool,
    },
    /// Build the dataset and attribute indexes for a catalog.
    Index {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API (and optionally the UI bundle).
    Serve {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Directory with the built web UI.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Run one search and print the ranked results.
    Query(QueryArgs),
}

#[derive(Args)]
struct QueryArgs {
    text: String,
    #[arg(long, value_parser = parse_task_type)]
    task_type: Option<TaskType>,
    /// FilterSet as inline JSON, or @path to a JSON file.
    #[arg(long)]
    filters: Option<String>,
    /// Query a running service instead of loading the catalog locally.
    #[arg(long, conflicts_with_all = ["catalog", "index"])]
    server: Option<String>,
    #[arg(long, required_unless_present = "server")]
    catalog: Option<PathBuf>,
    #[arg(long, required_unless_present = "server")]
    index: Option<PathBuf>,
    /// Rows to print in the table.
    #[arg(long, default_value_t = 20)]
    limit: usize,
    /// Print ranked ids and suggestions as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn parse_task_type(s: &str) -> Result<TaskType, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Unix seconds, pinned by SOURCE_DATE_EPOCH when set.
fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn ingest(config: &ScoutConfig, corpus: &Path, out: &Path) -> Result<()> {
    let loaded = load_corpus(corpus).with_context(|| format!("loading {}", corpus.display()))?;
    for d in &loaded.diagnostics {
        tracing::warn!("{}: {d}", corpus.display());
    }
    let mut cat = Catalog::from_records(loaded.records, config.llm.embedding_dim);
    cat.provenance.corpus_path = Some(corpus.display().to_string());
    cat.provenance.created_at = Some(timestamp());
    catalog::save(&cat, out)?;
    eprintln!("ingested {} datasets ({} skipped lines) into {}", cat.len(), loaded.diagnostics.len(), out.display());
    Ok(())
}

async fn enrich(config: &ScoutConfig, path: &Path, resume: bool) -> Result<()> {
    let _lock = WriterLock::acquire(path)?;
    let mut cat = catalog::load(path).with_context(|| format!("loading {}", path.display()))?;
    let gateway = Arc::new(LlmGateway::from_config(config.llm.clone())?);
    let dim = gateway.embedding_dim();
    if cat.embedding_dim != dim {
        if cat.semantic().next().is_some() {
            bail!("catalog holds {}-dim embeddings but the provider produces {dim}", cat.embedding_dim);
        }
        cat.embedding_dim = dim;
    }

    let journal_path = Journal::path_for(path);
    if !resume && journal_path.exists() {
        std::fs::remove_file(&journal_path)?;
    }
    let (mut journal, done) = Journal::open(&journal_path)?;
    if resume {
        eprintln!("resuming with {} journaled datasets", done.len());
    }
    for d in done {
        if cat.get(d.id()).is_some() {
            cat.upsert(d);
        }
    }

    let pending: Vec<_> = cat.datasets.values().filter(|d| !d.is_done()).map(|d| d.record.clone()).collect();
    let report = Enricher::new(gateway.clone(), config.enrich).run(pending, Some(&mut journal)).await?;
    let (performed, failed) = (report.performed, report.failed);
    for d in report.datasets {
        cat.upsert(d);
    }
    cat.provenance.provider = Some(gateway.describe());
    cat.provenance.model = Some(gateway.config().model_name.clone());
    cat.provenance.embedding_model = Some(gateway.config().embedding_model_name.clone());
    cat.provenance.enriched_at = Some(timestamp());
    catalog::stage(&cat, path)?.commit()?;
    journal.remove()?;
    eprintln!("enriched {performed} datasets ({failed} failed); {} semantic of {}", cat.semantic().count(), cat.len());
    Ok(())
}

fn index(config: &ScoutConfig, path: &Path, out: &Path) -> Result<()> {
    let cat = catalog::load(path).with_context(|| format!("loading {}", path.display()))?;
    let bundle = build_indexes(&cat, config.hnsw)?;
    write_bundle(&bundle, out)?;
    eprintln!("indexed {} datasets and {} attributes into {}", bundle.datasets.len(), bundle.attributes.len(), out.display());
    Ok(())
}

async fn run_serve(config: ScoutConfig, catalog: &Path, index: &Path, listen: SocketAddr, static_dir: Option<PathBuf>) -> Result<()> {
    if let Some(dir) = &static_dir {
        if !dir.join("index.html").is_file() {
            bail!("{} has no index.html", dir.display());
        }
    }
    let engine = Engine::open(catalog, index, config)?;
    let listener = tokio::net::TcpListener::bind(listen).await.with_context(|| format!("binding {listen}"))?;
    println!("listening on http://{}", listener.local_addr()?);
    let shutdown = async {
        #[cfg(unix)]
        {
            let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).expect("signal handler");
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = term.recv() => {}
            }
        }
        #[cfg(not(unix))]
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    serve(listener, AppState::new(Arc::new(engine)), static_dir, shutdown).await?;
    Ok(())
}

fn read_filters(arg: Option<&str>) -> Result<FilterSet> {
    let Some(arg) = arg else { return Ok(FilterSet::default()) };
    let text = match arg.strip_prefix('@') {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {p}"))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).context("parsing --filters")
}

async fn query(config: ScoutConfig, args: QueryArgs) -> Result<()> {
    let request = SearchRequest {
        query: args.text.clone(),
        task_type: args.task_type,
        filters: read_filters(args.filters.as_deref())?,
    };
    let response = match &args.server {
        Some(url) => ScoutClient::new(url)?.search(&request, false).await?,
        None => {
            let (catalog, index) = (args.catalog.as_deref().expect("clap"), args.index.as_deref().expect("clap"));
            let engine = Engine::open(catalog, index, config)?;
            engine.search(&request, false).await?.response
        }
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&golden_view(&response))?);
    } else {
        print_table(&response, args.limit);
    }
    Ok(())
}

/// Ranked ids plus the suggestion bundle, without floating-point payloads.
fn golden_view(r: &SearchResponse) -> Value {
    json!({
        "state_digest": r.state_digest,
        "semantic_unavailable": r.semantic_unavailable,
        "ranked_ids": r.results.iter().map(|c| &c.dataset_id).collect::<Vec<_>>(),
        "reformulations": r.reformulations,
        "concepts": r.concepts.iter().map(|c| json!({"label": c.label, "member_attribute_ids": c.member_attribute_ids})).collect::<Vec<_>>(),
        "granularity_suggestions": r.granularity_suggestions,
    })
}

fn print_table(r: &SearchResponse, limit: usize) {
    if r.semantic_unavailable {
        println!("semantic search unavailable; showing keyword-filter matches");
    }
    for d in &r.diagnostics {
        eprintln!("note: {d}");
    }
    println!("{:>4}  {:>6}  {:<28}  title", "rank", "score", "dataset");
    for (i, c) in r.results.iter().take(limit).enumerate() {
        println!("{:>4}  {:>6.3}  {:<28}  {}", i + 1, c.score, c.dataset_id, c.title);
    }
    if r.results.len() > limit {
        println!("... {} more", r.results.len() - limit);
    }
    if !r.reformulations.is_empty() {
        println!("\nreformulations:");
        for s in &r.reformulations {
            println!("  {} ({} matching)", s.query, s.matching_count);
        }
    }
    if !r.concepts.is_empty() {
        let labels: Vec<&str> = r.concepts.iter().map(|c| c.label.as_str()).collect();
        println!("\nconcepts: {}", labels.join(", "));
    }
    let g = &r.granularity_suggestions;
    if !g.temporal.is_empty() || !g.spatial.is_empty() {
        println!("\ngranularity: temporal {:?}, spatial {:?}", g.temporal, g.spatial);
    }
    println!("\nstate digest: {}", r.state_digest);
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("SCOUT_LOG").unwrap_or_else(|_| "info".into()))
        .init();
    let config = ScoutConfig::load(cli.config.as_deref())?;
    let rt = tokio::runtime::Runtime::new()?;
    match cli.command {
        Command::Ingest { corpus, out } => ingest(&config, &corpus, &out),
        Command::Enrich { catalog, resume } => rt.block_on(enrich(&config, &catalog, resume)),
        Command::Index { catalog, out } => index(&config, &catalog, &out),
        Command::Serve { catalog, index, listen, static_dir } => {
            rt.block_on(run_serve(config, &catalog, &index, listen, static_dir))
        }
        Command::Query(args) => rt.block_on(query(config, args)),
    }
}
