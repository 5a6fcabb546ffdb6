use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use escot::alphabet::load_database;
use escot::{run_server, Batching, ServerOptions};
use escot_cli::{fail, init_logging, FormatArg, SessionArgs, EXIT_PROTOCOL, EXIT_USAGE};
use serde_json::json;

/// Hosts a sequence database and answers private edit-distance queries.
///
/// Writes one JSON line per finished session to stdout.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Database file, FASTA or one sequence per line
    #[arg(long)]
    db: PathBuf,
    /// Force the database format instead of detecting it
    #[arg(long)]
    format: Option<FormatArg>,
    /// Address to listen on
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    #[command(flatten)]
    session: SessionArgs,
    /// Sessions served concurrently
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(1..))]
    max_sessions: u16,
    /// Exit after this many sessions instead of serving forever
    #[arg(long)]
    exit_after: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let (alphabet, config) = match cli.session.config(Batching::default()) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_USAGE, "invalid parameters", e),
    };
    let db = match load_database(&cli.db, cli.format.map(Into::into), &alphabet) {
        Ok(db) => db,
        Err(e) => return fail(EXIT_USAGE, &format!("loading {}", cli.db.display()), e),
    };
    let listener = match TcpListener::bind(&cli.listen) {
        Ok(l) => l,
        Err(e) => return fail(EXIT_USAGE, &format!("binding {}", cli.listen), e),
    };
    let addr = listener.local_addr().map(|a| a.to_string()).unwrap_or(cli.listen.clone());
    log::info!(
        "serving {} entries on {addr} (phi={}, kappa={}, n={}, k={})",
        db.len(),
        config.phi,
        config.kappa,
        config.n,
        config.k
    );
    let options = ServerOptions {
        max_sessions: cli.max_sessions as usize,
        session_limit: cli.exit_after,
    };
    let result = run_server(listener, Arc::new(db), config, options, |outcome| {
        let line = match outcome {
            Ok(report) => {
                log::info!(
                    "session from {} done: {} comparisons, {} bytes",
                    report.peer.map(|p| p.to_string()).unwrap_or_default(),
                    report.metrics.comparisons,
                    report.metrics.framed_bytes
                );
                json!({
                    "status": "ok",
                    "peer": report.peer.map(|p| p.to_string()),
                    "query_len": report.query_len,
                    "config": report.config,
                    "metrics": report.metrics,
                })
            }
            Err(e) => {
                log::warn!("session failed: {e}");
                json!({ "status": "error", "error": e.to_string() })
            }
        };
        println!("{line}");
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_PROTOCOL, "server", e),
    }
}
