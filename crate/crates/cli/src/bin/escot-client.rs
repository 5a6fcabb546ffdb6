use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use escot::alphabet::load_sequence;
use escot::{run_client, ProtocolError};
use escot_cli::{fail, init_logging, BatchingArg, SessionArgs, EXIT_PROTOCOL, EXIT_USAGE};

/// Queries a server for database entries within the threshold distance of
/// a private sequence.
///
/// Prints `id<TAB>distance` for every entry within the threshold.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Query file; the first record is used
    #[arg(long)]
    query: PathBuf,
    /// Server address
    #[arg(long, default_value = "127.0.0.1:7878")]
    connect: String,
    #[command(flatten)]
    session: SessionArgs,
    /// Comparison grouping; per-stripe allows early termination
    #[arg(long, value_enum, default_value_t = BatchingArg::PerStripe)]
    batching: BatchingArg,
    /// Write session metrics as JSON to this file
    #[arg(long)]
    stats: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let (alphabet, config) = match cli.session.config(cli.batching.into()) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_USAGE, "invalid parameters", e),
    };
    let query = match load_sequence(&cli.query, &alphabet) {
        Ok(q) => q,
        Err(e) => return fail(EXIT_USAGE, &format!("loading {}", cli.query.display()), e),
    };
    let (results, metrics) = match run_client(&query, &config, cli.connect.as_str()) {
        Ok(r) => r,
        Err(ProtocolError::Io(e)) => return fail(EXIT_PROTOCOL, &format!("connecting to {}", cli.connect), e),
        Err(e) => return fail(EXIT_PROTOCOL, "session", e),
    };
    log::info!(
        "{} entries, {} within k={}, {} comparisons, {} bytes in {:.2} s",
        results.len(),
        results.iter().filter(|r| r.is_match()).count(),
        config.k,
        metrics.comparisons,
        metrics.framed_bytes,
        metrics.duration_s
    );
    for r in results.iter().filter(|r| r.is_match()) {
        println!("{}\t{}", r.id, r.outcome);
    }
    if let Some(path) = &cli.stats {
        let written = serde_json::to_string_pretty(&metrics)
            .map_err(|e| e.to_string())
            .and_then(|s| fs::write(path, s + "\n").map_err(|e| e.to_string()));
        if let Err(e) = written {
            return fail(EXIT_USAGE, &format!("writing {}", path.display()), e);
        }
    }
    ExitCode::SUCCESS
}
