use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use escot::alphabet::{generate_synthetic, synthetic_query};
use escot::{DatabaseFormat, SequenceDatabase};
use escot_cli::{fail, FormatArg, EXIT_USAGE};

/// Generates a synthetic DNA database: mutated copies of one random
/// ancestor. Optionally writes a sibling query whose distance to each entry
/// is near `length * rate`.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Number of entries
    #[arg(long, default_value_t = 50)]
    count: usize,
    /// Ancestor length
    #[arg(long, default_value_t = 3500)]
    length: usize,
    /// Expected edit distance between siblings, as a fraction of length
    #[arg(long, default_value_t = 0.02)]
    rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Fasta)]
    format: FormatArg,
    /// Database output file; stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a sibling query to this file
    #[arg(long)]
    query: Option<PathBuf>,
}

fn write(db: &SequenceDatabase, format: DatabaseFormat, path: Option<&PathBuf>) -> io::Result<()> {
    match path {
        Some(p) => {
            let mut out = BufWriter::new(File::create(p)?);
            db.write_to(&mut out, format)?;
            out.flush()
        }
        None => db.write_to(io::stdout().lock(), format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = DatabaseFormat::from(cli.format);
    let db = match generate_synthetic(cli.count, cli.length, cli.rate, cli.seed) {
        Ok(db) => db,
        Err(e) => return fail(EXIT_USAGE, "invalid parameters", e),
    };
    if let Err(e) = write(&db, format, cli.out.as_ref()) {
        return fail(EXIT_USAGE, "writing database", e);
    }
    if let Some(path) = &cli.query {
        let written = synthetic_query(cli.length, cli.rate, cli.seed)
            .and_then(|q| SequenceDatabase::new(db.alphabet().clone(), vec![q]))
            .map_err(|e| e.to_string())
            .and_then(|q| write(&q, format, Some(path)).map_err(|e| e.to_string()));
        if let Err(e) = written {
            return fail(EXIT_USAGE, "writing query", e);
        }
    }
    ExitCode::SUCCESS
}
