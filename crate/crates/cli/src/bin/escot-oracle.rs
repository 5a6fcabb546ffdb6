use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use escot::alphabet::load_sequence;
use escot::{ukkonen_cleartext, wagner_fischer, Alphabet, Threshold};
use escot_cli::{fail, EXIT_USAGE};

/// Computes the edit distance of two sequences in the clear.
///
/// Prints the exact distance, or with --threshold the banded outcome
/// (a distance or "exceeds").
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// First sequence file; the first record is used
    #[arg(long)]
    a: PathBuf,
    /// Second sequence file; the first record is used
    #[arg(long)]
    b: PathBuf,
    #[arg(long, short = 'k')]
    threshold: Option<u32>,
    /// Symbols of the alphabet
    #[arg(long, default_value = "ACGT")]
    alphabet: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let alphabet = match Alphabet::new(cli.alphabet.as_bytes()) {
        Ok(a) => a,
        Err(e) => return fail(EXIT_USAGE, "alphabet", e),
    };
    let mut seqs = Vec::new();
    for path in [&cli.a, &cli.b] {
        match load_sequence(path, &alphabet) {
            Ok(s) => seqs.push(s),
            Err(e) => return fail(EXIT_USAGE, &format!("loading {}", path.display()), e),
        }
    }
    let (x, y) = (seqs[0].codes(), seqs[1].codes());
    match cli.threshold {
        Some(k) => println!("{}", ukkonen_cleartext(x, y, Threshold(k))),
        None => println!("{}", wagner_fischer(x, y)),
    }
    ExitCode::SUCCESS
}
