//! Flags and exit-code handling shared by the command-line tools.

use std::fmt::Display;
use std::process::ExitCode;

use clap::{Args, ValueEnum};
use escot::{Alphabet, Batching, DatabaseFormat, SessionConfig};

/// Exit status for I/O, parse and usage failures.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for failures of a running session.
pub const EXIT_PROTOCOL: u8 = 1;

/// Prints `err` to stderr and returns `code`.
pub fn fail(code: u8, context: &str, err: impl Display) -> ExitCode {
    eprintln!("error: {context}: {err}");
    ExitCode::from(code)
}

pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BatchingArg {
    PerStripe,
    WholeBand,
}

impl From<BatchingArg> for Batching {
    fn from(b: BatchingArg) -> Self {
        match b {
            BatchingArg::PerStripe => Batching::PerStripe,
            BatchingArg::WholeBand => Batching::WholeBand,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Fasta,
    Lines,
}

impl From<FormatArg> for DatabaseFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Fasta => DatabaseFormat::Fasta,
            FormatArg::Lines => DatabaseFormat::PlainLines,
        }
    }
}

/// Parameters both parties must agree on.
#[derive(Debug, Clone, Args)]
pub struct SessionArgs {
    /// Base-OT group modulus size in bits
    #[arg(long, default_value_t = 1024)]
    pub phi: u32,
    /// Security parameter: number of base OTs and codeword bits
    #[arg(long, default_value_t = 80)]
    pub kappa: u32,
    /// Report distances up to this value; larger ones as "exceeds"
    #[arg(long = "threshold", short = 'k', default_value_t = 60)]
    pub k: u32,
    /// Symbols of the alphabet, in code order
    #[arg(long, default_value = "ACGT")]
    pub alphabet: String,
}

impl SessionArgs {
    pub fn alphabet(&self) -> Result<Alphabet, escot::AlphabetError> {
        Alphabet::new(self.alphabet.as_bytes())
    }

    /// Resolves the flags into a validated session configuration.
    pub fn config(&self, batching: Batching) -> Result<(Alphabet, SessionConfig), String> {
        let alphabet = self.alphabet().map_err(|e| e.to_string())?;
        let config = SessionConfig {
            phi: self.phi,
            kappa: self.kappa,
            n: alphabet.len() as u32,
            k: self.k,
            batching,
            ..SessionConfig::default()
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok((alphabet, config))
    }
}
