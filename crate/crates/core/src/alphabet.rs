//! Symbol alphabets, encoded sequences and sequence databases.
//!
//! Sequences are stored as symbol codes `0..n`, where the code of a symbol is
//! its position in the alphabet. The default alphabet is `ACGT` (n = 4).
//! Databases load from line-delimited files (one sequence per line) or FASTA.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

/// Largest alphabet a symbol code (one byte) can represent.
pub const MAX_ALPHABET: usize = 256;

#[derive(Debug, Error)]
pub enum AlphabetError {
    #[error("unknown symbol {ch:?} at position {position}")]
    UnknownSymbol { position: usize, ch: char },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("symbol code {code} out of range for alphabet of size {n}")]
    CodeOutOfRange { code: u8, n: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("duplicate sequence id {0:?}")]
    DuplicateId(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An ordered set of distinct ASCII symbols.
#[derive(Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<u8>,
    codes: [Option<u8>; 256],
}

impl Alphabet {
    pub fn new(symbols: &[u8]) -> Result<Self, AlphabetError> {
        if symbols.len() < 2 || symbols.len() > MAX_ALPHABET {
            return Err(AlphabetError::InvalidAlphabet(format!(
                "size {} outside 2..={MAX_ALPHABET}",
                symbols.len()
            )));
        }
        let mut codes = [None; 256];
        for (i, &s) in symbols.iter().enumerate() {
            let s = s.to_ascii_uppercase();
            if codes[s as usize].is_some() {
                return Err(AlphabetError::InvalidAlphabet(format!(
                    "duplicate symbol {:?}",
                    s as char
                )));
            }
            codes[s as usize] = Some(i as u8);
        }
        Ok(Self {
            symbols: symbols.iter().map(u8::to_ascii_uppercase).collect(),
            codes,
        })
    }

    /// The nucleotide alphabet `A, C, G, T`.
    pub fn dna() -> Self {
        Self::new(b"ACGT").expect("static alphabet")
    }

    /// Number of symbols; the `n` of the 1-out-of-n transfers.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    /// Code of `ch`, folding lowercase to uppercase.
    pub fn code_of(&self, ch: u8) -> Option<u8> {
        self.codes[ch.to_ascii_uppercase() as usize]
    }

    pub fn symbol(&self, code: u8) -> Option<u8> {
        self.symbols.get(code as usize).copied()
    }

    pub fn encode(&self, id: impl Into<String>, text: &str) -> Result<EncodedSequence, AlphabetError> {
        let mut codes = Vec::with_capacity(text.len());
        for (position, ch) in text.chars().enumerate() {
            let code = u8::try_from(ch)
                .ok()
                .and_then(|b| self.code_of(b))
                .ok_or(AlphabetError::UnknownSymbol { position, ch })?;
            codes.push(code);
        }
        EncodedSequence::new(id, codes, self.len())
    }

    pub fn decode(&self, seq: &EncodedSequence) -> String {
        seq.codes
            .iter()
            .map(|&c| self.symbols[c as usize] as char)
            .collect()
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Self::dna()
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Alphabet")
            .field(&String::from_utf8_lossy(&self.symbols))
            .finish()
    }
}

/// A non-empty sequence of symbol codes, each below the alphabet size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    id: String,
    codes: Vec<u8>,
    alphabet_size: usize,
}

impl EncodedSequence {
    pub fn new(id: impl Into<String>, codes: Vec<u8>, alphabet_size: usize) -> Result<Self, AlphabetError> {
        if codes.is_empty() {
            return Err(AlphabetError::EmptySequence);
        }
        if let Some(&code) = codes.iter().find(|&&c| c as usize >= alphabet_size) {
            return Err(AlphabetError::CodeOutOfRange { code, n: alphabet_size });
        }
        Ok(Self {
            id: id.into(),
            codes,
            alphabet_size,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatabaseFormat {
    PlainLines,
    Fasta,
}

impl DatabaseFormat {
    /// FASTA if the first non-blank line starts with `>`.
    pub fn detect(text: &str) -> Self {
        match text.lines().map(str::trim).find(|l| !l.is_empty()) {
            Some(l) if l.starts_with('>') => Self::Fasta,
            _ => Self::PlainLines,
        }
    }
}

/// The server's ordered collection of sequences over one alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceDatabase {
    entries: Vec<EncodedSequence>,
    alphabet: Alphabet,
}

impl SequenceDatabase {
    pub fn new(alphabet: Alphabet, entries: Vec<EncodedSequence>) -> Result<Self, AlphabetError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.alphabet_size() != alphabet.len() {
                return Err(AlphabetError::InvalidAlphabet(format!(
                    "entry {:?} uses alphabet size {}, database uses {}",
                    e.id(),
                    e.alphabet_size(),
                    alphabet.len()
                )));
            }
            if !seen.insert(e.id().to_owned()) {
                return Err(AlphabetError::DuplicateId(e.id().to_owned()));
            }
        }
        Ok(Self { entries, alphabet })
    }

    pub fn entries(&self) -> &[EncodedSequence] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn get(&self, id: &str) -> Option<&EncodedSequence> {
        self.entries.iter().find(|e| e.id() == id)
    }

    pub fn write_to<W: Write>(&self, mut out: W, format: DatabaseFormat) -> io::Result<()> {
        for e in &self.entries {
            let text = self.alphabet.decode(e);
            match format {
                DatabaseFormat::PlainLines => writeln!(out, "{text}")?,
                DatabaseFormat::Fasta => {
                    writeln!(out, ">{}", e.id())?;
                    for chunk in text.as_bytes().chunks(70) {
                        out.write_all(chunk)?;
                        out.write_all(b"\n")?;
                    }
                }
            }
        }
        out.flush()
    }
}

/// Parses database text. Plain-line entries are identified by their 1-based
/// line number; blank lines are skipped.
pub fn parse_database(
    text: &str,
    format: DatabaseFormat,
    alphabet: &Alphabet,
) -> Result<SequenceDatabase, AlphabetError> {
    let mut entries = Vec::new();
    match format {
        DatabaseFormat::PlainLines => {
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim_end_matches('\r').trim();
                if line.is_empty() {
                    continue;
                }
                let seq = alphabet
                    .encode((idx + 1).to_string(), line)
                    .map_err(|e| at_line(e, idx + 1))?;
                entries.push(seq);
            }
        }
        DatabaseFormat::Fasta => {
            let mut current: Option<(String, usize, String)> = None;
            let finish = |rec: Option<(String, usize, String)>,
                              entries: &mut Vec<EncodedSequence>|
             -> Result<(), AlphabetError> {
                if let Some((id, line, body)) = rec {
                    if body.is_empty() {
                        return Err(AlphabetError::Parse {
                            line,
                            reason: format!("record {id:?} has no sequence"),
                        });
                    }
                    entries.push(alphabet.encode(id, &body).map_err(|e| at_line(e, line))?);
                }
                Ok(())
            };
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim_end_matches('\r').trim();
                if line.is_empty() {
                    continue;
                }
                if let Some(header) = line.strip_prefix('>') {
                    finish(current.take(), &mut entries)?;
                    let id = header.split_whitespace().next().unwrap_or("").to_owned();
                    if id.is_empty() {
                        return Err(AlphabetError::Parse {
                            line: idx + 1,
                            reason: "empty FASTA header".into(),
                        });
                    }
                    current = Some((id, idx + 1, String::new()));
                } else {
                    match current.as_mut() {
                        Some((_, _, body)) => body.push_str(line),
                        None => {
                            return Err(AlphabetError::Parse {
                                line: idx + 1,
                                reason: "sequence data before first FASTA header".into(),
                            })
                        }
                    }
                }
            }
            finish(current.take(), &mut entries)?;
        }
    }
    if entries.is_empty() {
        return Err(AlphabetError::Parse {
            line: 0,
            reason: "empty input".into(),
        });
    }
    SequenceDatabase::new(alphabet.clone(), entries)
}

fn at_line(err: AlphabetError, line: usize) -> AlphabetError {
    match err {
        AlphabetError::UnknownSymbol { position, ch } => AlphabetError::Parse {
            line,
            reason: format!("unknown symbol {ch:?} at column {}", position + 1),
        },
        other => other,
    }
}

/// Loads a database file. `format = None` auto-detects FASTA by a leading `>`.
pub fn load_database(
    path: impl AsRef<Path>,
    format: Option<DatabaseFormat>,
    alphabet: &Alphabet,
) -> Result<SequenceDatabase, AlphabetError> {
    let text = fs::read_to_string(path)?;
    let format = format.unwrap_or_else(|| DatabaseFormat::detect(&text));
    parse_database(&text, format, alphabet)
}

/// Loads a single query sequence: the first record of the file.
pub fn load_sequence(
    path: impl AsRef<Path>,
    alphabet: &Alphabet,
) -> Result<EncodedSequence, AlphabetError> {
    let db = load_database(path, None, alphabet)?;
    Ok(db.entries.into_iter().next().expect("parse rejects empty input"))
}

/// Common ancestor of a synthetic database. A [`synthetic_query`] has edit
/// distance near `length * mutation_rate` to every entry, the ancestor itself
/// about half that.
pub fn synthetic_ancestor(length: usize, alphabet_size: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..length)
        .map(|_| rng.gen_range(0..alphabet_size) as u8)
        .collect()
}

/// Applies `count` random point mutations (substitution, insertion or
/// deletion, with probabilities 1/2, 1/4, 1/4). Length changes by at most
/// `count`.
pub fn mutate<R: Rng>(seq: &mut Vec<u8>, count: usize, alphabet_size: usize, rng: &mut R) {
    for _ in 0..count {
        let kind = rng.gen_range(0..4);
        match kind {
            0 | 1 if !seq.is_empty() => {
                let pos = rng.gen_range(0..seq.len());
                let shift = rng.gen_range(1..alphabet_size) as u8;
                seq[pos] = (seq[pos] + shift) % alphabet_size as u8;
            }
            3 if seq.len() > 1 => {
                let pos = rng.gen_range(0..seq.len());
                seq.remove(pos);
            }
            _ => {
                let pos = rng.gen_range(0..=seq.len());
                seq.insert(pos, rng.gen_range(0..alphabet_size) as u8);
            }
        }
    }
}

fn mutation_count(length: usize, mutation_rate: f64) -> Result<usize, AlphabetError> {
    if !(0.0..=1.0).contains(&mutation_rate) {
        return Err(AlphabetError::InvalidParameter(format!(
            "mutation rate {mutation_rate} outside [0, 1]"
        )));
    }
    if length == 0 {
        return Err(AlphabetError::InvalidParameter("length must be positive".into()));
    }
    // query and entry each carry half, so siblings differ by about the full rate
    Ok((length as f64 * mutation_rate / 2.0).round() as usize)
}

/// Generates `count` DNA sequences, each the common ancestor with
/// `round(length * mutation_rate / 2)` random mutations applied. Entries are
/// identified `1..=count`. Pure in all arguments.
pub fn generate_synthetic(
    count: usize,
    length: usize,
    mutation_rate: f64,
    seed: u64,
) -> Result<SequenceDatabase, AlphabetError> {
    if count == 0 {
        return Err(AlphabetError::InvalidParameter("count must be positive".into()));
    }
    let mutations = mutation_count(length, mutation_rate)?;
    let alphabet = Alphabet::dna();
    let ancestor = synthetic_ancestor(length, alphabet.len(), seed);
    let entries = (0..count)
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut codes = ancestor.clone();
            mutate(&mut codes, mutations, alphabet.len(), &mut rng);
            EncodedSequence::new((i + 1).to_string(), codes, alphabet.len())
        })
        .collect::<Result<Vec<_>, _>>()?;
    SequenceDatabase::new(alphabet, entries)
}

/// A sibling of the entries of `generate_synthetic(_, length, _, seed)`:
/// the same ancestor with its own `round(length * mutation_rate / 2)`
/// mutations.
pub fn synthetic_query(
    length: usize,
    mutation_rate: f64,
    seed: u64,
) -> Result<EncodedSequence, AlphabetError> {
    let mutations = mutation_count(length, mutation_rate)?;
    let mut codes = synthetic_ancestor(length, 4, seed);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    mutate(&mut codes, mutations, 4, &mut rng);
    EncodedSequence::new("query", codes, 4)
}
