use std::fs;

use escot::alphabet::{generate_synthetic, load_database, load_sequence};
use escot::{Alphabet, AlphabetError, DatabaseFormat};
use tempfile::TempDir;

#[test]
fn formats_load_from_disk() {
    let dir = TempDir::new().unwrap();
    let dna = Alphabet::dna();
    let lines = dir.path().join("db.txt");
    fs::write(&lines, "acgt\r\nGATTACA\r\n").unwrap();
    let db = load_database(&lines, None, &dna).unwrap();
    assert_eq!(db.len(), 2);
    assert_eq!(db.get("2").unwrap().codes(), &[2, 0, 3, 3, 0, 1, 0]);
    assert_eq!(db.get("1").unwrap().codes(), &[0, 1, 2, 3]);

    let fasta = dir.path().join("db.fa");
    fs::write(&fasta, ">first sample\nACG\nT\n>second\nAGT\n").unwrap();
    let db = load_database(&fasta, Some(DatabaseFormat::Fasta), &dna).unwrap();
    assert_eq!(db.entries()[0].codes(), &[0, 1, 2, 3]);
    assert_eq!(load_sequence(&fasta, &dna).unwrap().len(), 4);
}

#[test]
fn written_databases_reload_identically() {
    let dir = TempDir::new().unwrap();
    let db = generate_synthetic(4, 250, 0.05, 2).unwrap();
    for (name, format) in [("a.fa", DatabaseFormat::Fasta), ("a.txt", DatabaseFormat::PlainLines)] {
        let path = dir.path().join(name);
        db.write_to(fs::File::create(&path).unwrap(), format).unwrap();
        assert_eq!(load_database(&path, None, db.alphabet()).unwrap(), db);
    }
}

#[test]
fn load_errors() {
    let dir = TempDir::new().unwrap();
    let dna = Alphabet::dna();
    assert!(matches!(
        load_database(dir.path().join("missing"), None, &dna),
        Err(AlphabetError::Io(_))
    ));
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "ACGT\nACXT\n").unwrap();
    let err = load_database(&bad, None, &dna).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    assert!(matches!(load_sequence(&empty, &dna), Err(AlphabetError::Parse { .. })));
}
