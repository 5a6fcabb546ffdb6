//! Shared workloads for the benchmarks.

use escot::alphabet::{generate_synthetic, synthetic_query};
use escot::{EncodedSequence, SequenceDatabase};

/// A query and a database of `count` mutated copies of one ancestor.
pub fn workload(count: usize, length: usize, rate: f64, seed: u64) -> (EncodedSequence, SequenceDatabase) {
    let db = generate_synthetic(count, length, rate, seed).expect("valid synthetic parameters");
    let query = synthetic_query(length, rate, seed).expect("valid synthetic parameters");
    (query, db)
}
