//! Cleartext edit distance: a full Wagner–Fischer table and Ukkonen's
//! threshold-banded algorithm.
//!
//! The banded engine never looks at characters directly. Every equality test
//! goes through an [`EqualityComparator`], so the same DP drives both the
//! cleartext path and the oblivious-transfer path of the protocol.
//!
//! Costs are unit for insertion, deletion and substitution.

use std::convert::Infallible;
use std::fmt;

use serde::Serialize;

/// Outcome of a thresholded distance computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditDistanceResult {
    Distance(u32),
    ExceedsThreshold,
}

impl EditDistanceResult {
    /// Thresholds an exact distance.
    pub fn from_exact(d: u32, k: Threshold) -> Self {
        if d <= k.0 {
            Self::Distance(d)
        } else {
            Self::ExceedsThreshold
        }
    }

    pub fn distance(self) -> Option<u32> {
        match self {
            Self::Distance(d) => Some(d),
            Self::ExceedsThreshold => None,
        }
    }
}

impl fmt::Display for EditDistanceResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Distance(d) => write!(f, "{d}"),
            Self::ExceedsThreshold => f.write_str("exceeds"),
        }
    }
}

/// Maximum distance `k` a banded run reports exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Threshold(pub u32);

/// Answers character-equality queries for `(i, j)` index pairs, `i` into the
/// query X and `j` into the target Y.
///
/// Implementations must return one bit per pair, in request order.
pub trait EqualityComparator {
    type Error;

    fn compare_batch(&mut self, pairs: &[(usize, usize)]) -> Result<Vec<bool>, Self::Error>;
}

/// Compares two code slices directly and counts the comparisons made.
#[derive(Debug)]
pub struct PlainComparator<'a> {
    x: &'a [u8],
    y: &'a [u8],
    pub comparisons: usize,
    pub batches: usize,
}

impl<'a> PlainComparator<'a> {
    pub fn new(x: &'a [u8], y: &'a [u8]) -> Self {
        Self {
            x,
            y,
            comparisons: 0,
            batches: 0,
        }
    }
}

impl EqualityComparator for PlainComparator<'_> {
    type Error = Infallible;

    fn compare_batch(&mut self, pairs: &[(usize, usize)]) -> Result<Vec<bool>, Infallible> {
        self.comparisons += pairs.len();
        self.batches += 1;
        Ok(pairs.iter().map(|&(i, j)| self.x[i] == self.y[j]).collect())
    }
}

/// How the banded engine groups comparisons into comparator calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Batching {
    /// One call per DP row of the band; allows early termination.
    #[default]
    PerStripe,
    /// A single call covering the whole band up front.
    WholeBand,
}

/// Exact Levenshtein distance in O(m·m') time and O(min) space.
pub fn wagner_fischer(x: &[u8], y: &[u8]) -> u32 {
    let (short, long) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let mut prev: Vec<u32> = (0..=short.len() as u32).collect();
    let mut cur = vec![0u32; short.len() + 1];
    for (i, &a) in long.iter().enumerate() {
        cur[0] = i as u32 + 1;
        for (j, &b) in short.iter().enumerate() {
            let sub = prev[j] + u32::from(a != b);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// The diagonal band of DP cells that can lie on an alignment path of cost
/// at most `k`.
///
/// Rows index the shorter sequence. With `diff = cols - rows`, a cell on
/// diagonal `d = j - i` is in the band iff `|d| + |diff - d| <= k`, i.e.
/// `d` in `[-p, diff + p]` with `p = (k - diff) / 2`. The band is empty when
/// `diff > k`: the length gap alone exceeds the threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Band {
    query_len: usize,
    target_len: usize,
    k: u32,
    rows: usize,
    cols: usize,
    transposed: bool,
    lo: isize,
    hi: isize,
    empty: bool,
}

impl Band {
    pub fn new(query_len: usize, target_len: usize, k: Threshold) -> Self {
        let transposed = query_len > target_len;
        let (rows, cols) = if transposed {
            (target_len, query_len)
        } else {
            (query_len, target_len)
        };
        let diff = cols - rows;
        let empty = diff as u64 > k.0 as u64 || rows == 0;
        let (lo, hi) = if empty {
            (0, -1)
        } else {
            let p = ((k.0 as usize - diff) / 2) as isize;
            ((-p).max(-(rows as isize)), (diff as isize + p).min(cols as isize))
        };
        Self {
            query_len,
            target_len,
            k: k.0,
            rows,
            cols,
            transposed,
            lo,
            hi,
            empty,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn threshold(&self) -> Threshold {
        Threshold(self.k)
    }

    /// Number of stripes (DP rows carrying comparisons).
    pub fn stripe_count(&self) -> usize {
        if self.empty {
            0
        } else {
            self.rows
        }
    }

    /// Inclusive column range of row `i` (1-based) that needs comparisons.
    fn columns(&self, i: usize) -> (usize, usize) {
        let first = (i as isize + self.lo).max(1) as usize;
        let last = ((i as isize + self.hi) as usize).min(self.cols);
        (first, last)
    }

    pub fn stripe_len(&self, stripe: usize) -> usize {
        let (first, last) = self.columns(stripe + 1);
        last + 1 - first
    }

    /// Comparison pairs `(query index, target index)` of one stripe
    /// (0-based), in column order.
    pub fn stripe(&self, stripe: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.stripe_len(stripe));
        self.push_stripe(stripe, &mut out);
        out
    }

    fn push_stripe(&self, stripe: usize, out: &mut Vec<(usize, usize)>) {
        let i = stripe + 1;
        let (first, last) = self.columns(i);
        for j in first..=last {
            out.push(if self.transposed {
                (j - 1, i - 1)
            } else {
                (i - 1, j - 1)
            });
        }
    }

    /// Total comparisons of the full schedule.
    pub fn total_pairs(&self) -> usize {
        (0..self.stripe_count()).map(|s| self.stripe_len(s)).sum()
    }

    /// Concatenated pairs of stripes `range`.
    pub fn pairs(&self, range: std::ops::Range<usize>) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in range {
            self.push_stripe(s, &mut out);
        }
        out
    }

    pub fn query_len(&self) -> usize {
        self.query_len
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }
}

/// Every band cell, grouped by stripe, in the order the banded engine
/// requests them.
pub fn band_cells(query_len: usize, target_len: usize, k: Threshold) -> Vec<Vec<(usize, usize)>> {
    let band = Band::new(query_len, target_len, k);
    (0..band.stripe_count()).map(|s| band.stripe(s)).collect()
}

/// Result of a banded run together with its comparison accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandedOutcome {
    pub result: EditDistanceResult,
    pub comparisons: usize,
    /// Stripes whose comparisons were requested.
    pub stripes_executed: usize,
    /// True if the run stopped before exhausting the band.
    pub aborted: bool,
}

const INF: u32 = u32::MAX / 4;

/// Ukkonen's banded edit distance between sequences of the given lengths,
/// with every character equality answered by `cmp`.
///
/// Returns `Distance(d)` iff the true distance `d <= k`. In per-stripe mode
/// the run stops as soon as every band cell of the last row has a lower bound
/// on the final distance above `k`.
pub fn ukkonen_banded<C: EqualityComparator>(
    query_len: usize,
    target_len: usize,
    k: Threshold,
    batching: Batching,
    cmp: &mut C,
) -> Result<BandedOutcome, C::Error> {
    let band = Band::new(query_len, target_len, k);
    if band.is_empty() {
        return Ok(BandedOutcome {
            result: EditDistanceResult::ExceedsThreshold,
            comparisons: 0,
            stripes_executed: 0,
            aborted: false,
        });
    }

    let width = (band.hi - band.lo + 1) as usize;
    let diff = (band.cols - band.rows) as isize;
    let lo = band.lo;
    let mut prev = vec![INF; width];
    let mut cur = vec![INF; width];
    for d in lo.max(0)..=band.hi {
        prev[(d - lo) as usize] = d as u32;
    }

    let mut comparisons = 0;
    let mut stripes_executed = 0;
    let whole = match batching {
        Batching::WholeBand => {
            let pairs = band.pairs(0..band.stripe_count());
            comparisons = pairs.len();
            stripes_executed = band.stripe_count();
            Some(cmp.compare_batch(&pairs)?)
        }
        Batching::PerStripe => None,
    };
    let mut offset = 0;

    for i in 1..=band.rows {
        let stripe_bits;
        let bits: &[bool] = match &whole {
            Some(all) => {
                let len = band.stripe_len(i - 1);
                let s = &all[offset..offset + len];
                offset += len;
                s
            }
            None => {
                let pairs = band.stripe(i - 1);
                comparisons += pairs.len();
                stripes_executed += 1;
                stripe_bits = cmp.compare_batch(&pairs)?;
                &stripe_bits
            }
        };

        let (first, _) = band.columns(i);
        let mut best_bound = INF;
        for (slot, d) in (lo..=band.hi).enumerate() {
            let j = i as isize + d;
            let value = if j < 0 || j > band.cols as isize {
                INF
            } else if j == 0 {
                i as u32
            } else {
                let j = j as usize;
                let equal = bits[j - first];
                let mut v = prev[slot] + u32::from(!equal);
                if slot + 1 < width {
                    v = v.min(prev[slot + 1] + 1);
                }
                if slot > 0 {
                    v = v.min(cur[slot - 1] + 1);
                }
                v
            };
            cur[slot] = value.min(INF);
            if value < INF {
                best_bound = best_bound.min(value + (diff - d).unsigned_abs() as u32);
            }
        }
        std::mem::swap(&mut prev, &mut cur);

        if best_bound > k.0 {
            return Ok(BandedOutcome {
                result: EditDistanceResult::ExceedsThreshold,
                comparisons,
                stripes_executed,
                aborted: i < band.rows,
            });
        }
    }

    let final_value = prev[(diff - lo) as usize];
    Ok(BandedOutcome {
        result: EditDistanceResult::from_exact(final_value, k),
        comparisons,
        stripes_executed,
        aborted: false,
    })
}

/// Banded distance of two code slices with a local comparator.
pub fn ukkonen_cleartext(x: &[u8], y: &[u8], k: Threshold) -> EditDistanceResult {
    let mut cmp = PlainComparator::new(x, y);
    match ukkonen_banded(x.len(), y.len(), k, Batching::PerStripe, &mut cmp) {
        Ok(outcome) => outcome.result,
        Err(never) => match never {},
    }
}
