//! Synthetic key distributions for aggregation experiments, plus a small
//! TPC-H-schema table generator in [`tpch`].
//!
//! All randomness for one dataset comes from a single ChaCha stream seeded
//! by the spec, so equal specs give byte-identical output.

pub mod tpch;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::storage::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    RSeq,
    RSeqShf,
    HHit,
    HHitShf,
    Zipf,
    MovC,
}

impl Distribution {
    pub const ALL: [Distribution; 6] = [
        Distribution::RSeq,
        Distribution::RSeqShf,
        Distribution::HHit,
        Distribution::HHitShf,
        Distribution::Zipf,
        Distribution::MovC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Distribution::RSeq => "rseq",
            Distribution::RSeqShf => "rseq_shf",
            Distribution::HHit => "hhit",
            Distribution::HHitShf => "hhit_shf",
            Distribution::Zipf => "zipf",
            Distribution::MovC => "movc",
        }
    }

    /// Whether the generator always produces exactly `c` distinct keys.
    pub fn exact_cardinality(self) -> bool {
        !matches!(self, Distribution::Zipf | Distribution::MovC)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Distribution, DatagenError> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Distribution::ALL
            .into_iter()
            .find(|d| d.name() == norm)
            .ok_or_else(|| DatagenError::UnknownDistribution(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatagenError {
    #[error("record count {r} is not divisible by cardinality {c}")]
    IndivisibleSize { r: u64, c: u64 },
    #[error("cannot place {c} keys with a half-share hitter in {r} records")]
    CardinalityInfeasible { r: u64, c: u64 },
    #[error("window {w} exceeds cardinality {c}")]
    WindowExceedsCardinality { w: u64, c: u64 },
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub distribution: Distribution,
    /// Record count.
    pub r: u64,
    /// Target group-by cardinality.
    pub c: u64,
    /// Zipf exponent.
    pub e: f64,
    /// MovC window size.
    pub w: u64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(distribution: Distribution, r: u64, c: u64, seed: u64) -> DatasetSpec {
        DatasetSpec {
            distribution,
            r,
            c,
            e: 0.5,
            w: 64,
            seed,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

// Independent streams for the sub-purposes of one dataset.
const STREAM_HITTER: u64 = 1;
const STREAM_FILL: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_SAMPLE: u64 = 4;

/// Generates the key sequence described by `spec`.
pub fn generate(spec: &DatasetSpec) -> Result<Vec<i64>, DatagenError> {
    if spec.c == 0 || spec.r < spec.c {
        return Err(DatagenError::InvalidSpec(format!(
            "need r >= c >= 1, got r={} c={}",
            spec.r, spec.c
        )));
    }
    match spec.distribution {
        Distribution::RSeq => gen_rseq(spec),
        Distribution::RSeqShf => gen_rseq_shf(spec),
        Distribution::HHit => gen_hhit(spec, false),
        Distribution::HHitShf => gen_hhit(spec, true),
        Distribution::Zipf => gen_zipf(spec),
        Distribution::MovC => gen_movc(spec),
    }
}

/// `c` ascending segments; segment `i` holds `r/c` copies of key `i`.
pub fn gen_rseq(spec: &DatasetSpec) -> Result<Vec<i64>, DatagenError> {
    let (r, c) = (spec.r, spec.c);
    if c == 0 || r % c != 0 {
        return Err(DatagenError::IndivisibleSize { r, c });
    }
    let per = r / c;
    Ok((1..=c as i64)
        .flat_map(|k| std::iter::repeat_n(k, per as usize))
        .collect())
}

pub fn gen_rseq_shf(spec: &DatasetSpec) -> Result<Vec<i64>, DatagenError> {
    let mut keys = gen_rseq(spec)?;
    keys.shuffle(&mut spec.rng(STREAM_SHUFFLE));
    Ok(keys)
}

/// One seed-chosen key fills exactly `floor(r/2)` records; every other key
/// appears at least once and the remainder is drawn uniformly from the
/// non-hitter keys. Unshuffled output puts the hitter's records first.
pub fn gen_hhit(spec: &DatasetSpec, shuffled: bool) -> Result<Vec<i64>, DatagenError> {
    let (r, c) = (spec.r, spec.c);
    // c == 1 would force the non-hitter half onto the hitter.
    if c < 2 || r < 2 * c {
        return Err(DatagenError::CardinalityInfeasible { r, c });
    }
    let hitter = spec.rng(STREAM_HITTER).random_range(1..=c as i64);
    let others: Vec<i64> = (1..=c as i64).filter(|&k| k != hitter).collect();
    let mut keys = Vec::with_capacity(r as usize);
    keys.extend(std::iter::repeat_n(hitter, (r / 2) as usize));
    keys.extend_from_slice(&others);
    let mut fill = spec.rng(STREAM_FILL);
    while keys.len() < r as usize {
        keys.push(others[fill.random_range(0..others.len())]);
    }
    if shuffled {
        keys.shuffle(&mut spec.rng(STREAM_SHUFFLE));
    }
    Ok(keys)
}

/// Rank weights `w(k) = k^-e` for `k = 1..=c`.
pub fn zipf_weights(c: u64, e: f64) -> Vec<f64> {
    (1..=c).map(|k| (k as f64).powf(-e)).collect()
}

/// `r` i.i.d. draws from the rank distribution by inverse CDF.
pub fn gen_zipf(spec: &DatasetSpec) -> Result<Vec<i64>, DatagenError> {
    if !spec.e.is_finite() || spec.e < 0.0 {
        return Err(DatagenError::InvalidSpec(format!("zipf exponent {}", spec.e)));
    }
    let mut cdf = zipf_weights(spec.c, spec.e);
    let mut acc = 0.0;
    for w in cdf.iter_mut() {
        acc += *w;
        *w = acc;
    }
    let mut rng = spec.rng(STREAM_SAMPLE);
    Ok((0..spec.r)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let rank = cdf.partition_point(|&x| x <= u).min(cdf.len() - 1);
            rank as i64 + 1
        })
        .collect())
}

/// Inclusive window for the `i`-th MovC key.
pub fn movc_window(i: u64, r: u64, c: u64, w: u64) -> (i64, i64) {
    let lo = ((c - w) as u128 * i as u128 / r as u128) as i64;
    (lo, lo + w as i64)
}

/// Key `i` is uniform in a window of width `W` sliding from 0 towards `c`.
pub fn gen_movc(spec: &DatasetSpec) -> Result<Vec<i64>, DatagenError> {
    let (r, c, w) = (spec.r, spec.c, spec.w);
    if w > c {
        return Err(DatagenError::WindowExceedsCardinality { w, c });
    }
    let mut rng = spec.rng(STREAM_SAMPLE);
    Ok((0..r)
        .map(|i| {
            let (lo, hi) = movc_window(i, r, c, w);
            rng.random_range(lo..=hi)
        })
        .collect())
}

/// Value column written next to each key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValueRule {
    #[default]
    Key,
    /// Zero-based record position.
    Index,
    Constant(i64),
}

impl ValueRule {
    pub fn value(self, key: i64, index: usize) -> i64 {
        match self {
            ValueRule::Key => key,
            ValueRule::Index => index as i64,
            ValueRule::Constant(v) => v,
        }
    }
}

/// Writes `(key, value)` rows without a header.
pub fn write_dataset(
    keys: &[i64],
    rule: ValueRule,
    path: &Path,
    format: Format,
) -> Result<(), DatagenError> {
    let io = |e: std::io::Error| DatagenError::Io(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for (i, &k) in keys.iter().enumerate() {
        let v = rule.value(k, i);
        match format {
            Format::Csv => writeln!(out, "{k},{v}"),
            Format::Tbl => writeln!(out, "{k}|{v}|"),
        }
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Number of distinct keys.
pub fn cardinality(keys: &[i64]) -> usize {
    keys.iter().collect::<std::collections::HashSet<_>>().len()
}
