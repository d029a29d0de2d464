//! Code comparisons, size tables and the random-permutation baseline.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::confgraph::{build_graph, ConfusabilityGraph};
use crate::error::{Error, Result};
use crate::greedy::{greedy_by_permutation, greedy_construct, Code, GreedyError};
use crate::priolib::Builtin;
use crate::vtcodes::{vt_class_sizes, vt_code, VtParams};

/// `|a ∩ b| / max(|a|, |b|)`; two empty codes overlap fully.
pub fn overlap(a: &Code, b: &Code) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::LengthMismatch { left: a.n(), right: b.n() });
    }
    let denom = a.len().max(b.len());
    if denom == 0 {
        return Ok(1.0);
    }
    let left = a.sorted();
    let right = b.sorted();
    let common = left.iter().filter(|w| right.binary_search(w).is_ok()).count();
    Ok(common as f64 / denom as f64)
}

pub fn vt0(n: usize) -> Result<Code> {
    vt_code(VtParams::new(n, 0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeRow {
    pub priority: &'static str,
    pub n: usize,
    pub s: usize,
    pub size: usize,
    /// `|VT_0(n)|` for single-deletion rows.
    pub vt0_size: Option<usize>,
    /// Overlap with `VT_0(n)` for single-deletion rows.
    pub vt0_overlap: Option<f64>,
}

impl SizeRow {
    /// Whether the size reaches the VT₀ size, the known or conjectured optimum.
    pub fn matches_vt0(&self) -> bool {
        self.vt0_size == Some(self.size)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error(transparent)]
    Code(#[from] Error),
    #[error("{priority} at n={n}: {source}")]
    Greedy { priority: &'static str, n: usize, source: GreedyError },
}

/// Greedy code size for every built-in and every `n` in `ns`.
pub fn size_table(priorities: &[Builtin], ns: Range<usize>, s: usize) -> core::result::Result<Vec<SizeRow>, TableError> {
    let mut rows = Vec::new();
    for n in ns {
        let g = build_graph(n, s)?;
        let vt = if s == 1 { Some(vt0(n)?) } else { None };
        for &b in priorities {
            rows.push(size_row(&g, b, vt.as_ref())?);
        }
    }
    Ok(rows)
}

pub fn size_row(g: &ConfusabilityGraph, b: Builtin, vt: Option<&Code>) -> core::result::Result<SizeRow, TableError> {
    let code = greedy_construct(g, &b).map_err(|source| TableError::Greedy { priority: b.name(), n: g.n(), source })?;
    let vt0_overlap = vt.map(|vt| overlap(&code, vt)).transpose()?;
    Ok(SizeRow { priority: b.name(), n: g.n(), s: g.s(), size: code.len(), vt0_size: vt.map(Code::len), vt0_overlap })
}

/// Sizes of `VT_0(n)` over a range, without materialising the codes.
pub fn vt0_sizes(ns: Range<usize>) -> Result<Vec<usize>> {
    ns.map(|n| Ok(vt_class_sizes(n)?[0])).collect()
}

/// Random generator for baseline trial `trial` under `seed`: the seed picks
/// the key and the trial index picks the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Histogram of greedy code sizes over uniformly random vertex orders, for
/// the trial indices in `trials`. Splitting a trial range across workers and
/// merging the histograms gives the same result as one call.
pub fn random_baseline(g: &ConfusabilityGraph, seed: u64, trials: Range<u64>) -> BTreeMap<usize, u64> {
    let mut hist = BTreeMap::new();
    let mut order: Vec<u32> = (0..g.vertex_count() as u32).collect();
    for trial in trials {
        let mut rng = trial_rng(seed, trial);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let code = greedy_by_permutation(g, &order).expect("shuffled ranks form a permutation");
        *hist.entry(code.len()).or_insert(0) += 1;
    }
    hist
}

pub fn merge_histograms(into: &mut BTreeMap<usize, u64>, other: &BTreeMap<usize, u64>) {
    for (&size, &count) in other {
        *into.entry(size).or_insert(0) += count;
    }
}
