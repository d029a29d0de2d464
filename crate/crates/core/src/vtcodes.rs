//! Varshamov–Tenengolts codes and the checks tying them to the greedy
//! construction.

use alloc::vec::Vec;

use crate::bitseq::{enumerate_strings, reverse_weight, vt_residual, BitString};
use crate::confgraph::ConfusabilityGraph;
use crate::error::{Error, Result};
use crate::greedy::{is_deletion_correcting, Code};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VtParams {
    n: usize,
    a: usize,
}

impl VtParams {
    pub fn new(n: usize, a: usize) -> Result<Self> {
        if a > n {
            return Err(Error::Residue { a, n });
        }
        Ok(Self { n, a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> usize {
        self.a
    }
}

/// `VT_a(n)`: all strings with `Σ i·v_i ≡ a (mod n+1)`, ascending, as an `s = 1` code.
pub fn vt_code(p: VtParams) -> Result<Code> {
    let words = enumerate_strings(p.n)?.into_iter().filter(|v| vt_residual(v) == p.a).collect();
    Code::new(p.n, 1, words)
}

/// Sizes of `VT_a(n)` for `a = 0..=n`.
pub fn vt_class_sizes(n: usize) -> Result<Vec<usize>> {
    let mut sizes = alloc::vec![0usize; n + 1];
    for v in enumerate_strings(n)? {
        sizes[vt_residual(&v)] += 1;
    }
    Ok(sizes)
}

/// The `n + 1` VT classes are disjoint, cover `{0,1}^n`, and each corrects one deletion.
pub fn vt_partition_check(n: usize) -> Result<bool> {
    let classes = (0..=n).map(|a| vt_code(VtParams::new(n, a)?)).collect::<Result<Vec<_>>>()?;
    let mut seen = alloc::vec![0u8; 1usize << n];
    for class in &classes {
        for c in class.codewords() {
            seen[c.rank()] += 1;
        }
    }
    if seen.iter().any(|&k| k != 1) {
        return Ok(false);
    }
    Ok(classes.iter().all(is_deletion_correcting))
}

/// Number of adjacent pairs in an `s = 1` graph whose reverse weights differ by
/// 0 or by more than `n`.
pub fn property1_violations(g: &ConfusabilityGraph) -> usize {
    let n = g.n() as u64;
    g.edges()
        .filter(|&(a, b)| {
            let wa = reverse_weight(&g.vertex(a as usize));
            let wb = reverse_weight(&g.vertex(b as usize));
            let d = wa.abs_diff(wb);
            !(1..=n).contains(&d)
        })
        .count()
}

/// `1 <= |W(u) - W(w)| <= n` over every edge of the single-deletion graph.
pub fn property1_check(g: &ConfusabilityGraph) -> Result<bool> {
    if g.s() != 1 {
        return Err(Error::Domain("property 1 is stated for single-deletion graphs"));
    }
    Ok(property1_violations(g) == 0)
}

/// Every vertex outside the code has a neighbor in it.
pub fn maximality_check(c: &Code, g: &ConfusabilityGraph) -> Result<bool> {
    if c.n() != g.n() {
        return Err(Error::LengthMismatch { left: g.n(), right: c.n() });
    }
    Ok(c.is_maximal_in(g))
}

/// Quotient and remainder of the reverse weight by `n + 1`.
pub fn weight_decomposition(v: &BitString) -> (u64, u64) {
    let m = v.len() as u64 + 1;
    let w = reverse_weight(v);
    (w / m, w % m)
}
