//! Greedy code construction over static priorities.
//!
//! Priorities are computed once for every vertex against the unmodified
//! graph. Vertices are then visited by descending priority, ties broken by
//! ascending lexicographic order, and each vertex that has not been removed is
//! added to the code together with the removal of its closed neighborhood.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::{self, Write as _};
use core::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};

use crate::bitseq::{ball_values_into, lcs_at_least, BitString};
use crate::confgraph::ConfusabilityGraph;
use crate::error::Error;

/// One entry of a tuple-valued priority.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Num(f64),
    Text(String),
}

/// Value returned by a priority function.
///
/// A single numeric value is always represented as [`PriorityValue::Scalar`];
/// `Scalar(+∞)` is the distinguished top value.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorityValue {
    Scalar(f64),
    Tuple(Vec<Component>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Num,
    Text,
}

impl PriorityValue {
    pub const TOP: PriorityValue = PriorityValue::Scalar(f64::INFINITY);

    /// Builds a tuple priority; an arity-1 numeric tuple collapses to a scalar.
    pub fn tuple(components: Vec<Component>) -> Self {
        match components.as_slice() {
            [Component::Num(x)] => PriorityValue::Scalar(*x),
            _ => PriorityValue::Tuple(components),
        }
    }

    pub fn is_top(&self) -> bool {
        matches!(self, PriorityValue::Scalar(x) if *x == f64::INFINITY)
    }

    /// Arity of the value.
    pub fn arity(&self) -> usize {
        match self {
            PriorityValue::Scalar(_) => 1,
            PriorityValue::Tuple(c) => c.len(),
        }
    }

    fn is_valid(&self) -> bool {
        match self {
            PriorityValue::Scalar(x) => !x.is_nan() && *x != f64::NEG_INFINITY,
            PriorityValue::Tuple(c) => {
                !c.is_empty() && c.iter().all(|c| !matches!(c, Component::Num(x) if !x.is_finite()))
            }
        }
    }

    fn same_shape(&self, other: &PriorityValue) -> bool {
        fn kind(c: &Component) -> Kind {
            match c {
                Component::Num(_) => Kind::Num,
                Component::Text(_) => Kind::Text,
            }
        }
        match (self, other) {
            (PriorityValue::Scalar(_), PriorityValue::Scalar(_)) => true,
            (PriorityValue::Tuple(a), PriorityValue::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| kind(x) == kind(y))
            }
            _ => false,
        }
    }

    /// Order between two values, or `None` when they are not comparable
    /// (different arity or component kinds, or NaN).
    pub fn try_cmp(&self, other: &PriorityValue) -> Option<Ordering> {
        if !self.same_shape(other) {
            return None;
        }
        match (self, other) {
            (PriorityValue::Scalar(a), PriorityValue::Scalar(b)) => a.partial_cmp(b),
            (PriorityValue::Tuple(a), PriorityValue::Tuple(b)) => {
                for (x, y) in a.iter().zip(b) {
                    let ord = match (x, y) {
                        (Component::Num(p), Component::Num(q)) => p.partial_cmp(q)?,
                        (Component::Text(p), Component::Text(q)) => p.cmp(q),
                        _ => return None,
                    };
                    if ord != Ordering::Equal {
                        return Some(ord);
                    }
                }
                Some(Ordering::Equal)
            }
            _ => None,
        }
    }

    /// Canonical text form: numbers with 9 significant digits, text quoted,
    /// tuple components comma-separated in parentheses.
    pub fn write_canonical<W: fmt::Write>(&self, out: &mut W) -> fmt::Result {
        match self {
            PriorityValue::Scalar(x) => write_num(out, *x),
            PriorityValue::Tuple(c) => {
                out.write_char('(')?;
                for (i, comp) in c.iter().enumerate() {
                    if i > 0 {
                        out.write_char(',')?;
                    }
                    match comp {
                        Component::Num(x) => write_num(out, *x)?,
                        Component::Text(t) => write!(out, "{t:?}")?,
                    }
                }
                out.write_char(')')
            }
        }
    }

    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = self.write_canonical(&mut s);
        s
    }
}

fn write_num<W: fmt::Write>(out: &mut W, x: f64) -> fmt::Result {
    if x == f64::INFINITY {
        out.write_str("inf")
    } else if x == f64::NEG_INFINITY {
        out.write_str("-inf")
    } else if x == 0.0 {
        // folds -0.0
        out.write_str("0.00000000e0")
    } else {
        write!(out, "{x:.8e}")
    }
}

impl From<f64> for PriorityValue {
    fn from(x: f64) -> Self {
        PriorityValue::Scalar(x)
    }
}

/// Error raised while computing a priority for one vertex.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct PriorityError(pub String);

/// A priority function `f(v, G)`; `n` and `s` are read from the graph.
pub trait PriorityFunction {
    fn priority(&self, v: BitString, g: &ConfusabilityGraph) -> Result<PriorityValue, PriorityError>;
}

impl<F> PriorityFunction for F
where
    F: Fn(BitString, &ConfusabilityGraph) -> Result<PriorityValue, PriorityError>,
{
    fn priority(&self, v: BitString, g: &ConfusabilityGraph) -> Result<PriorityValue, PriorityError> {
        self(v, g)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GreedyError {
    #[error("priority evaluation failed at {vertex}: {reason}")]
    Evaluation { vertex: BitString, reason: String },
    #[error("priority of {0} is NaN or infinite")]
    NonFinite(BitString),
    #[error("priorities of {0} and {1} are not comparable")]
    Incomparable(BitString, BitString),
    #[error("expected {expected} priorities, got {got}")]
    Count { expected: usize, got: usize },
    #[error("evaluation cancelled")]
    Cancelled,
}

/// A set of codewords of common length `n`, kept in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Code {
    n: usize,
    s: usize,
    codewords: Vec<BitString>,
}

impl Code {
    pub fn new(n: usize, s: usize, codewords: Vec<BitString>) -> Result<Self, Error> {
        if let Some(bad) = codewords.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch { left: n, right: bad.len() });
        }
        let mut sorted = codewords.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("duplicate codeword"));
        }
        Ok(Self { n, s, codewords })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Codewords in the order they were added.
    pub fn codewords(&self) -> &[BitString] {
        &self.codewords
    }

    /// Codewords in ascending lexicographic order.
    pub fn sorted(&self) -> Vec<BitString> {
        let mut v = self.codewords.clone();
        v.sort_unstable();
        v
    }

    pub fn same_set(&self, other: &Code) -> bool {
        self.n == other.n && self.sorted() == other.sorted()
    }

    /// Whether every vertex outside the code has a neighbor inside it.
    pub fn is_maximal_in(&self, g: &ConfusabilityGraph) -> bool {
        let mut covered = vec![false; g.vertex_count()];
        for c in &self.codewords {
            covered[c.rank()] = true;
            for &u in g.neighbors_of(c.rank()) {
                covered[u as usize] = true;
            }
        }
        covered.into_iter().all(|c| c)
    }

    /// Code file text: `n s size`, then one codeword per line in insertion order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.n, self.s, self.codewords.len());
        for c in &self.codewords {
            let _ = writeln!(out, "{c}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, Error> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or(Error::Format("missing code header"))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::Format("bad code header")))
            .collect::<Result<_, _>>()?;
        let [n, s, size] = nums[..] else {
            return Err(Error::Format("code header must be `n s size`"));
        };
        let codewords = lines.map(|l| l.parse::<BitString>()).collect::<Result<Vec<_>, _>>()?;
        if codewords.len() != size {
            return Err(Error::Format("codeword count does not match header"));
        }
        Code::new(n, s, codewords)
    }
}

/// Evaluates `f` on every vertex of `g`, in rank order.
pub fn compute_priorities<F: PriorityFunction + ?Sized>(
    g: &ConfusabilityGraph,
    f: &F,
    cancel: Option<&AtomicBool>,
) -> Result<Vec<PriorityValue>, GreedyError> {
    let mut out = Vec::with_capacity(g.vertex_count());
    for rank in 0..g.vertex_count() {
        if rank % 256 == 0 && cancel.is_some_and(|c| c.load(AtomicOrdering::Relaxed)) {
            return Err(GreedyError::Cancelled);
        }
        let v = g.vertex(rank);
        let p = f.priority(v, g).map_err(|e| GreedyError::Evaluation { vertex: v, reason: e.0 })?;
        out.push(p);
    }
    Ok(out)
}

/// Visiting order: descending priority, ascending rank on ties.
pub fn priority_order(g: &ConfusabilityGraph, priorities: &[PriorityValue]) -> Result<Vec<u32>, GreedyError> {
    let count = g.vertex_count();
    if priorities.len() != count {
        return Err(GreedyError::Count { expected: count, got: priorities.len() });
    }
    let first = &priorities[0];
    for (rank, p) in priorities.iter().enumerate() {
        if !p.is_valid() {
            return Err(GreedyError::NonFinite(g.vertex(rank)));
        }
        if !p.same_shape(first) {
            return Err(GreedyError::Incomparable(g.vertex(0), g.vertex(rank)));
        }
    }
    let mut order: Vec<u32> = (0..count as u32).collect();
    // shapes and finiteness are validated, so try_cmp is total here
    order.sort_by(|&a, &b| {
        priorities[b as usize]
            .try_cmp(&priorities[a as usize])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(order)
}

fn scan(g: &ConfusabilityGraph, order: &[u32]) -> Code {
    let mut removed = vec![false; g.vertex_count()];
    let mut codewords = Vec::new();
    for &v in order {
        let v = v as usize;
        if removed[v] {
            continue;
        }
        removed[v] = true;
        codewords.push(g.vertex(v));
        for &u in g.neighbors_of(v) {
            removed[u as usize] = true;
        }
    }
    Code { n: g.n(), s: g.s(), codewords }
}

/// Greedy construction from precomputed priorities (one per vertex, rank order).
pub fn greedy_from_priorities(g: &ConfusabilityGraph, priorities: &[PriorityValue]) -> Result<Code, GreedyError> {
    let order = priority_order(g, priorities)?;
    Ok(scan(g, &order))
}

pub fn greedy_construct<F: PriorityFunction + ?Sized>(g: &ConfusabilityGraph, f: &F) -> Result<Code, GreedyError> {
    let priorities = compute_priorities(g, f, None)?;
    greedy_from_priorities(g, &priorities)
}

/// Greedy scan in an explicit vertex order (a permutation of all ranks).
pub fn greedy_by_permutation(g: &ConfusabilityGraph, order: &[u32]) -> Result<Code, Error> {
    let count = g.vertex_count();
    if order.len() != count {
        return Err(Error::NotAPermutation(count));
    }
    let mut seen = vec![false; count];
    for &v in order {
        let slot = seen.get_mut(v as usize).ok_or(Error::NotAPermutation(count))?;
        if *slot {
            return Err(Error::NotAPermutation(count));
        }
        *slot = true;
    }
    Ok(scan(g, order))
}

/// Whether the deletion balls of all codewords are pairwise disjoint.
///
/// Independent of any graph: collects every ball member tagged by its owner
/// and looks for a member claimed by two codewords.
pub fn is_deletion_correcting(code: &Code) -> bool {
    let s = code.s;
    if code.codewords.len() < 2 {
        return true;
    }
    if s == 0 || s >= code.n {
        return false;
    }
    let mut tagged: Vec<(u32, u32)> = Vec::new();
    let mut scratch = Vec::new();
    for (owner, c) in code.codewords.iter().enumerate() {
        ball_values_into(*c, s, &mut scratch);
        tagged.extend(scratch.iter().map(|&m| (m, owner as u32)));
    }
    tagged.sort_unstable();
    tagged.windows(2).all(|w| w[0].0 != w[1].0)
}

/// Pairwise LCS variant of [`is_deletion_correcting`].
pub fn is_deletion_correcting_pairwise(code: &Code) -> bool {
    let threshold = code.n - code.s;
    let words = &code.codewords;
    (0..words.len()).all(|i| (i + 1..words.len()).all(|j| !lcs_at_least(&words[i], &words[j], threshold)))
}
