//! Built-in priority functions.
//!
//! Each built-in reproduces a published Python priority function bit for bit,
//! so floating-point expressions are evaluated in the same order as the
//! original source: sums of float lists use numpy's pairwise summation,
//! `round(x, 10)` on a numpy scalar is `rint(x * 1e10) / 1e10`, and `**` is
//! `pow`. Transcendental functions come from `libm`, which makes the values
//! identical on every platform.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::bitseq::{reverse_weight, vt_residual, BitString};
use crate::confgraph::ConfusabilityGraph;
use crate::greedy::{Component, PriorityError, PriorityFunction, PriorityValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    Trivial,
    VtEquivalent,
    GraphBased,
    NumberTheoretic,
    SlidingWindow,
    MinDegree,
    VtIndicator,
}

impl Builtin {
    pub const ALL: [Builtin; 7] = [
        Builtin::Trivial,
        Builtin::VtEquivalent,
        Builtin::GraphBased,
        Builtin::NumberTheoretic,
        Builtin::SlidingWindow,
        Builtin::MinDegree,
        Builtin::VtIndicator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Trivial => "trivial",
            Builtin::VtEquivalent => "vt-equivalent",
            Builtin::GraphBased => "graph-based",
            Builtin::NumberTheoretic => "number-theoretic",
            Builtin::SlidingWindow => "sliding-window",
            Builtin::MinDegree => "min-degree",
            Builtin::VtIndicator => "vt-indicator",
        }
    }

    /// Whether the function reads the graph (degree or neighbors).
    pub fn uses_graph(self) -> bool {
        matches!(self, Builtin::GraphBased | Builtin::NumberTheoretic | Builtin::MinDegree)
    }

    /// Python body of the function (indented, without the `def` line). The
    /// parameters are `v, G, n, s`.
    pub fn source(self) -> &'static str {
        match self {
            Builtin::Trivial => SRC_TRIVIAL,
            Builtin::VtEquivalent => SRC_VT_EQUIVALENT,
            Builtin::GraphBased => SRC_GRAPH_BASED,
            Builtin::NumberTheoretic => SRC_NUMBER_THEORETIC,
            Builtin::SlidingWindow => SRC_SLIDING_WINDOW,
            Builtin::MinDegree => SRC_MIN_DEGREE,
            Builtin::VtIndicator => SRC_VT_INDICATOR,
        }
    }

    /// The built-in whose source matches `body`, ignoring indentation, blank
    /// lines, comments and docstring lines. A few spellings of the constant
    /// zero function are also recognised.
    pub fn from_source(body: &str) -> Option<Builtin> {
        let key = normalize_source(body);
        if ["return 0", "return 0.0", "return 0.", "return float(0)"].contains(&key.as_str()) {
            return Some(Builtin::Trivial);
        }
        Builtin::ALL.into_iter().find(|b| normalize_source(b.source()) == key)
    }

    pub fn evaluate(self, v: BitString, g: &ConfusabilityGraph) -> Result<PriorityValue, PriorityError> {
        let (n, s) = (g.n(), g.s());
        match self {
            Builtin::Trivial => Ok(prio_trivial()),
            Builtin::VtEquivalent => Ok(prio_vt_equivalent(&v, n, s)),
            Builtin::GraphBased => Ok(prio_graph_based(&v, g)),
            Builtin::NumberTheoretic => Ok(prio_number_theoretic(&v, g)),
            Builtin::SlidingWindow => prio_sliding_window(&v),
            Builtin::MinDegree => Ok(prio_min_degree(&v, g)),
            Builtin::VtIndicator => Ok(prio_vt_indicator(&v)),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown priority function {0:?}")]
pub struct UnknownBuiltin(pub alloc::string::String);

impl FromStr for Builtin {
    type Err = UnknownBuiltin;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Builtin::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| UnknownBuiltin(s.to_string()))
    }
}

impl PriorityFunction for Builtin {
    fn priority(&self, v: BitString, g: &ConfusabilityGraph) -> Result<PriorityValue, PriorityError> {
        self.evaluate(v, g)
    }
}

fn normalize_source(body: &str) -> alloc::string::String {
    let mut lines = Vec::new();
    for line in body.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t.len() >= 6 && t.starts_with("\"\"\"") && t.ends_with("\"\"\"") {
            continue;
        }
        lines.push(t);
    }
    lines.join("\n")
}

/// numpy's pairwise summation (`np.sum` on a float64 array).
pub fn numpy_sum(a: &[f64]) -> f64 {
    const BLOCK: usize = 128;
    let n = a.len();
    if n < 8 {
        let mut res = 0.0;
        for &x in a {
            res += x;
        }
        res
    } else if n <= BLOCK {
        let mut r = [0.0f64; 8];
        r.copy_from_slice(&a[..8]);
        let mut i = 8;
        while i < n - (n % 8) {
            for j in 0..8 {
                r[j] += a[i + j];
            }
            i += 8;
        }
        let mut res = ((r[0] + r[1]) + (r[2] + r[3])) + ((r[4] + r[5]) + (r[6] + r[7]));
        while i < n {
            res += a[i];
            i += 1;
        }
        res
    } else {
        let mut n2 = n / 2;
        n2 -= n2 % 8;
        numpy_sum(&a[..n2]) + numpy_sum(&a[n2..])
    }
}

/// `np.mean` and `np.var` (population variance) of a sample.
pub fn numpy_mean_var(xs: &[f64]) -> (f64, f64) {
    let count = xs.len() as f64;
    let mean = numpy_sum(xs) / count;
    let sq: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    (mean, numpy_sum(&sq) / count)
}

/// `round(x, 10)` on a numpy float64.
pub fn numpy_round10(x: f64) -> f64 {
    libm::rint(x * 1e10) / 1e10
}

pub fn prio_trivial() -> PriorityValue {
    PriorityValue::Scalar(0.0)
}

/// `⌊W(v) / (n + s)⌋`.
pub fn prio_vt_equivalent(v: &BitString, n: usize, s: usize) -> PriorityValue {
    PriorityValue::Scalar((reverse_weight(v) / (n + s) as u64) as f64)
}

/// `4·Σ_{j: v_j = 1} (j+1)(n-j)/(6s) + 5·deg(v)/n` with `j` 0-based.
pub fn prio_graph_based(v: &BitString, g: &ConfusabilityGraph) -> PriorityValue {
    let (n, s) = (g.n(), g.s());
    let position: Vec<f64> = v
        .bits()
        .enumerate()
        .filter(|&(_, b)| b == 1)
        .map(|(j, _)| ((j + 1) * (n - j)) as f64 / (6 * s) as f64)
        .collect();
    let total_position = numpy_sum(&position);
    let degree = g.degree_of(v.rank()) as f64 / n as f64;
    PriorityValue::Scalar(4.0 * total_position + 5.0 * degree)
}

/// Largest `(weight(u), u)` over the neighbors `u` of `v`, where
/// `weight(u) = popcount(Σ_i u_i (2^i - 1)) / (s + 0.5) · e^{-popcount(u)}`
/// and `i` counts from 0 at the last bit.
///
/// An isolated vertex gets `(f64::MIN, "")`, below every real pair.
pub fn prio_number_theoretic(v: &BitString, g: &ConfusabilityGraph) -> PriorityValue {
    let (n, s) = (g.n(), g.s());
    let mut best: Option<(f64, u32)> = None;
    for &u in g.neighbors_of(v.rank()) {
        let w = neighbor_weight(u, s);
        // neighbor ranks ascend, and ties on weight go to the larger string
        let better = match best {
            None => true,
            Some((bw, _)) => w >= bw,
        };
        if better {
            best = Some((w, u));
        }
    }
    match best {
        Some((w, u)) => PriorityValue::tuple(vec![
            Component::Num(w),
            Component::Text(BitString::new(n, u as u64).expect("neighbor rank fits").to_text()),
        ]),
        None => PriorityValue::tuple(vec![Component::Num(f64::MIN), Component::Text(alloc::string::String::new())]),
    }
}

fn neighbor_weight(u: u32, s: usize) -> f64 {
    let ones = u.count_ones();
    // Σ over set bits of (2^i - 1) is the value minus its popcount
    let counter = u - ones;
    let matches = counter.count_ones() as f64;
    matches / (s as f64 + 0.5) * libm::exp(-(ones as f64))
}

/// Sliding-window statistic over 1-counts of all windows `v[p..=q]` with
/// `q - p >= 2`.
pub fn prio_sliding_window(v: &BitString) -> Result<PriorityValue, PriorityError> {
    let n = v.len();
    if n < 3 {
        return Err(PriorityError(alloc::format!("sliding-window priority needs n >= 3, got {n}")));
    }
    let bits: Vec<u32> = v.bits().map(u32::from).collect();
    let mut counts = Vec::with_capacity((n - 2) * (n - 1) / 2);
    for p in 0..n - 2 {
        let mut ones = bits[p] + bits[p + 1];
        for &bit in &bits[p + 2..] {
            ones += bit;
            counts.push(ones as f64);
        }
    }
    let (mean, var) = numpy_mean_var(&counts);
    let deviation = libm::pow(var, 0.65);
    let value = -(mean / 3.0 + 0.3) * (libm::pow(deviation, 0.65) * 0.7) + 0.8 + 1.0 / (n as f64 * 2.5);
    Ok(PriorityValue::Scalar(numpy_round10(value)))
}

pub fn prio_min_degree(v: &BitString, g: &ConfusabilityGraph) -> PriorityValue {
    PriorityValue::Scalar(-(g.degree_of(v.rank()) as f64))
}

/// Top for members of `VT_0(n)`, zero otherwise.
pub fn prio_vt_indicator(v: &BitString) -> PriorityValue {
    if vt_residual(v) == 0 {
        PriorityValue::TOP
    } else {
        PriorityValue::Scalar(0.0)
    }
}

const SRC_TRIVIAL: &str = "    return 0.0\n";

const SRC_VT_EQUIVALENT: &str = r#"    v = ''.join(['-' * (ord(a) > 125) + a for a in list(v)])
    onepositions = [c for c, d in reversed(list(enumerate(v, start=-len(v)))) if d == '1']
    negonesum = sum([-c for c in onepositions])
    finalans = (negonesum // ((n + s) * 1))
    return finalans
"#;

const SRC_GRAPH_BASED: &str = r#"    position = [(j + 1) * (n - j) / (6 * s) for j, value in enumerate(v) if int(value) == 1]
    total_position = np.sum(position)
    degree = G.degree(v) / float(n)
    return 4 * total_position + 5 * degree
"#;

const SRC_NUMBER_THEORETIC: &str = r#"    def _find_matches(vertex, n, s):
        counter = 0
        counter = sum([int(c) * (2**i - 1) for i, c in enumerate(reversed(list(vertex)))])
        return (bin(counter)).count("1")
    def _count_ones(vertex):
        counter=0
        counter=sum([int(_)for _ in list(vertex)])
        return counter
    weights=[(_find_matches(vertex_, n, s)/(s+0.5)*np.exp(-(_count_ones(vertex_))),vertex_) for vertex_ in G[v]]
    return sorted(weights)[-1]
"#;

const SRC_SLIDING_WINDOW: &str = r#"    lst=[]
    for p in range ((n-2)) :
        for q in range (((p+2)),(n))   :
            string=""
            for r in range (p,q+1) :
                string+=v[r]
            lst.append(string)
    clist=[*map(lambda w:(w).count('1'),lst)]
    averageofobservations=(np.mean(clist));
    deviationfromaverage=(np.var(clist)**.65);
    priortiyvalue= -(averageofobservations/3+.3)*(deviationfromaverage**.65*(.7))+ (.8)+(1/(len(v)*2.5 ));
    return round(priortiyvalue,10)
"#;

const SRC_MIN_DEGREE: &str = "    return -G.degree(v)\n";

const SRC_VT_INDICATOR: &str =
    "    return float('inf') if sum((i + 1) * int(b) for i, b in enumerate(v)) % (n + 1) == 0 else 0.0\n";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confgraph::build_graph;
    use crate::greedy::greedy_construct;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn names_round_trip() {
        for b in Builtin::ALL {
            assert_eq!(b.name().parse::<Builtin>().unwrap(), b);
            assert!(!b.source().is_empty());
            assert!(b.source().lines().all(|l| l.starts_with("    ")), "{b}");
        }
        assert!("nope".parse::<Builtin>().is_err());
    }

    #[test]
    fn recognises_sources() {
        for b in Builtin::ALL {
            assert_eq!(Builtin::from_source(b.source()), Some(b));
        }
        assert_eq!(Builtin::from_source("  # zero\n    return 0\n"), Some(Builtin::Trivial));
        let documented = "    \"\"\"Same as before.\"\"\"\n\n        return -G.degree(v)\n";
        assert_eq!(Builtin::from_source(documented), Some(Builtin::MinDegree));
        assert_eq!(Builtin::from_source("    return 1.0\n"), None);
    }

    #[test]
    fn pointwise_values() {
        let g = build_graph(3, 1).unwrap();
        assert_eq!(prio_vt_equivalent(&bs("101"), 3, 1), PriorityValue::Scalar(1.0));
        assert_eq!(prio_min_degree(&bs("000"), &g), PriorityValue::Scalar(-3.0));
        assert!(prio_vt_indicator(&bs("101")).is_top());
        assert_eq!(prio_vt_indicator(&bs("011")), PriorityValue::Scalar(0.0));
        // no 1-bits: only the degree term survives
        let g6 = build_graph(6, 2).unwrap();
        let zero = BitString::new(6, 0).unwrap();
        assert_eq!(prio_graph_based(&zero, &g6), PriorityValue::Scalar(5.0 * g6.degree_of(0) as f64 / 6.0));
        assert!(prio_sliding_window(&bs("10")).is_err());
    }

    #[test]
    fn min_degree_picks_000_first() {
        let g = build_graph(3, 1).unwrap();
        let code = greedy_construct(&g, &Builtin::MinDegree).unwrap();
        assert_eq!(code.codewords()[0], bs("000"));
    }

    #[test]
    fn isolated_vertex_fallback() {
        // (n, s) = (2, 1): every pair of length-2 strings shares a bit, so no vertex is isolated
        let g = build_graph(2, 1).unwrap();
        for r in 0..4 {
            assert!(g.degree_of(r) > 0);
        }
        // n = 1 has no valid s, so exercise the fallback through an empty neighbor list
        let isolated = ConfusabilityGraph::from_edge_list_text("3 1\n0 1\n").unwrap();
        match prio_number_theoretic(&bs("111"), &isolated) {
            PriorityValue::Tuple(c) => assert_eq!(c, vec![Component::Num(f64::MIN), Component::Text("".into())]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn numpy_sum_small_and_blocked() {
        assert_eq!(numpy_sum(&[]), 0.0);
        assert_eq!(numpy_sum(&[1.0, 2.0, 3.0]), 6.0);
        let xs: Vec<f64> = (0..300).map(|i| i as f64 * 0.5).collect();
        assert_eq!(numpy_sum(&xs), 22425.0);
        let (m, v) = numpy_mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!((m, v), (2.5, 1.25));
    }
}
