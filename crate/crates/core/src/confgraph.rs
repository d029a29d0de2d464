//! The confusability graph on all strings of length `n`: two strings are
//! adjacent iff they share a subsequence of length at least `n - s`.
//!
//! Vertices are identified by lexicographic rank. Adjacency is kept in CSR
//! form with sorted neighbor lists.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::bitseq::{ball_values_into, lcs_at_least, BitString, MAX_LEN};
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 4] = b"DCCG";
pub const GRAPH_VERSION: u16 = 1;

#[derive(Clone, PartialEq, Eq)]
pub struct ConfusabilityGraph {
    n: usize,
    s: usize,
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
}

impl core::fmt::Debug for ConfusabilityGraph {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ConfusabilityGraph")
            .field("n", &self.n)
            .field("s", &self.s)
            .field("vertices", &self.vertex_count())
            .field("edges", &self.edge_count())
            .finish()
    }
}

fn check_params(n: usize, s: usize) -> Result<()> {
    if n == 0 || n > MAX_LEN {
        return Err(Error::Capacity { n, max: MAX_LEN });
    }
    if s == 0 || s >= n {
        return Err(Error::DeletionCount { n, s });
    }
    Ok(())
}

/// Builds the graph by bucketing: every length-`(n - s)` subsequence collects
/// the vertices whose deletion ball contains it, and vertices sharing a bucket
/// are adjacent.
pub fn build_graph(n: usize, s: usize) -> Result<ConfusabilityGraph> {
    check_params(n, s)?;
    let vertex_count = 1usize << n;
    let bucket_count = 1usize << (n - s);

    // vertex -> ball members, CSR
    let mut ball_offsets = Vec::with_capacity(vertex_count + 1);
    let mut ball_members: Vec<u32> = Vec::new();
    let mut scratch = Vec::new();
    ball_offsets.push(0u32);
    for value in 0..vertex_count as u32 {
        ball_values_into(BitString::from_parts(n, value), s, &mut scratch);
        ball_members.extend_from_slice(&scratch);
        ball_offsets.push(ball_members.len() as u32);
    }

    // subsequence -> vertices, CSR via counting sort
    let mut bucket_offsets = vec![0u32; bucket_count + 1];
    for &m in &ball_members {
        bucket_offsets[m as usize + 1] += 1;
    }
    for i in 0..bucket_count {
        bucket_offsets[i + 1] += bucket_offsets[i];
    }
    let mut fill = bucket_offsets.clone();
    let mut bucket_vertices = vec![0u32; ball_members.len()];
    for v in 0..vertex_count {
        for &m in &ball_members[ball_offsets[v] as usize..ball_offsets[v + 1] as usize] {
            bucket_vertices[fill[m as usize] as usize] = v as u32;
            fill[m as usize] += 1;
        }
    }

    let mut offsets = Vec::with_capacity(vertex_count + 1);
    let mut neighbors = Vec::new();
    let mut adj = Vec::new();
    offsets.push(0u32);
    for v in 0..vertex_count {
        adj.clear();
        for &m in &ball_members[ball_offsets[v] as usize..ball_offsets[v + 1] as usize] {
            let bucket = &bucket_vertices[bucket_offsets[m as usize] as usize..bucket_offsets[m as usize + 1] as usize];
            adj.extend(bucket.iter().copied().filter(|&u| u as usize != v));
        }
        adj.sort_unstable();
        adj.dedup();
        neighbors.extend_from_slice(&adj);
        offsets.push(u32::try_from(neighbors.len()).map_err(|_| Error::Domain("graph exceeds 32-bit adjacency offsets"))?);
    }
    Ok(ConfusabilityGraph { n, s, offsets, neighbors })
}

/// Reference construction by pairwise LCS over all vertex pairs. Quadratic in
/// the vertex count; intended for cross-checking [`build_graph`].
pub fn build_graph_pairwise(n: usize, s: usize) -> Result<ConfusabilityGraph> {
    check_params(n, s)?;
    let vertex_count = 1usize << n;
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); vertex_count];
    for a in 0..vertex_count {
        let va = BitString::from_parts(n, a as u32);
        for b in a + 1..vertex_count {
            let vb = BitString::from_parts(n, b as u32);
            if lcs_at_least(&va, &vb, n - s) {
                lists[a].push(b as u32);
                lists[b].push(a as u32);
            }
        }
    }
    let mut offsets = Vec::with_capacity(vertex_count + 1);
    let mut neighbors = Vec::new();
    offsets.push(0u32);
    for list in lists {
        neighbors.extend(list);
        offsets.push(neighbors.len() as u32);
    }
    Ok(ConfusabilityGraph { n, s, offsets, neighbors })
}

impl ConfusabilityGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn vertex(&self, rank: usize) -> BitString {
        assert!(rank < self.vertex_count());
        BitString::from_parts(self.n, rank as u32)
    }

    /// Neighbor ranks of the vertex with the given rank, ascending.
    #[inline]
    pub fn neighbors_of(&self, rank: usize) -> &[u32] {
        &self.neighbors[self.offsets[rank] as usize..self.offsets[rank + 1] as usize]
    }

    #[inline]
    pub fn degree_of(&self, rank: usize) -> usize {
        (self.offsets[rank + 1] - self.offsets[rank]) as usize
    }

    pub fn neighbors(&self, v: &BitString) -> Result<&[u32]> {
        self.check_vertex(v)?;
        Ok(self.neighbors_of(v.rank()))
    }

    pub fn degree(&self, v: &BitString) -> Result<usize> {
        self.check_vertex(v)?;
        Ok(self.degree_of(v.rank()))
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors_of(a).binary_search(&(b as u32)).is_ok()
    }

    fn check_vertex(&self, v: &BitString) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::LengthMismatch { left: self.n, right: v.len() });
        }
        Ok(())
    }

    /// Edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.vertex_count()).flat_map(move |a| {
            self.neighbors_of(a).iter().copied().filter(move |&b| b as usize > a).map(move |b| (a as u32, b))
        })
    }

    /// Binary graph file: magic `DCCG`, version, `n`, `s` (u16 each),
    /// vertex count (u64), `vertex_count + 1` offsets (u64), neighbor ranks
    /// (u64). All little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 6 + 8 + 8 * (self.offsets.len() + self.neighbors.len()));
        out.extend_from_slice(GRAPH_MAGIC);
        out.extend_from_slice(&GRAPH_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u16).to_le_bytes());
        out.extend_from_slice(&(self.s as u16).to_le_bytes());
        out.extend_from_slice(&(self.vertex_count() as u64).to_le_bytes());
        for &o in &self.offsets {
            out.extend_from_slice(&(o as u64).to_le_bytes());
        }
        for &v in &self.neighbors {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != GRAPH_MAGIC {
            return Err(Error::Format("bad magic"));
        }
        if cur.u16()? != GRAPH_VERSION {
            return Err(Error::Format("unsupported version"));
        }
        let n = cur.u16()? as usize;
        let s = cur.u16()? as usize;
        check_params(n, s)?;
        let vertex_count = cur.u64()?;
        if vertex_count != 1u64 << n {
            return Err(Error::Format("vertex count does not match n"));
        }
        let mut offsets = Vec::with_capacity(vertex_count as usize + 1);
        for _ in 0..=vertex_count {
            offsets.push(u32::try_from(cur.u64()?).map_err(|_| Error::Format("offset too large"))?);
        }
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("offsets not monotone"));
        }
        let total = *offsets.last().unwrap() as usize;
        if cur.remaining() != total * 8 {
            return Err(Error::Format("neighbor section length mismatch"));
        }
        let mut neighbors = Vec::with_capacity(total);
        for _ in 0..total {
            let v = cur.u64()?;
            if v >= vertex_count {
                return Err(Error::Format("neighbor rank out of range"));
            }
            neighbors.push(v as u32);
        }
        Ok(Self { n, s, offsets, neighbors })
    }

    /// Debug text form: `n s` then one `a b` line per edge with `a < b`, sorted.
    pub fn to_edge_list_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.s);
        for (a, b) in self.edges() {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    pub fn from_edge_list_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::Format("missing header"))?;
        let (n, s) = parse_pair(header)?;
        check_params(n, s)?;
        let vertex_count = 1usize << n;
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); vertex_count];
        for line in lines {
            let (a, b) = parse_pair(line)?;
            if a >= b || b >= vertex_count {
                return Err(Error::Format("edge ranks out of order or range"));
            }
            lists[a].push(b as u32);
            lists[b].push(a as u32);
        }
        let mut offsets = Vec::with_capacity(vertex_count + 1);
        let mut neighbors = Vec::new();
        offsets.push(0u32);
        for mut list in lists {
            list.sort_unstable();
            list.dedup();
            neighbors.extend(list);
            offsets.push(neighbors.len() as u32);
        }
        Ok(Self { n, s, offsets, neighbors })
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(|t| t.parse::<usize>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(Error::Format("expected two integers per line")),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.bytes.len()).ok_or(Error::Format("truncated"))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
