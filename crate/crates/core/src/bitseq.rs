//! Fixed-length binary strings and the subsequence machinery built on them.
//!
//! A [`BitString`] of length `n` stores its bits packed MSB-first, so the
//! lexicographic order with `0 < 1` coincides with the integer order of the
//! packed value. That value doubles as the vertex rank everywhere else in the
//! crate.
//!
//! Formulas in this module use 1-based positions `i = 1..=n`, counted from the
//! leftmost bit; the accessor [`BitString::bit`] is 0-based.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported code length. `2^26` vertices is far past desk scale.
pub const MAX_LEN: usize = 26;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    // field order matters for the derived `Ord`: length first, then value
    len: u8,
    value: u32,
}

impl BitString {
    /// Builds the string of length `n` whose MSB-first reading is `value`.
    pub fn new(n: usize, value: u64) -> Result<Self> {
        check_len(n)?;
        if value >> n != 0 {
            return Err(Error::Overflow { value, n });
        }
        Ok(Self { len: n as u8, value: value as u32 })
    }

    /// Unchecked constructor for internal loops where `n` and `value` are known good.
    #[inline]
    pub(crate) fn from_parts(n: usize, value: u32) -> Self {
        debug_assert!(n <= MAX_LEN && (value as u64) >> n == 0);
        Self { len: n as u8, value }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        check_len(bits.len())?;
        let mut value = 0u32;
        for &b in bits {
            if b > 1 {
                return Err(Error::Parse(bits.iter().map(|b| (b'0' + b) as char).collect()));
            }
            value = (value << 1) | b as u32;
        }
        Ok(Self::from_parts(bits.len(), value))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Lexicographic rank among strings of the same length (the packed value).
    #[inline]
    pub fn rank(&self) -> usize {
        self.value as usize
    }

    #[inline]
    pub fn value(&self) -> u32 {
        self.value
    }

    /// Bit at 0-based position `idx` from the left.
    #[inline]
    pub fn bit(&self, idx: usize) -> u8 {
        assert!(idx < self.len(), "bit index {idx} out of range for length {}", self.len);
        ((self.value >> (self.len() - 1 - idx)) & 1) as u8
    }

    pub fn bits(&self) -> impl DoubleEndedIterator<Item = u8> + ExactSizeIterator + '_ {
        (0..self.len()).map(move |i| self.bit(i))
    }

    #[inline]
    pub fn popcount(&self) -> u32 {
        self.value.count_ones()
    }

    /// Number of maximal runs of equal bits.
    pub fn runs(&self) -> usize {
        if self.len == 0 {
            return 0;
        }
        let n = self.len();
        let changes = (self.value ^ (self.value >> 1)) & ((1u32 << (n - 1)) - 1);
        changes.count_ones() as usize + 1
    }

    /// Removes the bit at 0-based position `idx`, keeping the order of the rest.
    #[inline]
    pub fn delete_at(&self, idx: usize) -> BitString {
        let n = self.len();
        debug_assert!(idx < n);
        let low_width = n - 1 - idx;
        let low = self.value & ((1u32 << low_width) - 1);
        let high = (self.value >> (low_width + 1)) << low_width;
        BitString::from_parts(n - 1, high | low)
    }

    /// VT checksum `Σ_{i=1..n} i·v_i` (positions counted from the left).
    pub fn vt_sum(&self) -> u64 {
        let n = self.len();
        let mut sum = 0u64;
        let mut rest = self.value;
        while rest != 0 {
            let tz = rest.trailing_zeros() as usize;
            // bit at shift tz sits at 1-based position n - tz
            sum += (n - tz) as u64;
            rest &= rest - 1;
        }
        sum
    }

    pub fn to_text(&self) -> String {
        self.bits().map(|b| (b'0' + b) as char).collect()
    }
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 || n > MAX_LEN {
        return Err(Error::Capacity { n, max: MAX_LEN });
    }
    Ok(())
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.len();
        if n == 0 || n > MAX_LEN {
            return Err(Error::Capacity { n, max: MAX_LEN });
        }
        let mut value = 0u32;
        for c in s.bytes() {
            let b = match c {
                b'0' => 0,
                b'1' => 1,
                _ => return Err(Error::Parse(s.into())),
            };
            value = (value << 1) | b;
        }
        Ok(Self::from_parts(n, value))
    }
}

impl serde::Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let text = <String as serde::Deserialize>::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// All `2^n` strings of length `n` in ascending lexicographic order.
pub fn enumerate_strings(n: usize) -> Result<Vec<BitString>> {
    check_len(n)?;
    Ok((0..1u32 << n).map(|v| BitString::from_parts(n, v)).collect())
}

/// The distinct length-`(n - s)` subsequences of a string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeletionBall {
    origin: BitString,
    s: usize,
    /// sorted ascending, deduplicated
    members: Vec<BitString>,
}

impl DeletionBall {
    pub fn origin(&self) -> BitString {
        self.origin
    }

    pub fn deletions(&self) -> usize {
        self.s
    }

    pub fn members(&self) -> &[BitString] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, w: &BitString) -> bool {
        self.members.binary_search(w).is_ok()
    }

    /// Whether the two balls share a member (sorted merge).
    pub fn intersects(&self, other: &DeletionBall) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

/// Deletion ball of `v` for `s` deletions.
pub fn deletion_ball(v: BitString, s: usize) -> Result<DeletionBall> {
    let n = v.len();
    if s == 0 || s >= n {
        return Err(Error::DeletionCount { n, s });
    }
    let mut members = Vec::new();
    ball_values_into(v, s, &mut members);
    Ok(DeletionBall {
        origin: v,
        s,
        members: members.into_iter().map(|x| BitString::from_parts(n - s, x)).collect(),
    })
}

/// Packed values of the deletion ball, sorted and deduplicated, written into `out`.
///
/// Deleting any bit of a run gives the same string, so each level only deletes
/// the first bit of every run.
pub(crate) fn ball_values_into(v: BitString, s: usize, out: &mut Vec<u32>) {
    out.clear();
    out.push(v.value);
    let mut len = v.len();
    let mut next = Vec::new();
    for _ in 0..s {
        next.clear();
        for &x in out.iter() {
            let w = BitString::from_parts(len, x);
            let mut prev = 2u8;
            for idx in 0..len {
                let b = w.bit(idx);
                if b != prev {
                    next.push(w.delete_at(idx).value);
                    prev = b;
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        core::mem::swap(out, &mut next);
        len -= 1;
    }
}

/// Whether `LCS(a, b) >= threshold`, via the two-row DP with early exit.
pub fn lcs_at_least(a: &BitString, b: &BitString, threshold: usize) -> bool {
    if threshold == 0 {
        return true;
    }
    let (na, nb) = (a.len(), b.len());
    if threshold > na.min(nb) {
        return false;
    }
    let mut prev = [0u8; MAX_LEN + 1];
    let mut cur = [0u8; MAX_LEN + 1];
    for i in 1..=na {
        let ai = a.bit(i - 1);
        for j in 1..=nb {
            cur[j] = if ai == b.bit(j - 1) { prev[j - 1] + 1 } else { prev[j].max(cur[j - 1]) };
            if cur[j] as usize >= threshold {
                return true;
            }
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    false
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &BitString, b: &BitString) -> usize {
    let nb = b.len();
    let mut prev = [0u8; MAX_LEN + 1];
    let mut cur = [0u8; MAX_LEN + 1];
    for i in 1..=a.len() {
        let ai = a.bit(i - 1);
        for j in 1..=nb {
            cur[j] = if ai == b.bit(j - 1) { prev[j - 1] + 1 } else { prev[j].max(cur[j - 1]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[nb] as usize
}

/// Whether `a` and `b` share a common subsequence of length at least `n - s`.
pub fn shares_subsequence(a: &BitString, b: &BitString, s: usize) -> Result<bool> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::LengthMismatch { left: n, right: b.len() });
    }
    if s == 0 || s >= n {
        return Err(Error::DeletionCount { n, s });
    }
    Ok(lcs_at_least(a, b, n - s))
}

/// `(Σ i·v_i) mod (n + 1)`, in `0..=n`.
pub fn vt_residual(v: &BitString) -> usize {
    (v.vt_sum() % (v.len() as u64 + 1)) as usize
}

/// Reverse-position weight `W(v) = Σ_{i=1..n} (n - i + 1)·v_i`.
pub fn reverse_weight(v: &BitString) -> u64 {
    let mut sum = 0u64;
    let mut rest = v.value;
    while rest != 0 {
        // bit at shift tz sits at 1-based position n - tz, weight n - (n - tz) + 1
        sum += rest.trailing_zeros() as u64 + 1;
        rest &= rest - 1;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::string::ToString;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn ball_text(v: &str, s: usize) -> Vec<String> {
        deletion_ball(bs(v), s).unwrap().members().iter().map(|m| m.to_text()).collect()
    }

    #[test]
    fn enumerate_small() {
        let one: Vec<_> = enumerate_strings(1).unwrap().iter().map(|b| b.to_text()).collect();
        assert_eq!(one, ["0", "1"]);
        let three: Vec<_> = enumerate_strings(3).unwrap().iter().map(|b| b.to_text()).collect();
        assert_eq!(three, ["000", "001", "010", "011", "100", "101", "110", "111"]);
        assert_eq!(enumerate_strings(6).unwrap().len(), 64);
    }

    #[test]
    fn enumerate_rejects_out_of_range() {
        assert_eq!(enumerate_strings(0), Err(Error::Capacity { n: 0, max: MAX_LEN }));
        assert_eq!(enumerate_strings(27), Err(Error::Capacity { n: 27, max: MAX_LEN }));
    }

    #[test]
    fn balls() {
        assert_eq!(ball_text("101", 1), ["01", "10", "11"]);
        assert_eq!(ball_text("000", 1), ["00"]);
        assert_eq!(ball_text("0011", 2), ["00", "01", "11"]);
        assert_eq!(deletion_ball(bs("101"), 3), Err(Error::DeletionCount { n: 3, s: 3 }));
    }

    #[test]
    fn shares() {
        assert!(shares_subsequence(&bs("101"), &bs("011"), 1).unwrap());
        assert!(!shares_subsequence(&bs("1100"), &bs("0011"), 1).unwrap());
        assert_eq!(lcs_len(&bs("1100"), &bs("0011")), 2);
        assert!(shares_subsequence(&bs("0110"), &bs("0110"), 2).unwrap());
        assert_eq!(
            shares_subsequence(&bs("01"), &bs("011"), 1),
            Err(Error::LengthMismatch { left: 2, right: 3 })
        );
    }

    #[test]
    fn weights() {
        assert_eq!(vt_residual(&bs("000")), 0);
        assert_eq!(vt_residual(&bs("101")), 0);
        assert_eq!(vt_residual(&bs("011")), 1);
        assert_eq!(reverse_weight(&bs("000")), 0);
        assert_eq!(reverse_weight(&bs("101")), 4);
        assert_eq!(reverse_weight(&bs("111")), 6);
    }

    #[test]
    fn delete_and_runs() {
        assert_eq!(bs("10110").delete_at(0), bs("0110"));
        assert_eq!(bs("10110").delete_at(4), bs("1011"));
        assert_eq!(bs("10110").delete_at(2), bs("1010"));
        assert_eq!(bs("10110").runs(), 4);
        assert_eq!(bs("1").runs(), 1);
    }

    #[test]
    fn text_round_trip_and_errors() {
        assert_eq!(bs("0101").to_string(), "0101");
        assert!("01a".parse::<BitString>().is_err());
        assert!(BitString::new(3, 8).is_err());
        assert_eq!(BitString::from_bits(&[1, 0, 1]).unwrap(), bs("101"));
        assert_eq!(bs("110").bits().collect::<Vec<_>>(), vec![1, 1, 0]);
    }
}
