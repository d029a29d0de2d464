use alloc::string::String;

/// Errors raised by the bit-sequence, graph and code kernels.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("code length {n} outside supported range 1..={max}")]
    Capacity { n: usize, max: usize },
    #[error("deletion count {s} invalid for length {n} (need 1 <= s < n)")]
    DeletionCount { n: usize, s: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("value {value:#x} does not fit in {n} bits")]
    Overflow { value: u64, n: usize },
    #[error("invalid bit string {0:?}")]
    Parse(String),
    #[error("order is not a permutation of the {0} vertex ranks")]
    NotAPermutation(usize),
    #[error("VT residue {a} outside 0..={n}")]
    Residue { a: usize, n: usize },
    #[error("malformed graph data: {0}")]
    Format(&'static str),
    #[error("{0}")]
    Domain(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
