//! Evaluation inputs, score modes and evaluation results.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bitseq::MAX_LEN;
use crate::error::{Error, Result};

/// Known maximum single-deletion code sizes for `n = 6..=11`.
pub const SINGLE_OPTIMUM: [usize; 6] = [10, 16, 30, 52, 94, 172];

/// Ordered `(n, s)` pairs a candidate is evaluated on. The order fixes the
/// meaning of every position in a size signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "EvalInputRepr", into = "EvalInputRepr")]
pub struct EvalInput {
    pairs: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EvalInputRepr {
    Preset(String),
    Pairs { pairs: Vec<(usize, usize)> },
}

impl TryFrom<EvalInputRepr> for EvalInput {
    type Error = Error;

    fn try_from(r: EvalInputRepr) -> Result<Self> {
        match r {
            EvalInputRepr::Preset(name) => name.parse(),
            EvalInputRepr::Pairs { pairs } => EvalInput::new(pairs),
        }
    }
}

impl From<EvalInput> for EvalInputRepr {
    fn from(e: EvalInput) -> Self {
        match e.preset_name() {
            Some(name) => EvalInputRepr::Preset(name.into()),
            None => EvalInputRepr::Pairs { pairs: e.pairs },
        }
    }
}

impl EvalInput {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Domain("evaluation input needs at least one (n, s) pair"));
        }
        for &(n, s) in &pairs {
            if n > MAX_LEN {
                return Err(Error::Capacity { n, max: MAX_LEN });
            }
            if s == 0 || s >= n {
                return Err(Error::DeletionCount { n, s });
            }
        }
        Ok(Self { pairs })
    }

    /// `s = 1`, `n = 6..=11`.
    pub fn single() -> Self {
        Self { pairs: (6..=11).map(|n| (n, 1)).collect() }
    }

    /// `s = 2`, `n = 7..=12`.
    pub fn two() -> Self {
        Self { pairs: (7..=12).map(|n| (n, 2)).collect() }
    }

    /// `s = 1` for `n = 9..=11`, then `s = 2` for `n = 10..=12`.
    pub fn joint() -> Self {
        Self { pairs: (9..=11).map(|n| (n, 1)).chain((10..=12).map(|n| (n, 2))).collect() }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn preset_name(&self) -> Option<&'static str> {
        [("single", Self::single()), ("two", Self::two()), ("joint", Self::joint())]
            .into_iter()
            .find(|(_, p)| p == self)
            .map(|(name, _)| name)
    }
}

impl FromStr for EvalInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(Self::single()),
            "two" => Ok(Self::two()),
            "joint" => Ok(Self::joint()),
            _ => Err(Error::Parse(alloc::format!("unknown evaluation preset {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSpec {
    /// Size at the last pair of the input.
    #[default]
    Largest,
    Average,
    /// `Σ n·size / Σ n`.
    Weighted,
}

impl ScoreSpec {
    pub fn name(self) -> &'static str {
        match self {
            ScoreSpec::Largest => "largest",
            ScoreSpec::Average => "average",
            ScoreSpec::Weighted => "weighted",
        }
    }
}

impl fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "largest" => Ok(ScoreSpec::Largest),
            "average" => Ok(ScoreSpec::Average),
            "weighted" => Ok(ScoreSpec::Weighted),
            _ => Err(Error::Parse(alloc::format!("unknown score mode {s:?}"))),
        }
    }
}

pub fn score(spec: ScoreSpec, inputs: &EvalInput, sizes: &[usize]) -> Result<f64> {
    if sizes.len() != inputs.len() {
        return Err(Error::LengthMismatch { left: inputs.len(), right: sizes.len() });
    }
    Ok(match spec {
        ScoreSpec::Largest => sizes[sizes.len() - 1] as f64,
        ScoreSpec::Average => sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
        ScoreSpec::Weighted => {
            let weighted: usize = inputs.pairs().iter().zip(sizes).map(|(&(n, _), &size)| n * size).sum();
            let total: usize = inputs.pairs().iter().map(|&(n, _)| n).sum();
            weighted as f64 / total as f64
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Ok,
    NonExecutable,
    Timeout,
    InvalidPriority,
}

impl EvalStatus {
    pub fn name(self) -> &'static str {
        match self {
            EvalStatus::Ok => "ok",
            EvalStatus::NonExecutable => "non_executable",
            EvalStatus::Timeout => "timeout",
            EvalStatus::InvalidPriority => "invalid_priority",
        }
    }
}

impl fmt::Display for EvalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of evaluating one candidate. `sizes`, `score` and `hash` are set
/// exactly when the status is ok.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub status: EvalStatus,
    pub sizes: Option<Vec<usize>>,
    pub score: Option<f64>,
    #[serde(with = "hex_hash")]
    pub hash: Option<u64>,
    pub elapsed_ms: u64,
}

impl EvalResult {
    pub fn ok(spec: ScoreSpec, inputs: &EvalInput, sizes: Vec<usize>, hash: u64, elapsed_ms: u64) -> Result<Self> {
        let score = score(spec, inputs, &sizes)?;
        Ok(Self { status: EvalStatus::Ok, sizes: Some(sizes), score: Some(score), hash: Some(hash), elapsed_ms })
    }

    pub fn failed(status: EvalStatus, elapsed_ms: u64) -> Self {
        debug_assert!(status != EvalStatus::Ok);
        Self { status, sizes: None, score: None, hash: None, elapsed_ms }
    }

    pub fn is_ok(&self) -> bool {
        self.status == EvalStatus::Ok
    }
}

/// Whether `r` reaches the known maximum at every single-deletion input.
pub fn is_optimal(r: &EvalResult, inputs: &EvalInput) -> Result<bool> {
    if *inputs != EvalInput::single() {
        return Err(Error::Domain("optimality is only known for the single-deletion preset"));
    }
    Ok(r.sizes.as_deref() == Some(&SINGLE_OPTIMUM[..]))
}

mod hex_hash {
    use alloc::format;
    use alloc::string::String;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match h {
            Some(h) => s.serialize_str(&format!("{h:016x}")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        let text: Option<String> = Option::deserialize(d)?;
        text.map(|t| u64::from_str_radix(&t, 16).map_err(serde::de::Error::custom)).transpose()
    }
}
