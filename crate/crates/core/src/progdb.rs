//! Island-based program database: clustering by size signature, softmax
//! sampling, deduplication, island resets and snapshots.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greedy::PriorityValue;
use crate::prompt::{LlmParams, TemplateId};
use crate::scoring::{EvalInput, EvalResult, ScoreSpec};

pub const SNAPSHOT_VERSION: u32 = 1;

/// Length-bias smoothing term in member sampling.
pub const LENGTH_EPSILON: f64 = 1e-6;

/// 64-bit FNV-1a, usable as a `fmt::Write` sink.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Fnv1a {
    pub const fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Write for Fnv1a {
    fn write_str(&mut self, s: &str) -> fmt::Result {
        self.write_bytes(s.as_bytes());
        Ok(())
    }
}

/// Fingerprint of a candidate's priority vectors, one vector per evaluation
/// pair, each in vertex rank order.
pub fn dedup_hash<V: AsRef<[PriorityValue]>>(vectors: &[V]) -> u64 {
    use fmt::Write;
    let mut h = Fnv1a::new();
    for (i, vector) in vectors.iter().enumerate() {
        if i > 0 {
            h.write_bytes(b"|");
        }
        for p in vector.as_ref() {
            let _ = p.write_canonical(&mut h);
            let _ = h.write_str(";");
        }
    }
    h.finish()
}

fn default_islands() -> usize {
    10
}
fn default_temperature() -> f64 {
    0.1
}
fn default_period() -> u64 {
    30_000
}
fn default_reset() -> u64 {
    1200
}
fn default_budget() -> u64 {
    400_000
}
fn default_post_optimal() -> u64 {
    20_000
}
fn default_inputs() -> EvalInput {
    EvalInput::single()
}
fn default_timeout() -> u64 {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default = "default_islands")]
    pub num_islands: usize,
    /// Initial cluster-sampling temperature `T`.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Sampling period `P`.
    #[serde(default = "default_period")]
    pub period: u64,
    /// Stored functions between island resets `R`.
    #[serde(default = "default_reset")]
    pub reset_every: u64,
    #[serde(default)]
    pub score: ScoreSpec,
    #[serde(default = "default_inputs")]
    pub inputs: EvalInput,
    /// Maximum number of processed candidates.
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_post_optimal")]
    pub post_optimal_budget: u64,
    #[serde(default)]
    pub template: TemplateId,
    #[serde(default)]
    pub llm: LlmParams,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            num_islands: default_islands(),
            temperature: default_temperature(),
            period: default_period(),
            reset_every: default_reset(),
            score: ScoreSpec::default(),
            inputs: default_inputs(),
            budget: default_budget(),
            post_optimal_budget: default_post_optimal(),
            template: TemplateId::default(),
            llm: LlmParams::default(),
            timeout_secs: default_timeout(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_islands == 0 {
            return Err(Error::Domain("num_islands must be at least 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Domain("temperature must be positive"));
        }
        if self.period == 0 || self.reset_every == 0 || self.budget == 0 {
            return Err(Error::Domain("period, reset_every and budget must be at least 1"));
        }
        if self.llm.decay == Some(0) {
            return Err(Error::Domain("temperature decay horizon must be at least 1"));
        }
        Ok(())
    }
}

/// `T·(1 - (n_j mod P)/P)`.
pub fn island_temperature(t: f64, n_j: u64, p: u64) -> f64 {
    let p = p.max(1);
    t * (1.0 - (n_j % p) as f64 / p as f64)
}

/// Softmax probabilities of `scores` at temperature `t`, stabilised by
/// subtracting the maximum.
pub fn softmax(scores: &[f64], t: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|&s| libm::exp((s - max) / t)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Shorter-favouring member weights `exp(-(len - min)/(max - min + ε))`, normalised.
pub fn length_probabilities(lengths: &[usize]) -> Vec<f64> {
    let min = lengths.iter().copied().min().unwrap_or(0) as f64;
    let max = lengths.iter().copied().max().unwrap_or(0) as f64;
    let weights: Vec<f64> =
        lengths.iter().map(|&l| libm::exp(-(l as f64 - min) / (max - min + LENGTH_EPSILON))).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum; take the last non-zero entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub id: String,
    pub source: String,
    pub length: usize,
    #[serde(with = "hex_u64")]
    pub hash: u64,
}

impl Member {
    pub fn new(id: String, source: String, hash: u64) -> Self {
        let length = source.chars().count().max(1);
        Self { id, source, length, hash }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub signature: Vec<usize>,
    pub score: f64,
    pub founder: String,
    pub members: Vec<Member>,
}

impl Cluster {
    fn founded_by(member: Member, signature: Vec<usize>, score: f64) -> Self {
        Self { signature, score, founder: member.id.clone(), members: vec![member] }
    }

    pub fn founder_member(&self) -> &Member {
        self.members.iter().find(|m| m.id == self.founder).unwrap_or(&self.members[0])
    }

    fn rank_key(&self, other: &Cluster) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| self.signature.cmp(&other.signature))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Island {
    pub id: usize,
    pub n_j: u64,
    /// Ascending by signature.
    pub clusters: Vec<Cluster>,
    #[serde(skip)]
    dedup: BTreeSet<u64>,
}

impl Island {
    fn empty(id: usize) -> Self {
        Self { id, n_j: 0, clusters: Vec::new(), dedup: BTreeSet::new() }
    }

    fn rebuild_index(&mut self) {
        self.dedup = self.clusters.iter().flat_map(|c| c.members.iter().map(|m| m.hash)).collect();
    }

    pub fn contains_hash(&self, hash: u64) -> bool {
        self.dedup.contains(&hash)
    }

    pub fn member_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    /// Highest-scoring cluster, ties going to the larger signature.
    pub fn best_cluster(&self) -> Option<&Cluster> {
        self.clusters.iter().max_by(|a, b| a.rank_key(b))
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best_cluster().map(|c| c.score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub stored: u64,
    pub duplicates: u64,
    pub discarded: u64,
    pub stored_since_reset: u64,
    pub resets: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreOutcome {
    Stored { new_cluster: bool },
    Duplicate,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResetReport {
    /// `(cleared island, island its new founder came from)`.
    pub reseeded: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptExample {
    pub member_id: String,
    pub source: String,
    pub signature: Vec<usize>,
}

/// Examples for one prompt, lowest cluster score first. Holds a single
/// example when the island has only one cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPair {
    pub island: usize,
    pub examples: Vec<PromptExample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        let seed = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        Self { seed, stream: rng.get_stream(), word_pos: format!("{}", rng.get_word_pos()) }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = || Error::Format("bad rng state");
        if self.seed.len() != 64 || !self.seed.is_ascii() {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&self.seed[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse().map_err(|_| bad())?);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Database {
    version: u32,
    config: SearchConfig,
    islands: Vec<Island>,
    counters: Counters,
    #[serde(rename = "rng_state", with = "rng_serde")]
    rng: ChaCha8Rng,
}

impl Database {
    /// Every island starts from the same evaluated initial function.
    pub fn new(config: SearchConfig, seed: u64, initial: Member, result: &EvalResult) -> Result<Self> {
        config.validate()?;
        let (signature, score) = match (&result.sizes, result.score) {
            (Some(sizes), Some(score)) if result.is_ok() => (sizes.clone(), score),
            _ => return Err(Error::Domain("the initial function must evaluate successfully")),
        };
        let mut islands = Vec::with_capacity(config.num_islands);
        for id in 0..config.num_islands {
            let mut island = Island::empty(id);
            island.clusters.push(Cluster::founded_by(initial.clone(), signature.clone(), score));
            island.n_j = 1;
            island.rebuild_index();
            islands.push(island);
        }
        Ok(Self {
            version: SNAPSHOT_VERSION,
            config,
            islands,
            counters: Counters::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn islands(&self) -> &[Island] {
        &self.islands
    }

    pub fn island(&self, id: usize) -> Result<&Island> {
        self.islands.get(id).ok_or(Error::Domain("unknown island"))
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn best_score(&self) -> Option<f64> {
        self.islands.iter().filter_map(Island::best_score).max_by(f64::total_cmp)
    }

    pub fn best_cluster(&self) -> Option<&Cluster> {
        self.islands.iter().filter_map(Island::best_cluster).max_by(|a, b| a.rank_key(b))
    }

    pub fn temperature_of(&self, island: usize) -> Result<f64> {
        let n_j = self.island(island)?.n_j;
        Ok(island_temperature(self.config.temperature, n_j, self.config.period))
    }

    fn cluster_probs(&self, island: &Island, exclude: Option<usize>) -> Vec<f64> {
        let t = island_temperature(self.config.temperature, island.n_j, self.config.period);
        let scores: Vec<f64> = island
            .clusters
            .iter()
            .enumerate()
            .map(|(i, c)| if Some(i) == exclude { f64::NEG_INFINITY } else { c.score })
            .collect();
        softmax(&scores, t)
    }

    /// Cluster index on `island` drawn from the score softmax.
    pub fn sample_cluster(&mut self, island: usize) -> Result<usize> {
        let isl = self.island(island)?;
        if isl.clusters.is_empty() {
            return Err(Error::Domain("island has no clusters"));
        }
        let probs = self.cluster_probs(isl, None);
        Ok(draw(&probs, &mut self.rng))
    }

    pub fn sample_member(&mut self, island: usize, cluster: usize) -> Result<usize> {
        let c = self.island(island)?.clusters.get(cluster).ok_or(Error::Domain("unknown cluster"))?;
        let lengths: Vec<usize> = c.members.iter().map(|m| m.length).collect();
        let probs = length_probabilities(&lengths);
        Ok(draw(&probs, &mut self.rng))
    }

    pub fn sample_prompt_pair(&mut self) -> Result<PromptPair> {
        if self.islands.iter().all(|i| i.clusters.is_empty()) {
            return Err(Error::Domain("database is empty"));
        }
        let island = self.rng.gen_range(0..self.islands.len());
        let count = self.islands[island].clusters.len();
        if count == 0 {
            return Err(Error::Domain("sampled island has no clusters"));
        }
        let first = self.sample_cluster(island)?;
        let mut picks = vec![first];
        if count > 1 {
            let probs = self.cluster_probs(&self.islands[island], Some(first));
            picks.push(draw(&probs, &mut self.rng));
        }
        let mut examples = Vec::with_capacity(picks.len());
        for &c in &picks {
            let m = self.sample_member(island, c)?;
            examples.push((c, m));
        }
        let clusters = &self.islands[island].clusters;
        examples.sort_by(|a, b| clusters[a.0].rank_key(&clusters[b.0]));
        let examples = examples
            .into_iter()
            .map(|(c, m)| {
                let member = &clusters[c].members[m];
                PromptExample {
                    member_id: member.id.clone(),
                    source: member.source.clone(),
                    signature: clusters[c].signature.clone(),
                }
            })
            .collect();
        Ok(PromptPair { island, examples })
    }

    pub fn store(&mut self, island: usize, member: Member, result: &EvalResult) -> Result<StoreOutcome> {
        if island >= self.islands.len() {
            return Err(Error::Domain("unknown island"));
        }
        let (signature, score) = match (&result.sizes, result.score) {
            (Some(sizes), Some(score)) if result.is_ok() => (sizes, score),
            _ => {
                self.counters.discarded += 1;
                return Ok(StoreOutcome::Discarded);
            }
        };
        if signature.len() != self.config.inputs.len() {
            return Err(Error::LengthMismatch { left: self.config.inputs.len(), right: signature.len() });
        }
        let isl = &mut self.islands[island];
        if isl.dedup.contains(&member.hash) {
            self.counters.duplicates += 1;
            return Ok(StoreOutcome::Duplicate);
        }
        isl.dedup.insert(member.hash);
        let new_cluster = match isl.clusters.binary_search_by(|c| c.signature.as_slice().cmp(signature)) {
            Ok(i) => {
                isl.clusters[i].members.push(member);
                false
            }
            Err(i) => {
                isl.clusters.insert(i, Cluster::founded_by(member, signature.clone(), score));
                true
            }
        };
        isl.n_j += 1;
        self.counters.stored += 1;
        self.counters.stored_since_reset += 1;
        Ok(StoreOutcome::Stored { new_cluster })
    }

    pub fn reset_due(&self) -> bool {
        self.counters.stored_since_reset >= self.config.reset_every
    }

    /// Clears the worse half of the islands, ranked by best cluster score with
    /// ties going to the lower island id, and reseeds each from the best
    /// cluster's founder of a uniformly drawn survivor.
    pub fn reset_islands(&mut self) -> ResetReport {
        let mut ranked: Vec<usize> = (0..self.islands.len()).collect();
        let best = |i: &Island| i.best_score().unwrap_or(f64::NEG_INFINITY);
        ranked.sort_by(|&a, &b| best(&self.islands[b]).total_cmp(&best(&self.islands[a])).then(a.cmp(&b)));
        let cleared = ranked.len() / 2;
        let (survivors, losers) = ranked.split_at(ranked.len() - cleared);
        let survivors = survivors.to_vec();
        let mut losers = losers.to_vec();
        losers.sort_unstable();
        let mut reseeded = Vec::with_capacity(losers.len());
        for id in losers {
            let from = survivors[self.rng.gen_range(0..survivors.len())];
            let seed = self.islands[from].best_cluster().map(|c| (c.founder_member().clone(), c.signature.clone(), c.score));
            let island = &mut self.islands[id];
            island.clusters.clear();
            island.n_j = 0;
            if let Some((member, signature, score)) = seed {
                island.clusters.push(Cluster::founded_by(member, signature, score));
                island.n_j = 1;
            }
            island.rebuild_index();
            reseeded.push((id, from));
        }
        self.counters.stored_since_reset = 0;
        self.counters.resets += 1;
        ResetReport { reseeded }
    }

    /// Validates a deserialized database and rebuilds its dedup indexes.
    pub fn check_loaded(mut self) -> Result<Self> {
        if self.version != SNAPSHOT_VERSION {
            return Err(Error::Format("unsupported database version"));
        }
        self.config.validate()?;
        if self.islands.iter().enumerate().any(|(i, isl)| isl.id != i) {
            return Err(Error::Format("island ids out of order"));
        }
        for island in &mut self.islands {
            if !island.clusters.windows(2).all(|w| w[0].signature < w[1].signature) {
                return Err(Error::Format("clusters out of order"));
            }
            if island.clusters.iter().any(|c| c.members.is_empty()) {
                return Err(Error::Format("empty cluster"));
            }
            island.rebuild_index();
            if island.dedup.len() != island.member_count() {
                return Err(Error::Format("duplicate member hash"));
            }
        }
        Ok(self)
    }
}

mod rng_serde {
    use rand_chacha::ChaCha8Rng;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::RngState;

    pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
        RngState::capture(rng).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ChaCha8Rng, D::Error> {
        RngState::deserialize(d)?.restore().map_err(serde::de::Error::custom)
    }
}

mod hex_u64 {
    use alloc::format;
    use alloc::string::String;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{h:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let text = String::deserialize(d)?;
        u64::from_str_radix(&text, 16).map_err(serde::de::Error::custom)
    }
}
