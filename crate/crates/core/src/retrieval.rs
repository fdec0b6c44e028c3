//! Sparse tf-idf retrieval over documents or paragraphs.
//!
//! Document mode hashes every unigram and adjacent-token bigram into
//! `2^hash_bits` buckets and scores by the dot product of tf-idf vectors.
//! Paragraph mode keeps exact unigram terms and scores by cosine similarity.
//!
//! Weights are `tf * idf` with raw counts for `tf` and
//! `idf = max(0, ln((N - df + 0.5) / (df + 0.5)))`. Query vectors use the
//! same weighting. Per-unit scores are accumulated in ascending feature order,
//! which makes them bit-reproducible regardless of how the index was built.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Query, UnitMode};
use crate::error::{Error, Result};
use crate::par;

pub const DEFAULT_HASH_BITS: u32 = 24;
pub const MIN_HASH_BITS: u32 = 8;
pub const MAX_HASH_BITS: u32 = 30;

const INDEX_FORMAT: &str = "adaptir-index";
const INDEX_VERSION: u32 = 1;

/// Lowercased maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// 64-bit FNV-1a over the UTF-8 bytes of `s`. Seedless and platform independent.
pub fn fnv1a64(s: &str) -> u64 {
    fnv_extend(FNV_OFFSET, s.as_bytes())
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn fnv_extend(h: u64, bytes: &[u8]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(h, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Bucket of a unigram or bigram feature string (`"a b"` for bigrams).
pub fn feature_bucket(feature: &str, hash_bits: u32) -> u32 {
    (fnv1a64(feature) & ((1u64 << hash_bits) - 1)) as u32
}

/// Clamped inverse document frequency.
pub fn idf(n_units: usize, df: u32) -> f64 {
    let n = n_units as f64;
    let df = f64::from(df);
    ((n - df + 0.5) / (df + 0.5)).ln().max(0.0)
}

/// Bucket counts of unigrams and bigrams, ascending by bucket.
fn hashed_counts(text: &str, hash_bits: u32) -> Vec<(u32, u32)> {
    let tokens = tokenize(text);
    let mask = (1u64 << hash_bits) - 1;
    let mut buckets: Vec<u32> = tokens
        .iter()
        .map(|t| feature_bucket(t, hash_bits))
        .collect();
    // Same hash as `fnv1a64(&format!("{a} {b}"))`, without the allocation.
    buckets.extend(tokens.windows(2).map(|pair| {
        let h = fnv_extend(fnv_extend(fnv1a64(&pair[0]), b" "), pair[1].as_bytes());
        (h & mask) as u32
    }));
    buckets.sort_unstable();
    let mut counts: Vec<(u32, u32)> = Vec::new();
    for b in buckets {
        match counts.last_mut() {
            Some((last, c)) if *last == b => *c += 1,
            _ => counts.push((b, 1)),
        }
    }
    counts
}

fn term_counts(text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for tok in tokenize(text) {
        *counts.entry(tok).or_insert(0) += 1;
    }
    counts
}

/// Sparse vector as `(feature, value)` pairs in ascending feature order.
pub type SparseVec = Vec<(u32, f64)>;

/// Immutable tf-idf index over a fixed set of retrieval units.
#[derive(Debug, Clone)]
pub struct SparseIndex {
    mode: UnitMode,
    hash_bits: u32,
    unit_ids: Vec<String>,
    /// Paragraph mode only: term -> feature id, assigned in sorted term order.
    vocab: BTreeMap<String, u32>,
    doc_freq: HashMap<u32, u32>,
    /// Raw term counts per unit; the persisted representation.
    counts: Vec<Vec<(u32, u32)>>,
    vectors: Vec<SparseVec>,
    norms: Vec<f64>,
    postings: HashMap<u32, Vec<(u32, f64)>>,
}

impl SparseIndex {
    /// Index `corpus`. `hash_bits` must lie in `[8, 30]` in document mode and
    /// is recorded but unused in paragraph mode.
    pub fn build(corpus: &[Document], mode: UnitMode, hash_bits: u32) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        check_hash_bits(mode, hash_bits)?;
        let unit_ids = corpus.iter().map(|d| d.id.clone()).collect();
        let (vocab, counts) = match mode {
            UnitMode::Document => {
                let counts = par::map(corpus, |d| hashed_counts(&d.text, hash_bits));
                (BTreeMap::new(), counts)
            }
            UnitMode::Paragraph => {
                let per_unit: Vec<BTreeMap<String, u32>> =
                    par::map(corpus, |d| term_counts(&d.text));
                let mut vocab: BTreeMap<String, u32> = BTreeMap::new();
                for terms in &per_unit {
                    for term in terms.keys() {
                        vocab.entry(term.clone()).or_insert(0);
                    }
                }
                for (id, slot) in vocab.values_mut().enumerate() {
                    *slot = id as u32;
                }
                let counts = per_unit
                    .into_iter()
                    .map(|terms| terms.into_iter().map(|(t, c)| (vocab[&t], c)).collect())
                    .collect();
                (vocab, counts)
            }
        };
        Ok(Self::from_counts(mode, hash_bits, unit_ids, vocab, counts))
    }

    fn from_counts(
        mode: UnitMode,
        hash_bits: u32,
        unit_ids: Vec<String>,
        vocab: BTreeMap<String, u32>,
        counts: Vec<Vec<(u32, u32)>>,
    ) -> Self {
        let n = unit_ids.len();
        let mut doc_freq: HashMap<u32, u32> = HashMap::new();
        for unit in &counts {
            for &(f, _) in unit {
                *doc_freq.entry(f).or_insert(0) += 1;
            }
        }
        let vectors: Vec<SparseVec> = par::map(&counts, |unit| {
            unit.iter()
                .map(|&(f, c)| (f, f64::from(c) * idf(n, doc_freq[&f])))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        });
        let norms = par::map(&vectors, |v| l2_norm(v.iter().map(|&(_, w)| w)));
        let mut postings: HashMap<u32, Vec<(u32, f64)>> = HashMap::with_capacity(doc_freq.len());
        for (u, vector) in vectors.iter().enumerate() {
            for &(f, w) in vector {
                postings
                    .entry(f)
                    .or_insert_with(|| Vec::with_capacity(doc_freq[&f] as usize))
                    .push((u as u32, w));
            }
        }
        Self {
            mode,
            hash_bits,
            unit_ids,
            vocab,
            doc_freq,
            counts,
            vectors,
            norms,
            postings,
        }
    }

    pub fn mode(&self) -> UnitMode {
        self.mode
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    /// Number of indexed units.
    pub fn len(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_ids.is_empty()
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    /// Document frequency of a feature id (0 when unseen).
    pub fn doc_freq(&self, feature: u32) -> u32 {
        self.doc_freq.get(&feature).copied().unwrap_or(0)
    }

    /// Nonzero tf-idf weights of unit `u`, ascending by feature.
    pub fn unit_vector(&self, u: usize) -> &[(u32, f64)] {
        &self.vectors[u]
    }

    /// Paragraph-mode feature id of `term`.
    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.vocab.get(term).copied()
    }

    /// Query tf-idf vector (ascending feature order) and its L2 norm. In
    /// paragraph mode, out-of-vocabulary terms contribute to the norm only.
    pub fn query_vector(&self, question: &str) -> (SparseVec, f64) {
        let n = self.len();
        match self.mode {
            UnitMode::Document => {
                let v: SparseVec = hashed_counts(question, self.hash_bits)
                    .into_iter()
                    .map(|(f, c)| (f, f64::from(c) * idf(n, self.doc_freq(f))))
                    .collect();
                let norm = l2_norm(v.iter().map(|&(_, w)| w));
                (v, norm)
            }
            UnitMode::Paragraph => {
                let mut known = Vec::new();
                let mut all = Vec::new();
                for (term, c) in term_counts(question) {
                    let id = self.vocab.get(&term).copied();
                    let w = f64::from(c) * idf(n, id.map_or(0, |f| self.doc_freq(f)));
                    all.push(w);
                    if let Some(f) = id {
                        known.push((f, w));
                    }
                }
                known.sort_by_key(|&(f, _)| f);
                (known, l2_norm(all.into_iter()))
            }
        }
    }

    /// Score of every unit, in index order. All scores are `>= 0`.
    pub fn score_query(&self, question: &str) -> Vec<f64> {
        let (query, query_norm) = self.query_vector(question);
        let mut scores = vec![0.0; self.len()];
        for &(f, qw) in &query {
            if qw == 0.0 {
                continue;
            }
            if let Some(list) = self.postings.get(&f) {
                for &(u, w) in list {
                    scores[u as usize] += qw * w;
                }
            }
        }
        if self.mode == UnitMode::Paragraph {
            for (score, &norm) in scores.iter_mut().zip(&self.norms) {
                *score = if query_norm == 0.0 || norm == 0.0 {
                    0.0
                } else {
                    *score / (query_norm * norm)
                };
            }
        }
        scores
    }

    /// Top `min(tau, N)` units by score (ties by ascending id) with scores
    /// normalized over the returned list.
    pub fn retrieve_topk(
        &self,
        query_id: &str,
        question: &str,
        tau: usize,
    ) -> Result<ScoredCandidateList> {
        if tau == 0 {
            return Err(Error::InvalidParameter("tau must be >= 1".into()));
        }
        let scores = self.score_query(question);
        let k = tau.min(self.len());
        let mut order: Vec<usize> = (0..self.len()).collect();
        let cmp = |&a: &usize, &b: &usize| {
            scores[b]
                .total_cmp(&scores[a])
                .then_with(|| self.unit_ids[a].cmp(&self.unit_ids[b]))
        };
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_unstable_by(cmp);
        let raw: Vec<f64> = order.iter().map(|&u| scores[u]).collect();
        let normalized = normalize_scores(&raw);
        let entries = order
            .iter()
            .zip(raw)
            .zip(normalized)
            .map(|((&u, raw_score), normalized_score)| Candidate {
                doc_id: self.unit_ids[u].clone(),
                raw_score,
                normalized_score,
            })
            .collect();
        Ok(ScoredCandidateList {
            query_id: query_id.to_string(),
            tau,
            entries,
        })
    }

    /// [`retrieve_topk`](Self::retrieve_topk) for every query, in input order.
    pub fn retrieve_batch(
        &self,
        queries: &[Query],
        tau: usize,
    ) -> Result<Vec<ScoredCandidateList>> {
        par::try_map(queries, |q| self.retrieve_topk(&q.id, &q.question, tau))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = IndexFile {
            format: INDEX_FORMAT.to_string(),
            version: INDEX_VERSION,
            mode: self.mode,
            hash_bits: self.hash_bits,
            unit_ids: self.unit_ids.clone(),
            vocab: self.vocab.keys().cloned().collect(),
            counts: self.counts.clone(),
        };
        crate::io::write_atomic(path, |w| {
            let mut out = BufWriter::new(w);
            serde_json::to_writer(&mut out, &file)?;
            out.flush()
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let file: IndexFile =
            serde_json::from_reader(reader).map_err(|e| Error::Format(e.to_string()))?;
        if file.format != INDEX_FORMAT {
            return Err(Error::Format(format!(
                "not an index file (`{}`)",
                file.format
            )));
        }
        if file.version != INDEX_VERSION {
            return Err(Error::VersionMismatch {
                found: file.version,
                expected: INDEX_VERSION,
            });
        }
        check_hash_bits(file.mode, file.hash_bits)?;
        if file.unit_ids.is_empty() || file.counts.len() != file.unit_ids.len() {
            return Err(Error::Format(
                "unit table does not match count vectors".into(),
            ));
        }
        let vocab: BTreeMap<String, u32> = file
            .vocab
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t, i as u32))
            .collect();
        Ok(Self::from_counts(
            file.mode,
            file.hash_bits,
            file.unit_ids,
            vocab,
            file.counts,
        ))
    }
}

fn check_hash_bits(mode: UnitMode, hash_bits: u32) -> Result<()> {
    if mode == UnitMode::Document && !(MIN_HASH_BITS..=MAX_HASH_BITS).contains(&hash_bits) {
        return Err(Error::InvalidParameter(format!(
            "hash_bits must be in [{MIN_HASH_BITS}, {MAX_HASH_BITS}], got {hash_bits}"
        )));
    }
    Ok(())
}

fn l2_norm(values: impl Iterator<Item = f64>) -> f64 {
    values.map(|w| w * w).sum::<f64>().sqrt()
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    mode: UnitMode,
    hash_bits: u32,
    unit_ids: Vec<String>,
    vocab: Vec<String>,
    counts: Vec<Vec<(u32, u32)>>,
}

/// Divide by the sum; all-zero input becomes uniform.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub raw_score: f64,
    pub normalized_score: f64,
}

/// Ranked top-τ retrieval result for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidateList {
    pub query_id: String,
    pub tau: usize,
    pub entries: Vec<Candidate>,
}

impl ScoredCandidateList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn normalized_scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.normalized_score).collect()
    }

    /// Score vector of exactly `tau` entries for a cutoff model: the raw scores
    /// are truncated (or zero-padded when fewer units exist) and renormalized.
    pub fn score_vector(&self, tau: usize) -> Vec<f64> {
        let mut raw: Vec<f64> = self.entries.iter().take(tau).map(|e| e.raw_score).collect();
        if raw.len() < tau {
            let present = normalize_scores(&raw);
            raw = present;
            raw.resize(tau, 0.0);
            return raw;
        }
        normalize_scores(&raw)
    }
}
