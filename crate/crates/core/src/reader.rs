//! Parametric stand-in for a neural answer extractor.
//!
//! Every candidate passed to the reader yields one answer with a confidence:
//! `Uniform(0, 1)` for documents without the answer and `Uniform(δ, 1 + δ)`
//! for answer-bearing ones. The read is an exact match iff the most confident
//! candidate is answer-bearing. With `δ = 0` relevance is invisible to the
//! reader, so more noise always hurts; large `δ` rewards recall.
//!
//! Randomness is drawn from a per-query ChaCha8 stream seeded by
//! `splitmix64(seed ^ splitmix64(fnv1a64(query_id)))`, one uniform per rank
//! position in order, so outcomes do not depend on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Labels;
use crate::error::{Error, Result};
use crate::retrieval::{fnv1a64, Candidate};

pub const DEFAULT_DELTA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReaderModel {
    /// Confidence boost of answer-bearing candidates.
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadOutcome {
    pub query_id: String,
    pub n_used: usize,
    pub k_relevant: usize,
    pub exact_match: bool,
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl ReaderModel {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be >= 0, got {delta}"
            )));
        }
        Ok(Self { delta, seed })
    }

    /// Independent reader with the same boost, for replicate `r`.
    pub fn replicate(&self, r: u64) -> Self {
        Self {
            delta: self.delta,
            seed: splitmix64(self.seed ^ splitmix64(r.wrapping_add(1))),
        }
    }

    pub fn stream_seed(&self, query_id: &str) -> u64 {
        splitmix64(self.seed ^ splitmix64(fnv1a64(query_id)))
    }

    /// Read a relevance pattern in rank order; true iff the argmax is relevant.
    /// Confidence ties go to the earlier rank.
    pub fn read_pattern(&self, query_id: &str, relevant: &[bool]) -> Result<bool> {
        if relevant.is_empty() {
            return Err(Error::InvalidParameter(
                "reader needs at least one candidate".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.stream_seed(query_id));
        let mut best = f64::NEG_INFINITY;
        let mut best_relevant = false;
        for &rel in relevant {
            let u: f64 = rng.random();
            let confidence = if rel { u + self.delta } else { u };
            if confidence > best {
                best = confidence;
                best_relevant = rel;
            }
        }
        Ok(best_relevant)
    }

    /// Read the first `candidates.len()` entries of a ranked list.
    pub fn simulate_read(
        &self,
        query_id: &str,
        candidates: &[Candidate],
        labels: &Labels,
    ) -> Result<ReadOutcome> {
        let relevant = candidates
            .iter()
            .map(|c| {
                labels
                    .get(&c.doc_id)
                    .copied()
                    .ok_or_else(|| Error::MissingLabel(c.doc_id.clone()))
            })
            .collect::<Result<Vec<bool>>>()?;
        let exact_match = self.read_pattern(query_id, &relevant)?;
        Ok(ReadOutcome {
            query_id: query_id.to_string(),
            n_used: relevant.len(),
            k_relevant: relevant.iter().filter(|&&r| r).count(),
            exact_match,
        })
    }
}

/// Probability that the best of `k` boosted draws beats the best of `n - k`
/// unboosted ones. Exactly `k / n` at `δ = 0`; Simpson quadrature otherwise.
pub fn em_probability_oracle(k: usize, n: usize, delta: f64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= k <= n, n >= 1 (k={k}, n={n})"
        )));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be >= 0, got {delta}"
        )));
    }
    if k == 0 {
        return Ok(0.0);
    }
    if k == n {
        return Ok(1.0);
    }
    if delta == 0.0 {
        return Ok(k as f64 / n as f64);
    }
    let noise = (n - k) as i32;
    let kf = k as f64;
    // Density of the best boosted draw times CDF of the best noise draw.
    let integrand = |r: f64| kf * (r - delta).powi(k as i32 - 1) * r.clamp(0.0, 1.0).powi(noise);
    let p = if delta < 1.0 {
        simpson(integrand, delta, 1.0, 2048) + simpson(integrand, 1.0, 1.0 + delta, 2048)
    } else {
        simpson(integrand, delta, 1.0 + delta, 2048)
    };
    Ok(p.clamp(0.0, 1.0))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let intervals = intervals + intervals % 2;
    let h = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for i in 1..intervals {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * f(a + h * i as f64);
    }
    acc * h / 3.0
}
