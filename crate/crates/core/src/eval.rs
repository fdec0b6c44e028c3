//! Retrieval and end-to-end metrics, and log-span weighted regret.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, AnswerMatcher, Document, Labels, Query};
use crate::cutoff::{first_relevant_rank, CutoffModel};
use crate::error::{Error, Result};
use crate::par;
use crate::reader::ReaderModel;
use crate::retrieval::ScoredCandidateList;

/// Candidate list of one query together with the relevance of each candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Judged {
    pub candidates: ScoredCandidateList,
    pub labels: Labels,
}

impl Judged {
    /// Relevance flags in rank order.
    pub fn relevance(&self) -> Result<Vec<bool>> {
        self.candidates
            .entries
            .iter()
            .map(|e| {
                self.labels
                    .get(&e.doc_id)
                    .copied()
                    .ok_or_else(|| Error::MissingLabel(e.doc_id.clone()))
            })
            .collect()
    }

    pub fn first_relevant_rank(&self) -> Result<Option<usize>> {
        first_relevant_rank(&self.candidates, &self.labels)
    }
}

/// Labels candidates by answer containment against pre-normalized unit texts.
#[derive(Debug, Clone, Default)]
pub struct Judge {
    texts: HashMap<String, String>,
}

impl Judge {
    pub fn new<'a>(units: impl IntoIterator<Item = &'a Document>) -> Self {
        Self {
            texts: units
                .into_iter()
                .map(|d| (d.id.clone(), normalize(&d.text)))
                .collect(),
        }
    }

    pub fn judge(&self, query: &Query, candidates: ScoredCandidateList) -> Result<Judged> {
        let matcher = AnswerMatcher::new(query);
        let labels = candidates
            .entries
            .iter()
            .map(|e| {
                self.texts
                    .get(&e.doc_id)
                    .map(|t| (e.doc_id.clone(), matcher.matches(t)))
                    .ok_or_else(|| Error::MissingLabel(e.doc_id.clone()))
            })
            .collect::<Result<Labels>>()?;
        Ok(Judged { candidates, labels })
    }
}

fn check_queries(judged: &[Judged], n: usize) -> Result<()> {
    if judged.is_empty() {
        return Err(Error::Empty("query set"));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    Ok(())
}

fn relevant_in_prefix(j: &Judged, n: usize) -> Result<usize> {
    Ok(j.relevance()?.into_iter().take(n).filter(|&r| r).count())
}

/// Fraction of queries with at least one relevant candidate in the top `n`.
pub fn recall_at_n(judged: &[Judged], n: usize) -> Result<f64> {
    check_queries(judged, n)?;
    let mut hits = 0usize;
    for j in judged {
        if relevant_in_prefix(j, n)? > 0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / judged.len() as f64)
}

/// Mean number of relevant candidates in the top `n`.
pub fn avg_relevant_at_n(judged: &[Judged], n: usize) -> Result<f64> {
    check_queries(judged, n)?;
    let mut total = 0usize;
    for j in judged {
        total += relevant_in_prefix(j, n)?;
    }
    Ok(total as f64 / judged.len() as f64)
}

/// End-to-end outcome of one cutoff system on one query set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemEval {
    /// Exact-match rate averaged over reader replicates.
    pub exact_match: f64,
    /// Mean number of candidates handed to the reader.
    pub mean_cutoff: f64,
    /// Among queries with a relevant candidate in the list, the fraction whose
    /// cutoff reaches the first relevant one.
    pub coverage: f64,
}

/// Exact-match rate of `model` with a single reader draw per query.
pub fn exact_match_rate(
    judged: &[Judged],
    model: &CutoffModel,
    reader: &ReaderModel,
) -> Result<f64> {
    Ok(evaluate_system(judged, model, reader, 1)?.exact_match)
}

/// Evaluate `model`, averaging the exact-match rate over `replicates`
/// independent readers derived from `reader`. Replicate 0 is `reader` itself.
pub fn evaluate_system(
    judged: &[Judged],
    model: &CutoffModel,
    reader: &ReaderModel,
    replicates: usize,
) -> Result<SystemEval> {
    check_queries(judged, 1)?;
    if replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be >= 1".into()));
    }
    if let (Some(tau), Some(list)) = (model.tau(), judged.iter().map(|j| j.candidates.tau).min()) {
        if tau > list {
            return Err(Error::InvalidParameter(format!(
                "cutoff model needs {tau} candidates but retrieval kept {list}"
            )));
        }
    }
    let readers: Vec<ReaderModel> = (0..replicates)
        .map(|r| {
            if r == 0 {
                *reader
            } else {
                reader.replicate(r as u64)
            }
        })
        .collect();
    let per_query = par::try_map(judged, |j| -> Result<(usize, usize, Option<bool>)> {
        let relevance = j.relevance()?;
        let n = model.cutoff_for(&j.candidates)?.min(relevance.len());
        let prefix = &relevance[..n];
        let mut hits = 0;
        for r in &readers {
            if r.read_pattern(&j.candidates.query_id, prefix)? {
                hits += 1;
            }
        }
        let covered = relevance.iter().position(|&r| r).map(|first| first < n);
        Ok((n, hits, covered))
    })?;
    let queries = judged.len() as f64;
    let hits: usize = per_query.iter().map(|&(_, h, _)| h).sum();
    let cutoffs: usize = per_query.iter().map(|&(n, _, _)| n).sum();
    let answerable = per_query.iter().filter(|q| q.2.is_some()).count();
    let covered = per_query.iter().filter(|q| q.2 == Some(true)).count();
    Ok(SystemEval {
        exact_match: hits as f64 / (queries * replicates as f64),
        mean_cutoff: cutoffs as f64 / queries,
        coverage: if answerable == 0 {
            0.0
        } else {
            covered as f64 / answerable as f64
        },
    })
}

/// `mu_star - mu`.
pub fn regret(mu_star: f64, mu: f64) -> f64 {
    mu_star - mu
}

/// Performance of one system over a corpus-size grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceCurve {
    pub system: String,
    pub points: Vec<(usize, f64)>,
}

impl PerformanceCurve {
    pub fn new(system: impl Into<String>, points: Vec<(usize, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Grid(
                "corpus sizes must be strictly increasing".into(),
            ));
        }
        if let Some(&(_, v)) = points.iter().find(|&&(_, v)| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidParameter(format!(
                "performance {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            system: system.into(),
            points,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

/// Normalized trapezoidal weights over `ln(size)`: each point gets half the
/// log-gap to each neighbour.
pub fn log_span_weights(sizes: &[usize]) -> Result<Vec<f64>> {
    if sizes.len() < 2 {
        return Err(Error::Grid("need at least two corpus sizes".into()));
    }
    if sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Grid(
            "corpus sizes must be positive and strictly increasing".into(),
        ));
    }
    let logs: Vec<f64> = sizes.iter().map(|&m| (m as f64).ln()).collect();
    let last = logs.len() - 1;
    let raw: Vec<f64> = (0..logs.len())
        .map(|j| {
            let left = if j == 0 { logs[0] } else { logs[j - 1] };
            let right = if j == last { logs[last] } else { logs[j + 1] };
            (right - left) / 2.0
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Per-size maximum over curves sharing one grid.
pub fn best_envelope(curves: &[PerformanceCurve]) -> Result<Vec<f64>> {
    let first = curves.first().ok_or(Error::Empty("performance curves"))?;
    let sizes = first.sizes();
    let mut best = vec![f64::NEG_INFINITY; sizes.len()];
    for curve in curves {
        if curve.sizes() != sizes {
            return Err(Error::Grid(format!(
                "curve `{}` uses a different grid",
                curve.system
            )));
        }
        for (b, v) in best.iter_mut().zip(curve.values()) {
            *b = b.max(v);
        }
    }
    Ok(best)
}

/// Log-span weighted average of `best[j] - curve[j]`.
pub fn total_regret(curve: &PerformanceCurve, best: &[f64]) -> Result<f64> {
    if best.len() != curve.points.len() {
        return Err(Error::Grid(format!(
            "curve has {} sizes, envelope has {}",
            curve.points.len(),
            best.len()
        )));
    }
    let weights = log_span_weights(&curve.sizes())?;
    Ok(weights
        .iter()
        .zip(best)
        .zip(curve.values())
        .map(|((w, &star), mu)| w * regret(star, mu))
        .sum())
}
