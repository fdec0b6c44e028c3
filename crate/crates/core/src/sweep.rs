//! Corpus-growth sweep: evaluate cutoff systems on nested corpora of
//! increasing size and summarize them by log-span weighted regret.
//!
//! The corpus at size `m` holds one seeded answer-bearing document per query
//! plus the first `m - Q` distractors of a fixed, seed-determined shuffle of
//! the pool, so each corpus contains every smaller one.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, AnswerMatcher, Document, Query, UnitMode};
use crate::cutoff::{CutoffModel, TrainingSet};
use crate::error::{Error, Result};
use crate::eval::{
    avg_relevant_at_n, best_envelope, evaluate_system, recall_at_n, total_regret, Judge, Judged,
    PerformanceCurve, SystemEval,
};
use crate::par;
use crate::reader::{splitmix64, ReaderModel};
use crate::retrieval::{SparseIndex, DEFAULT_HASH_BITS};

/// Smallest corpus as a multiple of the number of seeded documents.
pub const MIN_NOISE_FACTOR: f64 = 1.5;
pub const DEFAULT_REPLICATES: usize = 32;

/// Seeded documents (one per query, in query order) and the distractor pool.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSetup {
    pub queries: Vec<Query>,
    pub seeded: Vec<Document>,
    pub pool: Vec<Document>,
}

impl GrowthSetup {
    /// Split a corpus for `queries`: each query claims the first unclaimed
    /// document (in corpus order) that contains one of its answers; all
    /// remaining documents form the distractor pool.
    pub fn partition(queries: Vec<Query>, corpus: Vec<Document>) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::Empty("query set"));
        }
        let texts: Vec<String> = par::map(&corpus, |d| normalize(&d.text));
        let mut claimed = HashSet::new();
        let mut seeded_idx = Vec::with_capacity(queries.len());
        for q in &queries {
            let matcher = AnswerMatcher::new(q);
            let found = texts
                .iter()
                .enumerate()
                .find(|(i, t)| !claimed.contains(i) && matcher.matches(t))
                .map(|(i, _)| i)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "query `{}` has no answer-bearing document",
                        q.id
                    ))
                })?;
            claimed.insert(found);
            seeded_idx.push(found);
        }
        let mut slots: Vec<Option<Document>> = corpus.into_iter().map(Some).collect();
        let seeded = seeded_idx
            .iter()
            .map(|&i| slots[i].take().unwrap())
            .collect();
        let pool = slots.into_iter().flatten().collect();
        Ok(Self {
            queries,
            seeded,
            pool,
        })
    }

    /// Seed-determined order in which pool documents enter the corpus.
    pub fn distractor_order(&self, seed: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.pool.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x4449_5354_5241_4354));
        order.shuffle(&mut rng);
        order
    }

    /// Check a size grid against this setup.
    pub fn check_grid(&self, grid: &[usize]) -> Result<()> {
        let q = self.seeded.len();
        let first = *grid.first().ok_or_else(|| Error::Grid("empty".into()))?;
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Grid("sizes must be strictly increasing".into()));
        }
        let min = (q as f64 * MIN_NOISE_FACTOR).ceil() as usize;
        if first < min {
            return Err(Error::Grid(format!(
                "smallest size {first} is below {min} (1.5 x {q} seeded documents)"
            )));
        }
        let last = *grid.last().unwrap();
        if last - q > self.pool.len() {
            return Err(Error::Grid(format!(
                "size {last} needs {} distractors but the pool has {}",
                last - q,
                self.pool.len()
            )));
        }
        Ok(())
    }

    /// Corpus of size `m` under a distractor order.
    pub fn corpus_at(&self, order: &[usize], m: usize) -> Vec<Document> {
        let extra = m.saturating_sub(self.seeded.len());
        self.seeded
            .iter()
            .cloned()
            .chain(order[..extra].iter().map(|&i| self.pool[i].clone()))
            .collect()
    }

    /// Build the index for size `m`, retrieve top-`tau` and label candidates.
    pub fn judge_at(
        &self,
        order: &[usize],
        m: usize,
        retrieval: &RetrievalParams,
    ) -> Result<Vec<Judged>> {
        let corpus = self.corpus_at(order, m);
        let index = SparseIndex::build(&corpus, retrieval.mode, retrieval.hash_bits)?;
        let lists = index.retrieve_batch(&self.queries, retrieval.tau)?;
        let judge = Judge::new(&corpus);
        self.queries
            .iter()
            .zip(lists)
            .map(|(q, list)| judge.judge(q, list))
            .collect()
    }

    /// Training rows pooled over every grid size; queries without a relevant
    /// candidate in the top `tau` are excluded and counted.
    pub fn training_set(
        &self,
        grid: &[usize],
        retrieval: &RetrievalParams,
        seed: u64,
    ) -> Result<(TrainingSet, usize)> {
        self.check_grid(grid)?;
        let order = self.distractor_order(seed);
        let judged: Vec<Vec<Judged>> =
            par::try_map(grid, |&m| self.judge_at(&order, m, retrieval))?;
        TrainingSet::from_retrievals(
            retrieval.tau,
            judged.iter().flatten().map(|j| (&j.candidates, &j.labels)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub mode: UnitMode,
    pub hash_bits: u32,
    pub tau: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            mode: UnitMode::Document,
            hash_bits: DEFAULT_HASH_BITS,
            tau: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid: Vec<usize>,
    pub retrieval: RetrievalParams,
    pub reader: ReaderModel,
    pub replicates: usize,
    /// Seed of the distractor shuffle.
    pub seed: u64,
}

/// Everything measured at one corpus size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub corpus_size: usize,
    /// One entry per system, in system order.
    pub systems: Vec<SystemEval>,
    /// `recall[n - 1]` is recall@n for n = 1..=tau.
    pub recall: Vec<f64>,
    pub avg_relevant: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub systems: Vec<String>,
    pub sizes: Vec<SizeReport>,
    /// Exact-match curve per system.
    pub curves: Vec<PerformanceCurve>,
    /// Per-size best exact-match rate over all systems.
    pub best: Vec<f64>,
    /// Weighted total regret per system; absent for single-size grids.
    pub total_regret: Vec<Option<f64>>,
}

fn check_systems(systems: &[CutoffModel], tau: usize) -> Result<()> {
    if systems.is_empty() {
        return Err(Error::Empty("system list"));
    }
    for model in systems {
        model.validate()?;
        if let Some(needed) = model.tau() {
            if needed > tau {
                return Err(Error::InvalidParameter(format!(
                    "{} needs {needed} candidates but retrieval keeps {tau}",
                    model.label()
                )));
            }
        }
    }
    Ok(())
}

fn size_report(
    judged: &[Judged],
    m: usize,
    systems: &[CutoffModel],
    config: &SweepConfig,
) -> Result<SizeReport> {
    let evals = systems
        .iter()
        .map(|s| evaluate_system(judged, s, &config.reader, config.replicates))
        .collect::<Result<Vec<_>>>()?;
    let depth = config.retrieval.tau;
    Ok(SizeReport {
        corpus_size: m,
        systems: evals,
        recall: (1..=depth)
            .map(|n| recall_at_n(judged, n))
            .collect::<Result<_>>()?,
        avg_relevant: (1..=depth)
            .map(|n| avg_relevant_at_n(judged, n))
            .collect::<Result<_>>()?,
    })
}

fn assemble(
    systems: &[CutoffModel],
    sizes: Vec<SizeReport>,
    config: &SweepConfig,
) -> Result<SweepReport> {
    let labels: Vec<String> = systems.iter().map(CutoffModel::label).collect();
    let curves = labels
        .iter()
        .enumerate()
        .map(|(s, label)| {
            PerformanceCurve::new(
                label.clone(),
                sizes
                    .iter()
                    .map(|r| (r.corpus_size, r.systems[s].exact_match))
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let best = best_envelope(&curves)?;
    let total_regret = if sizes.len() >= 2 {
        curves
            .iter()
            .map(|c| total_regret(c, &best).map(Some))
            .collect::<Result<_>>()?
    } else {
        vec![None; curves.len()]
    };
    Ok(SweepReport {
        config: config.clone(),
        systems: labels,
        sizes,
        curves,
        best,
        total_regret,
    })
}

/// Evaluate every system at every grid size.
pub fn sweep_corpus_growth(
    setup: &GrowthSetup,
    systems: &[CutoffModel],
    config: &SweepConfig,
) -> Result<SweepReport> {
    check_systems(systems, config.retrieval.tau)?;
    setup.check_grid(&config.grid)?;
    let order = setup.distractor_order(config.seed);
    let sizes = par::try_map(&config.grid, |&m| {
        let judged = setup.judge_at(&order, m, &config.retrieval)?;
        size_report(&judged, m, systems, config)
    })?;
    assemble(systems, sizes, config)
}

/// Evaluate systems on one already-judged corpus of `corpus_size` units.
/// The report has a single size and no regrets; `config.grid` is ignored
/// and replaced by `[corpus_size]`.
pub fn evaluate_corpus(
    judged: &[Judged],
    corpus_size: usize,
    systems: &[CutoffModel],
    config: &SweepConfig,
) -> Result<SweepReport> {
    check_systems(systems, config.retrieval.tau)?;
    let config = SweepConfig {
        grid: vec![corpus_size],
        ..config.clone()
    };
    let size = size_report(judged, corpus_size, systems, &config)?;
    assemble(systems, vec![size], &config)
}

impl SweepReport {
    /// Long-format CSV `system,corpus_size,metric,value`, preceded by `# `
    /// comment lines. System rows carry `exact_match`, `mean_cutoff` and
    /// `coverage`; rows of system `retrieval` carry `recall@n` and
    /// `avg_relevant@n`.
    pub fn write_csv(&self, mut out: impl Write, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "system,corpus_size,metric,value")?;
        for (s, label) in self.systems.iter().enumerate() {
            for size in &self.sizes {
                let e = &size.systems[s];
                let m = size.corpus_size;
                writeln!(out, "{label},{m},exact_match,{}", e.exact_match)?;
                writeln!(out, "{label},{m},mean_cutoff,{}", e.mean_cutoff)?;
                writeln!(out, "{label},{m},coverage,{}", e.coverage)?;
            }
        }
        for size in &self.sizes {
            let m = size.corpus_size;
            for (i, v) in size.recall.iter().enumerate() {
                writeln!(out, "retrieval,{m},recall@{},{v}", i + 1)?;
            }
            for (i, v) in size.avg_relevant.iter().enumerate() {
                writeln!(out, "retrieval,{m},avg_relevant@{},{v}", i + 1)?;
            }
        }
        Ok(())
    }

    pub fn csv_string(&self, header: &[String]) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, header)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// JSON summary: configuration, grid, per-size best, and total regret.
    pub fn summary(&self) -> serde_json::Value {
        let regrets: serde_json::Map<String, serde_json::Value> = self
            .systems
            .iter()
            .zip(&self.total_regret)
            .map(|(s, r)| (s.clone(), serde_json::json!(r)))
            .collect();
        serde_json::json!({
            "config": self.config,
            "systems": self.systems,
            "grid": self.config.grid,
            "best_exact_match": self.best,
            "total_regret": regrets,
            "exact_match": self.curves,
        })
    }

    pub fn regret_of(&self, system: &str) -> Option<f64> {
        let idx = self.systems.iter().position(|s| s == system)?;
        self.total_regret[idx]
    }

    pub fn curve(&self, system: &str) -> Option<&PerformanceCurve> {
        self.curves.iter().find(|c| c.system == system)
    }
}
