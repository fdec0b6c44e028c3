//! Per-query document-count policies.
//!
//! A [`CutoffModel`] maps the normalized top-τ score vector of a query to the
//! number of candidates handed to the reader: a fixed count, the
//! cumulative-confidence threshold rule, or an ordinal ridge regression that
//! predicts the rank of the first answer-bearing candidate plus an offset.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Labels;
use crate::error::{Error, Result};
use crate::retrieval::ScoredCandidateList;

/// Allowed deviation of a score vector's sum from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_THRESHOLD_TAU: usize = 15;
pub const DEFAULT_THETA: f64 = 0.75;
pub const DEFAULT_ORDINAL_TAU: usize = 20;

const MODEL_FORMAT: &str = "adaptir-cutoff-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CutoffModel {
    /// Always keep `n` candidates (or all of them if fewer exist).
    Fixed { n: usize },
    /// Largest prefix whose cumulative confidence stays below `theta`.
    Threshold { theta: f64, tau: usize },
    /// `clamp(ceil(s . beta) + b, 1, tau)`.
    Ordinal(OrdinalModel),
}

/// Fitted ordinal ridge regression with its training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalModel {
    pub tau: usize,
    pub beta: Vec<f64>,
    pub b: usize,
    pub lambda: f64,
    /// Smoothed objective minimized during training.
    pub surrogate_loss: f64,
    /// `||ceil(X beta) - y||_1 + lambda ||beta||_2` on the training rows.
    pub true_loss: f64,
}

impl CutoffModel {
    pub fn fixed(n: usize) -> Result<Self> {
        let model = CutoffModel::Fixed { n };
        model.validate()?;
        Ok(model)
    }

    pub fn threshold(theta: f64, tau: usize) -> Result<Self> {
        let model = CutoffModel::Threshold { theta, tau };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CutoffModel::Fixed { n } if *n == 0 => Err(Error::InvalidParameter(
                "fixed cutoff n must be >= 1".into(),
            )),
            CutoffModel::Fixed { .. } => Ok(()),
            CutoffModel::Threshold { theta, tau } => {
                check_theta(*theta)?;
                check_tau(*tau)
            }
            CutoffModel::Ordinal(m) => {
                check_tau(m.tau)?;
                if m.beta.len() != m.tau {
                    return Err(Error::LengthMismatch {
                        expected: m.tau,
                        actual: m.beta.len(),
                    });
                }
                if m.beta.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("beta"));
                }
                if !(m.lambda.is_finite() && m.lambda >= 0.0) {
                    return Err(Error::InvalidParameter(format!("lambda {} < 0", m.lambda)));
                }
                Ok(())
            }
        }
    }

    /// Number of candidates the model consumes; `None` for fixed cutoffs.
    pub fn tau(&self) -> Option<usize> {
        match self {
            CutoffModel::Fixed { .. } => None,
            CutoffModel::Threshold { tau, .. } => Some(*tau),
            CutoffModel::Ordinal(m) => Some(m.tau),
        }
    }

    /// Short system name used in reports, e.g. `top-5`, `threshold-0.75`, `ordinal-b1`.
    pub fn label(&self) -> String {
        match self {
            CutoffModel::Fixed { n } => format!("top-{n}"),
            CutoffModel::Threshold { theta, .. } => format!("threshold-{theta}"),
            CutoffModel::Ordinal(m) => format!("ordinal-b{}", m.b),
        }
    }

    /// Same model with the ordinal offset replaced; other variants unchanged.
    pub fn with_offset(&self, b: usize) -> Self {
        match self {
            CutoffModel::Ordinal(m) => CutoffModel::Ordinal(OrdinalModel { b, ..m.clone() }),
            other => other.clone(),
        }
    }

    /// Cutoff for one query's candidate list, adapting its length to the model.
    pub fn cutoff_for(&self, candidates: &ScoredCandidateList) -> Result<usize> {
        match self.tau() {
            None => predict_cutoff(self, &candidates.normalized_scores()),
            Some(tau) => predict_cutoff(self, &candidates.score_vector(tau)),
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "theta must be in (0, 1], got {theta}"
        )))
    }
}

fn check_tau(tau: usize) -> Result<()> {
    if tau == 0 {
        return Err(Error::InvalidParameter("tau must be >= 1".into()));
    }
    Ok(())
}

/// Reject empty, non-finite, negative, or non-unit-sum score vectors.
pub fn check_normalized(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Empty("score vector"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score vector"));
    }
    let sum: f64 = scores.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE || scores.iter().any(|&s| s < 0.0) {
        return Err(Error::Unnormalized { sum });
    }
    Ok(())
}

/// `max { k : s_1 + ... + s_k < theta }`, or 1 when even `s_1 >= theta`.
pub fn threshold_cutoff(scores: &[f64], theta: f64) -> Result<usize> {
    check_normalized(scores)?;
    check_theta(theta)?;
    let mut cumulative = 0.0;
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        cumulative += s;
        if cumulative < theta {
            best = k + 1;
        }
    }
    Ok(best.clamp(1, scores.len()))
}

/// 1-based position of the first relevant candidate, `None` if none is relevant.
pub fn first_relevant_rank(
    candidates: &ScoredCandidateList,
    labels: &Labels,
) -> Result<Option<usize>> {
    for (pos, entry) in candidates.entries.iter().enumerate() {
        match labels.get(&entry.doc_id) {
            Some(true) => return Ok(Some(pos + 1)),
            Some(false) => {}
            None => return Err(Error::MissingLabel(entry.doc_id.clone())),
        }
    }
    Ok(None)
}

/// `ceil(s . beta)` before offset and clamping.
pub fn raw_ordinal_rank(beta: &[f64], scores: &[f64]) -> i64 {
    dot(beta, scores).ceil() as i64
}

pub fn predict_cutoff(model: &CutoffModel, scores: &[f64]) -> Result<usize> {
    match model {
        CutoffModel::Fixed { n } => {
            if scores.is_empty() {
                return Err(Error::Empty("score vector"));
            }
            Ok((*n).min(scores.len()).max(1))
        }
        CutoffModel::Threshold { theta, tau } => {
            check_length(*tau, scores)?;
            threshold_cutoff(scores, *theta)
        }
        CutoffModel::Ordinal(m) => {
            check_length(m.tau, scores)?;
            check_normalized(scores)?;
            let raw = raw_ordinal_rank(&m.beta, scores);
            let n = raw.saturating_add(m.b as i64).clamp(1, m.tau as i64);
            Ok(n as usize)
        }
    }
}

fn check_length(tau: usize, scores: &[f64]) -> Result<()> {
    if scores.len() != tau {
        return Err(Error::LengthMismatch {
            expected: tau,
            actual: scores.len(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Normalized score rows with the 1-based rank of their first relevant candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    tau: usize,
    rows: Vec<Vec<f64>>,
    targets: Vec<usize>,
}

impl TrainingSet {
    pub fn new(tau: usize, rows: Vec<Vec<f64>>, targets: Vec<usize>) -> Result<Self> {
        check_tau(tau)?;
        if rows.len() != targets.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                actual: targets.len(),
            });
        }
        for row in &rows {
            check_length(tau, row)?;
            check_normalized(row)?;
        }
        if let Some(&y) = targets.iter().find(|&&y| y == 0 || y > tau) {
            return Err(Error::InvalidParameter(format!(
                "target rank {y} outside [1, {tau}]"
            )));
        }
        Ok(Self { tau, rows, targets })
    }

    /// Build from retrievals and labels, dropping queries with no relevant
    /// candidate among the first `tau`. Returns the set and the dropped count.
    pub fn from_retrievals<'a>(
        tau: usize,
        items: impl IntoIterator<Item = (&'a ScoredCandidateList, &'a Labels)>,
    ) -> Result<(Self, usize)> {
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        let mut excluded = 0;
        for (list, labels) in items {
            let truncated = ScoredCandidateList {
                query_id: list.query_id.clone(),
                tau,
                entries: list.entries.iter().take(tau).cloned().collect(),
            };
            match first_relevant_rank(&truncated, labels)? {
                Some(rank) => {
                    rows.push(list.score_vector(tau));
                    targets.push(rank);
                }
                None => excluded += 1,
            }
        }
        Ok((Self::new(tau, rows, targets)?, excluded))
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }
}

/// Subgradient descent schedule for [`fit_ordinal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub iterations: usize,
    /// Step at iteration `t` (1-based) is `initial_step / sqrt(t)`, applied to
    /// the per-row objective. Coefficients live on the rank scale (up to τ),
    /// so the step has to be of that order.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            iterations: 2_000,
            initial_step: 20.0,
        }
    }
}

/// `sum_i |x_i . beta - (y_i - 1/2)| + lambda ||beta||_2^2`.
///
/// The targets sit at the midpoints of the ceiling intervals `(y - 1, y]`.
pub fn surrogate_loss(train: &TrainingSet, beta: &[f64], lambda: f64) -> f64 {
    let fit: f64 = train
        .rows
        .iter()
        .zip(&train.targets)
        .map(|(x, &y)| (dot(x, beta) - (y as f64 - 0.5)).abs())
        .sum();
    fit + lambda * dot(beta, beta)
}

/// `||ceil(X beta) - y||_1 + lambda ||beta||_2` (unsquared norm).
pub fn true_loss(train: &TrainingSet, beta: &[f64], lambda: f64) -> f64 {
    let fit: f64 = train
        .rows
        .iter()
        .zip(&train.targets)
        .map(|(x, &y)| (raw_ordinal_rank(beta, x) - y as i64).unsigned_abs() as f64)
        .sum();
    fit + lambda * dot(beta, beta).sqrt()
}

/// Fit `beta` by proximal subgradient descent on [`surrogate_loss`] from a
/// zero start, keeping the best iterate. Single-threaded and deterministic.
pub fn fit_ordinal(
    train: &TrainingSet,
    lambda: f64,
    b: usize,
    config: &OptimizerConfig,
) -> Result<CutoffModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if !(config.initial_step.is_finite() && config.initial_step > 0.0) {
        return Err(Error::InvalidParameter("initial step must be > 0".into()));
    }
    let tau = train.tau;
    let n = train.len() as f64;
    let mut beta = vec![0.0; tau];
    let mut best = beta.clone();
    let mut best_loss = surrogate_loss(train, &beta, lambda);
    let mut grad = vec![0.0; tau];
    for t in 1..=config.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, &y) in train.rows.iter().zip(&train.targets) {
            let residual = dot(x, &beta) - (y as f64 - 0.5);
            let sign = if residual > 0.0 {
                1.0
            } else if residual < 0.0 {
                -1.0
            } else {
                0.0
            };
            if sign != 0.0 {
                for (g, xj) in grad.iter_mut().zip(x) {
                    *g += sign * xj;
                }
            }
        }
        // Steps are taken on the per-row objective J / N.
        let step = config.initial_step / (t as f64).sqrt() / n;
        let shrink = 1.0 + 2.0 * lambda * step;
        for (bj, g) in beta.iter_mut().zip(&grad) {
            *bj = (*bj - step * g) / shrink;
        }
        let loss = surrogate_loss(train, &beta, lambda);
        if !loss.is_finite() {
            return Err(Error::NonFinite("training objective"));
        }
        if loss < best_loss {
            best_loss = loss;
            best.copy_from_slice(&beta);
        }
    }
    let true_loss = true_loss(train, &best, lambda);
    Ok(CutoffModel::Ordinal(OrdinalModel {
        tau,
        beta: best,
        b,
        lambda,
        surrogate_loss: best_loss,
        true_loss,
    }))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    /// Free-form record of the run that produced the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
    #[serde(flatten)]
    model: CutoffModel,
}

/// Serialize a model as version-tagged JSON text.
pub fn model_to_string(model: &CutoffModel) -> Result<String> {
    model_to_string_with(model, None)
}

/// Like [`model_to_string`], embedding `config` under the `config` key.
/// Loading ignores it.
pub fn model_to_string_with(
    model: &CutoffModel,
    config: Option<&serde_json::Value>,
) -> Result<String> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        config: config.cloned(),
        model: model.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn model_from_str(text: &str) -> Result<CutoffModel> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        version: u32,
    }
    let header: Header = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if header.format != MODEL_FORMAT {
        return Err(Error::Format(format!(
            "not a cutoff model (`{}`)",
            header.format
        )));
    }
    if header.version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: header.version,
            expected: MODEL_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    file.model.validate()?;
    Ok(file.model)
}

pub fn save_model(model: &CutoffModel, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic_bytes(path.as_ref(), model_to_string(model)?.as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CutoffModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}
