//! Brute-force oracles shared by the integration and acceptance tests. They
//! are written from the documented contracts and deliberately avoid the
//! library's own helpers.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use adaptir_core::{Document, UnitMode};
use rand::Rng;

pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn fnv(s: &str) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(1099511628211);
    }
    h
}

fn features(text: &str, mode: UnitMode, bits: u32) -> Vec<String> {
    let toks = tokens(text);
    match mode {
        UnitMode::Paragraph => toks,
        UnitMode::Document => {
            let mut f: Vec<String> = Vec::new();
            for t in &toks {
                f.push((fnv(t) % (1u64 << bits)).to_string());
            }
            for w in toks.windows(2) {
                f.push((fnv(&format!("{} {}", w[0], w[1])) % (1u64 << bits)).to_string());
            }
            f
        }
    }
}

fn dim_key(f: &str, mode: UnitMode) -> (u64, String) {
    match mode {
        UnitMode::Document => (f.parse().unwrap(), String::new()),
        UnitMode::Paragraph => (0, f.to_string()),
    }
}

/// Dense tf-idf ranking: `(id, score)` sorted by score descending, then id.
pub fn dense_rank(
    corpus: &[Document],
    mode: UnitMode,
    bits: u32,
    question: &str,
) -> Vec<(String, f64)> {
    let n = corpus.len() as f64;
    let unit_feats: Vec<Vec<String>> = corpus
        .iter()
        .map(|d| features(&d.text, mode, bits))
        .collect();
    let query_feats = features(question, mode, bits);
    // Dense dimension order: ascending bucket, or ascending term.
    let mut dims: BTreeSet<(u64, String)> = BTreeSet::new();
    for f in unit_feats.iter().flatten().chain(&query_feats) {
        dims.insert(dim_key(f, mode));
    }
    let dims: Vec<(u64, String)> = dims.into_iter().collect();
    let pos: BTreeMap<&(u64, String), usize> =
        dims.iter().enumerate().map(|(i, d)| (d, i)).collect();
    let tf = |feats: &[String]| {
        let mut v = vec![0.0f64; dims.len()];
        for f in feats {
            v[pos[&dim_key(f, mode)]] += 1.0;
        }
        v
    };
    let unit_tf: Vec<Vec<f64>> = unit_feats.iter().map(|f| tf(f)).collect();
    let idf: Vec<f64> = (0..dims.len())
        .map(|j| {
            let df = unit_tf.iter().filter(|v| v[j] > 0.0).count() as f64;
            let x = ((n - df + 0.5) / (df + 0.5)).ln();
            if x > 0.0 {
                x
            } else {
                0.0
            }
        })
        .collect();
    let weigh = |v: &[f64]| -> Vec<f64> { v.iter().zip(&idf).map(|(a, b)| a * b).collect() };
    let q = weigh(&tf(&query_feats));
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut ranked: Vec<(String, f64)> = corpus
        .iter()
        .zip(&unit_tf)
        .map(|(d, v)| {
            let u = weigh(v);
            let dot: f64 = q
                .iter()
                .zip(&u)
                .map(|(a, b)| a * b)
                .fold(0.0, |acc, x| acc + x);
            let score = match mode {
                UnitMode::Document => dot,
                UnitMode::Paragraph => {
                    let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if qn == 0.0 || un == 0.0 {
                        0.0
                    } else {
                        dot / (qn * un)
                    }
                }
            };
            (d.id.clone(), score)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

const WORDS: &[&str] = &[
    "alpha", "Beta", "gamma", "delta", "eps", "zeta", "x1", "éclair", "7", "eta",
];

fn random_text(rng: &mut impl Rng, max_tokens: usize) -> String {
    let len = rng.random_range(0..=max_tokens);
    let seps = [" ", ", ", "-", "  ", ". ", "\n"];
    let mut text = String::new();
    for i in 0..len {
        if i > 0 {
            text.push_str(seps[rng.random_range(0..seps.len())]);
        }
        text.push_str(WORDS[rng.random_range(0..WORDS.len())]);
    }
    text
}

/// Up to 20 short documents over a 10-word vocabulary, ids in random order.
pub fn random_corpus(rng: &mut impl Rng) -> Vec<Document> {
    let n = rng.random_range(1..=20);
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    ids.into_iter()
        .map(|i| Document {
            id: format!("doc{i:02}"),
            title: String::new(),
            text: random_text(rng, 12),
        })
        .collect()
}

pub fn random_question(rng: &mut impl Rng) -> String {
    let mut q = random_text(rng, 5);
    if rng.random_bool(0.2) {
        q.push_str(" unseen");
    }
    q
}

/// Random normalized score vector of length `tau`, sorted descending, with a
/// spread of peakedness.
pub fn random_scores(rng: &mut impl Rng, tau: usize) -> Vec<f64> {
    let power = rng.random_range(0.5..6.0);
    let mut raw: Vec<f64> = (0..tau).map(|_| rng.random::<f64>().powf(power)).collect();
    if rng.random_bool(0.1) {
        raw.iter_mut().for_each(|x| *x = 1.0);
    }
    raw.sort_by(|a, b| b.total_cmp(a));
    let sum: f64 = raw.iter().sum();
    if sum == 0.0 {
        return vec![1.0 / tau as f64; tau];
    }
    raw.iter().map(|x| x / sum).collect()
}

/// Literal prefix scan: largest k with cumulative sum < theta, at least 1.
pub fn threshold_oracle(scores: &[f64], theta: f64) -> usize {
    let mut best = 0;
    for k in 1..=scores.len() {
        let prefix: f64 = scores[..k].iter().sum();
        if prefix < theta {
            best = k;
        }
    }
    best.clamp(1, scores.len())
}

pub fn ordinal_oracle(beta: &[f64], scores: &[f64], b: usize, tau: usize) -> usize {
    let dot: f64 = beta.iter().zip(scores).map(|(x, y)| x * y).sum();
    let raw = dot.ceil() as i64 + b as i64;
    raw.clamp(1, tau as i64) as usize
}
