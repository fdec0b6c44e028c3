//! Seeded synthetic question-answering benchmark.
//!
//! Each query has a handful of topic words, one unique answer token, and one
//! seeded document stating the answer next to the full topic phrase. The
//! distractor pool mixes three kinds of documents:
//!
//! * strong distractors repeat the query's topic phrase (and sometimes more
//!   topic words), so they compete with the seeded document for rank 1; a
//!   fraction of them also mention the answer,
//! * weak distractors contain a scattered subset of the topic words,
//! * off-topic documents contain only filler.
//!
//! Growing the corpus therefore pushes the seeded document down the ranking
//! while adding answer-bearing copies, which is the regime where fixed
//! candidate counts stop being optimal.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Query};
use crate::error::{Error, Result};
use crate::reader::splitmix64;

/// Words present in (almost) every document; their idf is floored to zero.
const FUNCTION_WORDS: [&str; 6] = ["the", "of", "is", "what", "a", "in"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub queries: usize,
    pub train_queries: usize,
    pub distractors: usize,
    pub topic_words: usize,
    pub filler_vocab: usize,
    pub doc_len: usize,
    /// Share of distractors that repeat a topic phrase.
    pub strong_rate: f64,
    /// Share of distractors with a scattered subset of topic words.
    pub weak_rate: f64,
    /// Probability that a strong distractor mentions the answer.
    pub answer_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            queries: 200,
            train_queries: 200,
            distractors: 20_000,
            topic_words: 4,
            filler_vocab: 5_000,
            doc_len: 30,
            strong_rate: 0.3,
            weak_rate: 0.5,
            answer_rate: 0.1,
            seed: 42,
        }
    }
}

/// Evaluation and training queries with their seeded documents and a shared
/// distractor pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub queries: Vec<Query>,
    pub train_queries: Vec<Query>,
    /// One answer-bearing document per evaluation query, in query order.
    pub seeded: Vec<Document>,
    /// One answer-bearing document per training query, in query order.
    pub train_seeded: Vec<Document>,
    pub pool: Vec<Document>,
}

impl Benchmark {
    /// Seeded documents (evaluation, then training) followed by the pool; the
    /// layout expected by [`crate::sweep::GrowthSetup::partition`].
    pub fn corpus(&self) -> Vec<Document> {
        self.seeded
            .iter()
            .chain(&self.train_seeded)
            .chain(&self.pool)
            .cloned()
            .collect()
    }
}

struct Topic {
    words: Vec<String>,
    answer: String,
}

pub fn generate(config: &SynthConfig) -> Result<Benchmark> {
    if config.queries == 0 || config.topic_words == 0 || config.filler_vocab == 0 {
        return Err(Error::InvalidParameter(
            "synthetic benchmark needs queries, topic words and filler".into(),
        ));
    }
    for (name, p) in [
        ("strong_rate", config.strong_rate),
        ("weak_rate", config.weak_rate),
        ("answer_rate", config.answer_rate),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("{name} must be in [0, 1]")));
        }
    }
    if config.strong_rate + config.weak_rate > 1.0 {
        return Err(Error::InvalidParameter(
            "strong_rate + weak_rate must be <= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0x5359_4e54_4845_5449));
    let total = config.queries + config.train_queries;
    let topics: Vec<Topic> = (0..total)
        .map(|i| Topic {
            words: (0..config.topic_words)
                .map(|j| format!("t{i:05}w{j}"))
                .collect(),
            answer: format!("ans{i:05}z"),
        })
        .collect();
    let filler: Vec<String> = (0..config.filler_vocab).map(|k| format!("f{k}")).collect();
    // Document ids are a random permutation so id tie-breaking favours no kind.
    let mut doc_ids: Vec<usize> = (0..total + config.distractors).collect();
    doc_ids.shuffle(&mut rng);

    let mut queries = Vec::with_capacity(total);
    let mut seeded = Vec::with_capacity(total);
    for (i, topic) in topics.iter().enumerate() {
        let (prefix, idx) = if i < config.queries {
            ("q", i)
        } else {
            ("t", i - config.queries)
        };
        queries.push(Query {
            id: format!("{prefix}{idx:05}"),
            question: format!("what is the {}", topic.words.join(" ")),
            answers: vec![topic.answer.clone()],
        });
        let mut words = filler_words(&mut rng, &filler, config.doc_len);
        let at = rng.random_range(0..=words.len());
        let mut phrase = topic_phrase(&mut rng, topic);
        phrase.extend(["is", "the", "answer"].map(String::from));
        phrase.push(topic.answer.clone());
        words.splice(at..at, phrase);
        seeded.push(Document {
            id: format!("d{:06}", doc_ids[i]),
            title: format!("seed {prefix}{idx:05}"),
            text: words.join(" "),
        });
    }

    let mut pool = Vec::with_capacity(config.distractors);
    for d in 0..config.distractors {
        let mut words = filler_words(&mut rng, &filler, config.doc_len);
        let kind: f64 = rng.random();
        let topic = &topics[rng.random_range(0..total)];
        if kind < config.strong_rate {
            let mut phrase = topic_phrase(&mut rng, topic);
            if rng.random_bool(config.answer_rate) {
                phrase.push(topic.answer.clone());
            }
            let at = rng.random_range(0..=words.len());
            words.splice(at..at, phrase);
        } else if kind < config.strong_rate + config.weak_rate {
            for w in &topic.words {
                if rng.random_bool(0.5) {
                    let at = rng.random_range(0..=words.len());
                    words.insert(at, w.clone());
                }
            }
        }
        pool.push(Document {
            id: format!("d{:06}", doc_ids[total + d]),
            title: String::new(),
            text: words.join(" "),
        });
    }

    let train_queries = queries.split_off(config.queries);
    let train_seeded = seeded.split_off(config.queries);
    Ok(Benchmark {
        queries,
        train_queries,
        seeded,
        train_seeded,
        pool,
    })
}

/// Full topic phrase followed by a random subset of repeated topic words.
fn topic_phrase(rng: &mut ChaCha8Rng, topic: &Topic) -> Vec<String> {
    let mut phrase = topic.words.clone();
    for w in &topic.words {
        if rng.random_bool(0.5) {
            phrase.push(w.clone());
        }
    }
    phrase
}

fn filler_words(rng: &mut ChaCha8Rng, filler: &[String], len: usize) -> Vec<String> {
    let mut words: Vec<String> = (0..len)
        .map(|_| filler[rng.random_range(0..filler.len())].clone())
        .collect();
    words.extend(FUNCTION_WORDS.iter().map(|w| w.to_string()));
    words.shuffle(rng);
    words
}
