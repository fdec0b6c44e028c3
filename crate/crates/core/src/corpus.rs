//! Corpus and question-set ingestion plus answer-containment relevance labels.
//!
//! Both inputs are line-delimited JSON. A corpus line is
//! `{"id": ..., "title": ..., "text": ...}` and a query line is
//! `{"id": ..., "question": ..., "answers": [...]}`. Blank lines are skipped;
//! reported line numbers are 1-based positions in the file.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A retrievable unit of text: a whole document or one of its paragraphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
}

/// Granularity of retrieval units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitMode {
    /// Whole documents, scored by hashed uni+bigram tf-idf dot product.
    Document,
    /// Blank-line separated paragraphs, scored by unigram tf-idf cosine.
    Paragraph,
}

impl std::str::FromStr for UnitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "document" => Ok(UnitMode::Document),
            "paragraph" => Ok(UnitMode::Paragraph),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode `{other}` (expected document|paragraph)"
            ))),
        }
    }
}

impl std::fmt::Display for UnitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UnitMode::Document => "document",
            UnitMode::Paragraph => "paragraph",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceLabel {
    pub query_id: String,
    pub doc_id: String,
    pub relevant: bool,
}

/// Relevance of each candidate `doc_id` for a single query.
pub type Labels = HashMap<String, bool>;

/// Lowercase and collapse whitespace runs to single spaces (trimmed).
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// True iff the normalized text contains any normalized gold answer.
pub fn label_relevance(doc: &Document, query: &Query) -> bool {
    AnswerMatcher::new(query).matches(&normalize(&doc.text))
}

/// Pre-normalized gold answers for repeated containment checks.
#[derive(Debug, Clone)]
pub struct AnswerMatcher {
    answers: Vec<String>,
}

impl AnswerMatcher {
    pub fn new(query: &Query) -> Self {
        Self {
            answers: query.answers.iter().map(|a| normalize(a)).collect(),
        }
    }

    /// `normalized_text` must already be passed through [`normalize`].
    pub fn matches(&self, normalized_text: &str) -> bool {
        self.answers
            .iter()
            .any(|a| !a.is_empty() && normalized_text.contains(a.as_str()))
    }
}

/// Read a corpus file, emitting one unit per record (document mode) or per
/// paragraph (paragraph mode, ids `"<doc_id>#<k>"`).
pub fn ingest_corpus(path: impl AsRef<Path>, unit: UnitMode) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), unit).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_corpus(reader: impl BufRead, unit: UnitMode) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if doc.id.is_empty() {
            return Err(malformed(line_no, "empty id"));
        }
        if normalize(&doc.text).is_empty() {
            return Err(malformed(line_no, "empty text"));
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId {
                line: line_no,
                id: doc.id,
            });
        }
        match unit {
            UnitMode::Document => docs.push(doc),
            UnitMode::Paragraph => {
                for (k, para) in split_paragraphs(&doc.text).into_iter().enumerate() {
                    let id = format!("{}#{k}", doc.id);
                    if !seen.insert(id.clone()) {
                        return Err(Error::DuplicateId { line: line_no, id });
                    }
                    docs.push(Document {
                        id,
                        title: doc.title.clone(),
                        text: para,
                    });
                }
            }
        }
    }
    Ok(docs)
}

/// Split on blank (whitespace-only) lines, dropping empty paragraphs.
pub fn split_paragraphs(text: &str) -> Vec<String> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join("\n"));
    }
    paragraphs
}

pub fn ingest_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_queries(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_queries(reader: impl BufRead) -> Result<Vec<Query>> {
    let mut queries = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<queries>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let query: Query = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if query.id.is_empty() {
            return Err(malformed(line_no, "empty id"));
        }
        if query.answers.is_empty() {
            return Err(malformed(line_no, "no gold answers"));
        }
        if query.answers.iter().any(|a| normalize(a).is_empty()) {
            return Err(malformed(line_no, "empty gold answer"));
        }
        if !seen.insert(query.id.clone()) {
            return Err(Error::DuplicateId {
                line: line_no,
                id: query.id,
            });
        }
        queries.push(query);
    }
    Ok(queries)
}

fn malformed(line: usize, message: &str) -> Error {
    Error::MalformedLine {
        line,
        message: message.to_string(),
    }
}

/// Write records as line-delimited JSON.
pub fn write_jsonl<T: Serialize>(mut out: impl Write, records: &[T]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
