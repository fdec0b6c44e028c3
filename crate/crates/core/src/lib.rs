//! Adaptive retrieval cutoffs for two-stage question answering.
//!
//! The pipeline is: ingest a corpus ([`corpus`]), index and retrieve the top-τ
//! candidates per question ([`retrieval`]), choose how many of them to keep
//! ([`cutoff`]), and measure the end-to-end effect with a simulated reader
//! ([`reader`]) across growing corpora ([`eval`], [`sweep`]).

pub mod corpus;
pub mod cutoff;
pub mod error;
pub mod eval;
pub mod io;
mod par;
pub mod reader;
pub mod retrieval;
pub mod sweep;
pub mod synth;

pub use corpus::{Document, Labels, Query, UnitMode};
pub use cutoff::{CutoffModel, OptimizerConfig, OrdinalModel, TrainingSet};
pub use error::{Error, Result};
pub use par::is_parallel;
pub use reader::ReaderModel;
pub use retrieval::{ScoredCandidateList, SparseIndex};
