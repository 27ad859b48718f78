//! Corpus emotion-dynamics toolkit.
//!
//! Pipeline stages: ingest raw post collections into a cleaned canonical
//! corpus, score posts against word-emotion lexicons, aggregate into
//! monthly densities and home-base / variability metrics in the
//! warmth-competence space, compare eras statistically, classify stance
//! through a chat endpoint, and render figure/table artifacts.

pub mod config;
pub mod corpus;
pub mod dynamics;
pub mod error;
pub mod lexicon;
pub mod pipeline;
pub mod report;
pub mod stance;
pub mod stats;

pub use error::{ErrorClass, PipelineError};
