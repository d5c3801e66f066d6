//! Turns per-document mentions of medical conditions into a hierarchical,
//! overlapping taxonomy of conditions (via co-occurrence network
//! clustering) and per-location health scores validated against external
//! prevalence statistics through correlation and matching-based causal
//! inference.

pub mod backbone;
pub mod centrality;
pub mod community;
pub mod error;
pub mod graph;
pub mod health;
pub mod inference;
pub mod ingest;
pub mod lexicon;
pub mod stats;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
