//! Sentence-level zoning of obituaries.
//!
//! Documents are segmented into sentences, each sentence is assigned one of
//! eight [`Zone`]s by a CNN or BiLSTM(-CRF) tagger, and the results are scored
//! against gold labels. The crate also covers the annotation side: agreement
//! statistics over multiply-annotated sentences and corpus statistics.

pub mod agreement;
pub mod corpus;
pub mod eval;
pub mod guidelines;
pub mod models;
pub mod nn;
pub mod synthetic;
mod zone;

pub use zone::{UnknownZone, Zone};
