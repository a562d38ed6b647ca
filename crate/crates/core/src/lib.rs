//! Validation and repair of relation labels for candidate RDF tuples.
//!
//! Candidate tuples produced by an external relation-extraction model are
//! checked against the knowledge graph they are about to join. Each tuple's
//! localized pattern (the neighborhood around the tuple) is embedded as a
//! multiset of relation-label walks through the center edge, and compared
//! with the patterns of existing tuples that carry the same label. Tuples with
//! enough similar patterns are valid; the rest are repaired to the label with
//! the best joint acquisition/linkage score that validates, or dropped.
//!
//! Module map:
//! - [`graph_store`]: interned, indexed multigraph of tuples plus TSV I/O.
//! - [`pattern`]: localized pattern extraction.
//! - [`embedding`]: central-walk embeddings and their similarity.
//! - [`validation`]: sampled support sets and valid/invalid/unknown status.
//! - [`repair`]: prediction records, linkage prediction, joint-score repair.
//! - [`stream`]: sliced enhancement loop, holds, auxiliary label mapping.
//! - [`evalkit`]: error injection, scoring, error detection, benchmarks.

pub mod embedding;
pub mod error;
pub mod evalkit;
pub mod graph_store;
mod hash;
pub mod pattern;
pub mod repair;
pub mod stream;
pub mod validation;

pub use error::{Error, Result};
pub use graph_store::{EntityId, GraphRead, GraphStore, Overlay, RelationLabel, Symbols, Tuple};
