//! Hierarchical knowledge graphs built from document collections.
//!
//! The pipeline runs in three stages: a corpus of retrieved documents is
//! loaded ([`corpus`]), entity-relation tuples are extracted from it
//! ([`extraction`]), and the tuples are assembled into a three-layer graph
//! whose middle layer holds per-document central concepts ([`hkg`]).
//!
//! Around the pipeline sit the evaluation apparatus ([`quality`]), canonical
//! persistence ([`store`]) and interaction-log analytics ([`analytics`]).
//!
//! Data-parallel loops go through [`exec`]; with the `parallel` feature
//! disabled every [`Execution`] mode runs sequentially.

pub mod analytics;
pub mod corpus;
pub mod exec;
pub mod extraction;
pub mod hkg;
pub mod quality;
pub mod store;

mod text;

pub use exec::Execution;
