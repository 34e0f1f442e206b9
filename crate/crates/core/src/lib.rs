//! Semantic dataset discovery: corpus ingestion, LLM enrichment, HNSW
//! retrieval over hypothetical schemas, and result-grounded assistance.

pub mod api;
pub mod assist;
pub mod catalog;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod engine;
pub mod enrich;
pub mod granularity;
pub mod index;
pub mod llm;
pub mod search;
pub mod synthetic;
pub mod text;

pub use embedding::{cosine, EmbeddingVector};
