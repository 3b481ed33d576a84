//! Core building blocks for knowledge-graph augmented neural machine
//! translation: knowledge-base ingest, KG embeddings, entity linking,
//! subword tokenization, embedding fusion and evaluation metrics.

pub mod eval;
pub mod fusion;
pub mod kb;
pub mod kge;
pub mod linker;
pub mod par;
pub mod text;
pub mod tokenize;
