//! Knowledge-graph embeddings trained as a bag-of-words classifier with
//! hierarchical softmax and optional subword n-grams.

mod config;
mod embedding;
mod huffman;
mod linkpred;
mod model;
mod subword;

pub use config::KgeConfig;
pub use embedding::{KgEmbedding, SubwordTable, SUBWORD_HASH};
pub use huffman::{build_huffman, HuffmanTree};
pub use linkpred::{hits_at_k, LinkQuery};
pub use model::{train_kge, KgeModel};
pub use subword::{bucket_of, fnv1a, subword_eligible, subword_ngrams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgeError {
    #[error("no labels to build a Huffman tree from")]
    EmptyLabels,
    #[error("no training records")]
    EmptyRecords,
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("token {0:?} has no vector")]
    UnknownToken(String),
    #[error("token {0:?} has a zero vector; cosine is undefined")]
    ZeroVector(String),
    #[error("internal error: {0}")]
    Internal(String),
}
