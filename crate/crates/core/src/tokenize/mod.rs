//! Word-level vocabularies and byte-pair encoding with protected tokens.

mod bpe;
mod vocab;

pub use bpe::{apply_bpe, de_bpe, learn_bpe, Bpe, MergeTable, END_OF_WORD};
pub use vocab::{build_vocab, Vocabulary, BOS, BOS_ID, EOS, EOS_ID, PAD, PAD_ID, RESERVED, UNK, UNK_ID};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TokenizeError {
    #[error("vocabulary size must exceed the 4 reserved tokens, got {0}")]
    VocabTooSmall(usize),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Splits a line into whitespace-separated tokens.
pub fn tokens(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}
