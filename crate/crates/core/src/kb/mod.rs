//! Knowledge-base ingest: N-Triples parsing, label indexing, bilingual
//! lexicon extraction and classification records for KGE training.

mod labels;
mod lexicon;
mod ntriples;
mod records;
mod sameas;

pub use labels::{build_label_index, Candidate, LabelIndex};
pub use lexicon::{extract_bilingual_lexicon, BilingualLexicon, LexiconReport};
pub use ntriples::{
    format_triple, parse_line, parse_ntriples, parse_ntriples_reader, parse_ntriples_with,
    serialize_ntriples, Literal, ParseLimits, Term, Triple, TripleSet,
};
pub use records::{
    read_records, triples_to_records, write_records, KgeRecord, KgeRecordSet, RecordMode,
    RecordOptions, RecordsOutput,
};
pub use sameas::{materialize_sameas, sameas_classes};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("line {line}: invalid UTF-8 at byte {byte}")]
    Encoding { line: usize, byte: usize },
    #[error("knowledge base is empty")]
    EmptyKb,
    #[error("max_bag must be at least 2, got {0}")]
    BagTooSmall(usize),
    #[error("record file line {line}: {message}")]
    RecordFormat { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
