//! Classification records for bag-of-words KG embedding training.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::kb::{KbError, Term, TripleSet};
use crate::text::{label_words, IriTokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    Structure,
    Semantic,
}

impl std::str::FromStr for RecordMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "structure" => Ok(RecordMode::Structure),
            "semantic" => Ok(RecordMode::Semantic),
            other => Err(format!("unknown mode {other:?} (expected structure|semantic)")),
        }
    }
}

/// One bag of input tokens and its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KgeRecord {
    pub features: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KgeRecordSet {
    pub records: Vec<KgeRecord>,
}

impl KgeRecordSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RecordOptions {
    pub label_relations: BTreeSet<String>,
    pub tokenizer: IriTokenizer,
}

impl Default for RecordOptions {
    fn default() -> Self {
        RecordOptions {
            label_relations: [crate::text::RDFS_LABEL.to_string()].into(),
            tokenizer: IriTokenizer::default(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RecordsOutput {
    pub records: KgeRecordSet,
    pub warnings: Vec<String>,
}

/// Turns triples into link-prediction records.
///
/// Every IRI-object triple `(h, r, t)` yields `{h, r} -> t` and
/// `{t, r} -> h`. In semantic mode the input side is extended with the label
/// words of its entity (up to `max_bag` tokens, graph tokens kept first) and
/// each label triple adds `{label words} -> entity`. Other literal triples
/// are ignored.
pub fn triples_to_records(
    kb: &TripleSet,
    mode: RecordMode,
    max_bag: usize,
    opts: &RecordOptions,
) -> Result<RecordsOutput, KbError> {
    if kb.is_empty() {
        return Err(KbError::EmptyKb);
    }
    if max_bag < 2 {
        return Err(KbError::BagTooSmall(max_bag));
    }
    let tok = &opts.tokenizer;
    let mut words: HashMap<&str, Vec<String>> = HashMap::new();
    let mut label_triples = 0usize;
    if mode == RecordMode::Semantic {
        for t in kb.iter() {
            if !opts.label_relations.contains(&t.relation) {
                continue;
            }
            if let Some(lit) = t.object.as_literal() {
                label_triples += 1;
                let ws = words.entry(t.subject_id()).or_default();
                for w in label_words(&lit.text) {
                    if !ws.contains(&w) {
                        ws.push(w);
                    }
                }
            }
        }
    }

    let bag = |entity: &str, rel: &str| -> Vec<String> {
        let mut b = vec![tok.token(entity), tok.token(rel)];
        if let Some(ws) = words.get(entity) {
            b.extend(ws.iter().take(max_bag - 2).cloned());
        }
        b
    };

    let mut out = RecordsOutput::default();
    for t in kb.iter() {
        match &t.object {
            Term::Iri(o) | Term::Blank(o) => {
                let h = t.subject_id();
                out.records.records.push(KgeRecord { features: bag(h, &t.relation), label: tok.token(o) });
                out.records.records.push(KgeRecord { features: bag(o, &t.relation), label: tok.token(h) });
            }
            Term::Literal(lit) => {
                if mode == RecordMode::Semantic && opts.label_relations.contains(&t.relation) {
                    let mut ws = label_words(&lit.text);
                    ws.truncate(max_bag);
                    if !ws.is_empty() {
                        out.records
                            .records
                            .push(KgeRecord { features: ws, label: tok.token(t.subject_id()) });
                    }
                }
            }
        }
    }
    if mode == RecordMode::Semantic && label_triples == 0 {
        out.warnings
            .push("semantic mode: knowledge base has no label triples; emitted structure records only".into());
    }
    Ok(out)
}

/// One record per line: features separated by spaces, a tab, then the label.
pub fn write_records<W: Write>(set: &KgeRecordSet, mut w: W) -> std::io::Result<()> {
    for r in &set.records {
        writeln!(w, "{}\t{}", r.features.join(" "), r.label)?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<KgeRecordSet, KbError> {
    let mut set = KgeRecordSet::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (feats, label) = line.split_once('\t').ok_or_else(|| KbError::RecordFormat {
            line: i + 1,
            message: "missing tab separator".into(),
        })?;
        let features: Vec<String> = feats.split(' ').filter(|s| !s.is_empty()).map(String::from).collect();
        if features.is_empty() || label.is_empty() || label.contains(char::is_whitespace) {
            return Err(KbError::RecordFormat { line: i + 1, message: "empty features or bad label".into() });
        }
        set.records.push(KgeRecord { features, label: label.to_string() });
    }
    Ok(set)
}
