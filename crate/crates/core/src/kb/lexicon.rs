use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::kb::TripleSet;
use crate::text::normalize_label;

/// Source label (normalized) to the set of target labels (original text).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BilingualLexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl BilingualLexicon {
    pub fn get(&self, source: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(&normalize_label(source))
    }

    /// Deterministic single translation: the lexicographically first target.
    pub fn translate(&self, source: &str) -> Option<&str> {
        self.get(source).and_then(|s| s.iter().next()).map(String::as_str)
    }

    pub fn insert(&mut self, source: &str, target: &str) {
        self.entries.entry(normalize_label(source)).or_default().insert(target.to_string());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Tab-separated `source<TAB>target` lines, sorted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (s, ts) in &self.entries {
            for t in ts {
                out.push_str(s);
                out.push('\t');
                out.push_str(t);
                out.push('\n');
            }
        }
        out
    }

    pub fn from_tsv(text: &str) -> BilingualLexicon {
        let mut lex = BilingualLexicon::default();
        for line in text.lines() {
            if let Some((s, t)) = line.split_once('\t') {
                lex.insert(s, t);
            }
        }
        lex
    }
}

/// sameAs pairs that contributed nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconReport {
    pub pairs_seen: usize,
    pub pairs_used: usize,
    pub skipped: Vec<(String, String)>,
}

impl LexiconReport {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "sameas_pairs={} used={} skipped={}",
            self.pairs_seen,
            self.pairs_used,
            self.skipped.len()
        )];
        out.extend(self.skipped.iter().map(|(s, t)| format!("skip\t{s}\t{t}")));
        out
    }
}

fn labels_by_entity<'a>(
    kb: &'a TripleSet,
    label_relations: &BTreeSet<String>,
) -> HashMap<&'a str, Vec<&'a str>> {
    let mut out: HashMap<&str, Vec<&str>> = HashMap::new();
    for t in kb.iter() {
        if label_relations.contains(&t.relation) {
            if let Some(l) = t.object.as_literal() {
                out.entry(t.subject_id()).or_default().push(&l.text);
            }
        }
    }
    out
}

/// Builds source-label to target-label entries along sameAs links.
///
/// sameAs triples are read from both knowledge bases, in either direction:
/// a link counts when one end has labels in `kb_src` and the other in
/// `kb_tgt`. Links where either side has no labels are reported as skipped.
pub fn extract_bilingual_lexicon(
    kb_src: &TripleSet,
    kb_tgt: &TripleSet,
    sameas_relation: &str,
    label_relations: &BTreeSet<String>,
) -> (BilingualLexicon, LexiconReport) {
    let src_labels = labels_by_entity(kb_src, label_relations);
    let tgt_labels = labels_by_entity(kb_tgt, label_relations);
    let mut lex = BilingualLexicon::default();
    let mut report = LexiconReport::default();
    let mut seen = BTreeSet::new();
    for t in kb_src.iter().chain(kb_tgt.iter()) {
        if t.relation != sameas_relation {
            continue;
        }
        let (a, Some(b)) = (t.subject_id(), t.object.resource()) else {
            continue;
        };
        if !seen.insert((a, b)) {
            continue;
        }
        report.pairs_seen += 1;
        let oriented = if src_labels.contains_key(a) && tgt_labels.contains_key(b) {
            Some((a, b))
        } else if src_labels.contains_key(b) && tgt_labels.contains_key(a) {
            Some((b, a))
        } else {
            None
        };
        match oriented {
            Some((s, g)) => {
                report.pairs_used += 1;
                for sl in &src_labels[s] {
                    for tl in &tgt_labels[g] {
                        lex.insert(sl, tl);
                    }
                }
            }
            None => report.skipped.push((a.to_string(), b.to_string())),
        }
    }
    (lex, report)
}
