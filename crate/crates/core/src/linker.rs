//! Dictionary entity linking and the `surface|URI` annotation format.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::kb::{Candidate, LabelIndex, TripleSet};
use crate::par::{self, ExecMode};
use crate::text::{encode_uri_component, label_words, local_name, normalize_label, DBR, DBR_DE};

pub const DEFAULT_MAX_SPAN: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("mention has no candidates")]
    NoCandidates,
    #[error("max_span must be at least 1")]
    ZeroSpan,
    #[error("source has {src} sentences but target has {tgt}")]
    LineMismatch { src: usize, tgt: usize },
}

/// Escapes a token that stays outside any annotation.
pub fn escape_token(t: &str) -> String {
    let mut out = String::with_capacity(t.len());
    for c in t.chars() {
        if c == '\\' || c == '|' {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn escape_surface_part(t: &str) -> String {
    let mut out = String::with_capacity(t.len());
    for c in t.chars() {
        if matches!(c, '\\' | '|' | '_') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn unescape(t: &str) -> String {
    let mut out = String::with_capacity(t.len());
    let mut it = t.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            if let Some(n) = it.next() {
                out.push(n);
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Byte offsets of unescaped occurrences of `sep`.
fn unescaped_positions(t: &str, sep: char) -> Vec<usize> {
    let mut out = Vec::new();
    let mut escaped = false;
    for (i, c) in t.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == sep {
            out.push(i);
        }
    }
    out
}

/// Builds `w1_w2|uri` from the surface tokens of a mention.
pub fn annotation_token<S: AsRef<str>>(surface: &[S], uri_token: &str) -> String {
    let parts: Vec<String> = surface.iter().map(|s| escape_surface_part(s.as_ref())).collect();
    format!("{}|{uri_token}", parts.join("_"))
}

/// Splits an annotation token at its last unescaped `|`.
pub fn split_annotation(t: &str) -> Option<(&str, &str)> {
    let pos = *unescaped_positions(t, '|').last()?;
    Some((&t[..pos], &t[pos + 1..]))
}

pub fn is_annotation_token(t: &str) -> bool {
    split_annotation(t).is_some()
}

/// The URI part of an annotation token.
pub fn uri_part(t: &str) -> Option<&str> {
    split_annotation(t).map(|(_, u)| u)
}

/// Recovers the original tokens behind one (possibly annotated) token.
pub fn deannotate_token(t: &str) -> Vec<String> {
    match split_annotation(t) {
        Some((surface, _)) => {
            let mut out = Vec::new();
            let mut start = 0;
            for p in unescaped_positions(surface, '_') {
                out.push(unescape(&surface[start..p]));
                start = p + 1;
            }
            out.push(unescape(&surface[start..]));
            out
        }
        None => vec![unescape(t)],
    }
}

pub fn deannotate<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens.iter().flat_map(|t| deannotate_token(t.as_ref())).collect()
}

/// Token form of a linked entity: `prefix` plus the encoded resource name.
pub fn uri_token(iri: &str, prefix: &str) -> String {
    let name = iri.strip_prefix(DBR_DE).or_else(|| iri.strip_prefix(DBR)).unwrap_or_else(|| local_name(iri));
    format!("{prefix}{}", encode_uri_component(name))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub candidates: Vec<Candidate>,
}

/// Greedy leftmost-longest matching of token windows against the index.
pub fn detect_mentions<S: AsRef<str>>(
    tokens: &[S],
    index: &LabelIndex,
    max_span: usize,
) -> Result<Vec<Mention>, LinkError> {
    if max_span == 0 {
        return Err(LinkError::ZeroSpan);
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = max_span.min(tokens.len() - i);
        let hit = (1..=longest).rev().find_map(|len| {
            let surface = tokens[i..i + len].iter().map(|t| t.as_ref()).collect::<Vec<_>>().join(" ");
            index.get(&surface).filter(|c| !c.is_empty()).map(|c| (len, surface, c.to_vec()))
        });
        match hit {
            Some((len, surface, candidates)) => {
                out.push(Mention { start: i, end: i + len, surface, candidates });
                i += len;
            }
            None => i += 1,
        }
    }
    Ok(out)
}

/// Label words of each entity and of its graph neighbours.
#[derive(Debug, Clone, Default)]
pub struct EntityProfiles {
    words: HashMap<String, BTreeSet<String>>,
}

impl EntityProfiles {
    pub fn build(kb: &TripleSet, label_relations: &BTreeSet<String>) -> Self {
        let mut own: HashMap<&str, BTreeSet<String>> = HashMap::new();
        let mut neighbours: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for t in kb.iter() {
            if label_relations.contains(&t.relation) {
                if let Some(lit) = t.object.as_literal() {
                    own.entry(t.subject_id()).or_default().extend(label_words(&lit.text));
                }
            } else if let Some(o) = t.object.resource() {
                neighbours.entry(t.subject_id()).or_default().insert(o);
                neighbours.entry(o).or_default().insert(t.subject_id());
            }
        }
        let mut words: HashMap<String, BTreeSet<String>> = HashMap::new();
        for (e, ws) in &own {
            words.entry(e.to_string()).or_default().extend(ws.iter().cloned());
        }
        for (e, ns) in &neighbours {
            let entry = words.entry(e.to_string()).or_default();
            for n in ns {
                if let Some(ws) = own.get(n) {
                    entry.extend(ws.iter().cloned());
                }
            }
        }
        EntityProfiles { words }
    }

    pub fn words(&self, iri: &str) -> Option<&BTreeSet<String>> {
        self.words.get(iri)
    }

    pub fn insert(&mut self, iri: &str, words: impl IntoIterator<Item = String>) {
        self.words.entry(iri.to_string()).or_default().extend(words);
    }
}

/// Picks the candidate with the largest context overlap, then the largest
/// prior, then the smallest IRI.
pub fn disambiguate<'a, S: AsRef<str>>(
    mention: &'a Mention,
    context: &[S],
    profiles: &EntityProfiles,
) -> Result<&'a Candidate, LinkError> {
    let ctx: Vec<String> = context.iter().map(|t| normalize_label(t.as_ref())).collect();
    let overlap = |c: &Candidate| -> usize {
        profiles.words(&c.iri).map_or(0, |ws| ctx.iter().filter(|t| ws.contains(t.as_str())).count())
    };
    mention
        .candidates
        .iter()
        .map(|c| (overlap(c), c))
        .max_by(|(sa, a), (sb, b)| sa.cmp(sb).then(a.prior.cmp(&b.prior)).then_with(|| b.iri.cmp(&a.iri)))
        .map(|(_, c)| c)
        .ok_or(LinkError::NoCandidates)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub mentions_detected: usize,
    pub mentions_linked: usize,
    pub ambiguous_resolved: usize,
}

impl LinkStats {
    pub fn add(&mut self, other: &LinkStats) {
        self.mentions_detected += other.mentions_detected;
        self.mentions_linked += other.mentions_linked;
        self.ambiguous_resolved += other.ambiguous_resolved;
    }

    pub fn report(&self) -> String {
        format!(
            "mentions_detected\t{}\nmentions_linked\t{}\nambiguous_resolved\t{}\n",
            self.mentions_detected, self.mentions_linked, self.ambiguous_resolved
        )
    }
}

/// A label index, entity profiles and the URI-token prefix for one language.
#[derive(Debug, Clone)]
pub struct Linker {
    pub index: LabelIndex,
    pub profiles: EntityProfiles,
    pub prefix: String,
    pub max_span: usize,
}

impl Linker {
    pub fn new(index: LabelIndex, profiles: EntityProfiles, prefix: &str) -> Self {
        Linker { index, profiles, prefix: prefix.to_string(), max_span: DEFAULT_MAX_SPAN }
    }

    pub fn from_kb(kb: &TripleSet, label_relations: &BTreeSet<String>, prefix: &str) -> Self {
        Linker::new(
            crate::kb::build_label_index(kb, label_relations),
            EntityProfiles::build(kb, label_relations),
            prefix,
        )
    }

    /// Rewrites one sentence; the context of a mention is every token
    /// outside its span.
    pub fn annotate<S: AsRef<str>>(&self, tokens: &[S]) -> Result<(Vec<String>, LinkStats), LinkError> {
        let mentions = detect_mentions(tokens, &self.index, self.max_span)?;
        let mut stats = LinkStats { mentions_detected: mentions.len(), ..LinkStats::default() };
        let mut out = Vec::with_capacity(tokens.len());
        let mut pos = 0;
        for m in &mentions {
            out.extend(tokens[pos..m.start].iter().map(|t| escape_token(t.as_ref())));
            let context: Vec<&str> =
                tokens[..m.start].iter().chain(&tokens[m.end..]).map(|t| t.as_ref()).collect();
            let chosen = disambiguate(m, &context, &self.profiles)?;
            stats.mentions_linked += 1;
            if m.candidates.len() > 1 {
                stats.ambiguous_resolved += 1;
            }
            out.push(annotation_token(&tokens[m.start..m.end], &uri_token(&chosen.iri, &self.prefix)));
            pos = m.end;
        }
        out.extend(tokens[pos..].iter().map(|t| escape_token(t.as_ref())));
        Ok((out, stats))
    }

    pub fn annotate_all(
        &self,
        sentences: &[Vec<String>],
        mode: ExecMode,
    ) -> Result<(Vec<Vec<String>>, LinkStats), LinkError> {
        let results = par::map(mode, sentences, |s| self.annotate(s));
        let mut stats = LinkStats::default();
        let mut out = Vec::with_capacity(sentences.len());
        for r in results {
            let (s, st) = r?;
            stats.add(&st);
            out.push(s);
        }
        Ok((out, stats))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotatedParallelCorpus {
    pub source: Vec<Vec<String>>,
    pub target: Vec<Vec<String>>,
    pub source_stats: LinkStats,
    pub target_stats: LinkStats,
}

impl AnnotatedParallelCorpus {
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (side, s) in [("source", &self.source_stats), ("target", &self.target_stats)] {
            for line in s.report().lines() {
                out.push_str(&format!("{side}.{line}\n"));
            }
        }
        out
    }
}

/// Links both sides of a parallel corpus independently.
pub fn annotate_corpus(
    source: &[Vec<String>],
    target: &[Vec<String>],
    linker_src: &Linker,
    linker_tgt: &Linker,
    mode: ExecMode,
) -> Result<AnnotatedParallelCorpus, LinkError> {
    if source.len() != target.len() {
        return Err(LinkError::LineMismatch { src: source.len(), tgt: target.len() });
    }
    let (source, source_stats) = linker_src.annotate_all(source, mode)?;
    let (target, target_stats) = linker_tgt.annotate_all(target, mode)?;
    Ok(AnnotatedParallelCorpus { source, target, source_stats, target_stats })
}

/// Counts of URI tokens per annotated surface, useful for reports.
pub fn uri_histogram<S: AsRef<str>>(tokens: &[S]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for t in tokens {
        if let Some(u) = uri_part(t.as_ref()) {
            *out.entry(u.to_string()).or_insert(0) += 1;
        }
    }
    out
}
