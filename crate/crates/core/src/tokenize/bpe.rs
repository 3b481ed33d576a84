//! Byte-pair encoding over characters with an end-of-word marker.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::par::{self, ExecMode};
use crate::tokenize::TokenizeError;

pub const END_OF_WORD: &str = "</w>";
const HEADER: &str = "#bpe v1";

/// Merge pairs in learning order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
}

impl MergeTable {
    pub fn new(merges: Vec<(String, String)>) -> Self {
        MergeTable { merges }
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for (a, b) in &self.merges {
            out.push_str(a);
            out.push(' ');
            out.push_str(b);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<MergeTable, TokenizeError> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(TokenizeError::Format { line: 1, message: format!("expected header {HEADER:?}") });
        }
        let mut merges = Vec::new();
        for (i, l) in lines.enumerate() {
            let (a, b) = l.split_once(' ').ok_or_else(|| TokenizeError::Format {
                line: i + 2,
                message: "expected `left right`".into(),
            })?;
            merges.push((a.to_string(), b.to_string()));
        }
        Ok(MergeTable { merges })
    }
}

fn word_symbols(word: &str) -> Vec<String> {
    let mut syms: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = syms.last_mut() {
        last.push_str(END_OF_WORD);
    }
    syms
}

type Pair = (String, String);

/// Learns up to `num_merges` merges from unprotected tokens. Each step
/// merges the most frequent adjacent pair, ties going to the
/// lexicographically smallest pair. Stops early when no pair is left.
pub fn learn_bpe<'a, I, P>(corpus: I, num_merges: usize, protected: P) -> MergeTable
where
    I: IntoIterator<Item = &'a str>,
    P: Fn(&str) -> bool,
{
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for t in corpus {
        if !t.is_empty() && !protected(t) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<String>, i64)> = counts.into_iter().map(|(w, c)| (word_symbols(w), c)).collect();
    let mut pair_counts: HashMap<Pair, i64> = HashMap::new();
    let mut where_: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (wi, (syms, c)) in words.iter().enumerate() {
        for p in syms.windows(2) {
            let key = (p[0].clone(), p[1].clone());
            *pair_counts.entry(key.clone()).or_default() += c;
            where_.entry(key).or_default().insert(wi);
        }
    }
    let mut queue: BTreeSet<(Reverse<i64>, Pair)> =
        pair_counts.iter().filter(|(_, &c)| c > 0).map(|(p, &c)| (Reverse(c), p.clone())).collect();

    let mut merges = Vec::new();
    while merges.len() < num_merges {
        let Some((Reverse(_), best)) = queue.pop_first() else {
            break;
        };
        let merged = format!("{}{}", best.0, best.1);
        let mut affected: Vec<usize> = where_.remove(&best).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        let mut delta: HashMap<Pair, i64> = HashMap::new();
        for wi in affected {
            let (syms, c) = &mut words[wi];
            for p in syms.windows(2) {
                *delta.entry((p[0].clone(), p[1].clone())).or_default() -= *c;
            }
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == best.0 && syms[i + 1] == best.1 {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(std::mem::take(&mut syms[i]));
                    i += 1;
                }
            }
            *syms = out;
            for p in syms.windows(2) {
                let key = (p[0].clone(), p[1].clone());
                *delta.entry(key.clone()).or_default() += *c;
                where_.entry(key).or_default().insert(wi);
            }
        }
        let mut changed: Vec<(Pair, i64)> = delta.into_iter().filter(|(_, d)| *d != 0).collect();
        changed.sort();
        for (p, d) in changed {
            if p == best {
                continue;
            }
            let old = pair_counts.get(&p).copied().unwrap_or(0);
            if old > 0 {
                queue.remove(&(Reverse(old), p.clone()));
            }
            let new = old + d;
            if new > 0 {
                queue.insert((Reverse(new), p.clone()));
                pair_counts.insert(p, new);
            } else {
                pair_counts.remove(&p);
            }
        }
        pair_counts.remove(&best);
        merges.push(best);
    }
    MergeTable { merges }
}

/// A merge table prepared for application, with a per-word cache.
#[derive(Debug, Clone)]
pub struct Bpe {
    ranks: HashMap<Pair, usize>,
}

impl Bpe {
    pub fn new(table: &MergeTable) -> Self {
        let mut ranks = HashMap::new();
        for (i, p) in table.merges().iter().enumerate() {
            ranks.entry(p.clone()).or_insert(i);
        }
        Bpe { ranks }
    }

    /// Segments one word by repeatedly applying the lowest-ranked pair.
    pub fn segment(&self, word: &str) -> Vec<String> {
        let mut syms = word_symbols(word);
        loop {
            let best = syms
                .windows(2)
                .enumerate()
                .filter_map(|(i, p)| self.ranks.get(&(p[0].clone(), p[1].clone())).map(|&r| (r, i)))
                .min();
            let Some((rank, _)) = best else { break };
            let target = self.ranks.iter().find(|(_, &r)| r == rank).map(|(p, _)| p.clone()).unwrap();
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == target.0 && syms[i + 1] == target.1 {
                    out.push(format!("{}{}", target.0, target.1));
                    i += 2;
                } else {
                    out.push(std::mem::take(&mut syms[i]));
                    i += 1;
                }
            }
            syms = out;
        }
        syms
    }

    pub fn apply<S: AsRef<str>, P: Fn(&str) -> bool>(&self, tokens: &[S], protected: P) -> Vec<String> {
        let mut cache: HashMap<&str, Vec<String>> = HashMap::new();
        let mut out = Vec::new();
        for t in tokens {
            let t = t.as_ref();
            if t.is_empty() {
                continue;
            }
            if protected(t) {
                out.push(t.to_string());
            } else {
                out.extend(cache.entry(t).or_insert_with(|| self.segment(t)).iter().cloned());
            }
        }
        out
    }

    /// Applies BPE to many sentences, order-preserving.
    pub fn apply_corpus<P>(&self, sentences: &[Vec<String>], protected: P, mode: ExecMode) -> Vec<Vec<String>>
    where
        P: Fn(&str) -> bool + Sync + Send,
    {
        par::map(mode, sentences, |s| self.apply(s, &protected))
    }
}

/// Segments a token sequence; protected tokens pass through unchanged.
pub fn apply_bpe<S: AsRef<str>, P: Fn(&str) -> bool>(tokens: &[S], merges: &MergeTable, protected: P) -> Vec<String> {
    Bpe::new(merges).apply(tokens, protected)
}

/// Reassembles words: symbols accumulate until one ends with the marker.
/// A protected token at a word boundary stands on its own.
pub fn de_bpe<S: AsRef<str>, P: Fn(&str) -> bool>(symbols: &[S], protected: P) -> Vec<String> {
    let mut out = Vec::new();
    let mut buf = String::new();
    for s in symbols {
        let s = s.as_ref();
        if buf.is_empty() && protected(s) && !s.ends_with(END_OF_WORD) {
            out.push(s.to_string());
            continue;
        }
        if let Some(stem) = s.strip_suffix(END_OF_WORD) {
            buf.push_str(stem);
            out.push(std::mem::take(&mut buf));
        } else {
            buf.push_str(s);
        }
    }
    if !buf.is_empty() {
        out.push(buf);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linker::is_annotation_token;
    use proptest::prelude::*;

    fn none(_: &str) -> bool {
        false
    }

    fn pair(a: &str, b: &str) -> Pair {
        (a.into(), b.into())
    }

    #[test]
    fn zero_merges() {
        assert!(learn_bpe(["a", "b"], 0, none).is_empty());
    }

    #[test]
    fn first_merge_aa() {
        let t = learn_bpe("aaab aaab".split(' '), 1, none);
        assert_eq!(t.merges(), &[pair("a", "a")]);
    }

    #[test]
    fn low_lower_hand_simulation() {
        let t = learn_bpe(["low", "lower"], 10, none);
        // counts: (l,o)=2 first; then all ties at 1 resolved lexicographically
        assert_eq!(
            t.merges(),
            &[
                pair("l", "o"),
                pair("e", "r</w>"),
                pair("lo", "w"),
                pair("lo", "w</w>"),
                pair("low", "er</w>"),
            ]
        );
        assert_eq!(apply_bpe(&["lowest"], &t, none), vec!["low", "e", "s", "t</w>"]);
        assert_eq!(apply_bpe(&["lower"], &t, none), vec!["lower</w>"]);
    }

    #[test]
    fn empty_table_gives_characters() {
        let out = apply_bpe(&["abc"], &MergeTable::default(), none);
        assert_eq!(out, vec!["a", "b", "c</w>"]);
    }

    #[test]
    fn protected_tokens_never_segmented() {
        let corpus = ["Kiwi|dbr_Kiwi", "kiwi", "kiwi", "bird"];
        let t = learn_bpe(corpus, 50, is_annotation_token);
        assert!(t.merges().iter().all(|(a, b)| !a.contains('|') && !b.contains('|')));
        let out = apply_bpe(&corpus, &t, is_annotation_token);
        assert_eq!(out[0], "Kiwi|dbr_Kiwi");
        assert_eq!(de_bpe(&out, is_annotation_token), corpus);
    }

    #[test]
    fn full_scale_merge_count_accepted() {
        let words: Vec<String> = (0..200).map(|i| format!("w{i}x{}", i * 7)).collect();
        let t = learn_bpe(words.iter().map(String::as_str), 32_000, none);
        assert!(t.len() < 32_000);
        let out = apply_bpe(&words, &t, none);
        assert_eq!(de_bpe(&out, none), words);
    }

    #[test]
    fn merges_file_roundtrip() {
        let t = learn_bpe(["abab", "abc"], 3, none);
        let text = t.to_text();
        assert!(text.starts_with("#bpe v1\n"));
        assert_eq!(MergeTable::from_text(&text).unwrap(), t);
        assert!(MergeTable::from_text("a b\n").is_err());
    }

    #[test]
    fn deterministic_learning() {
        let c: Vec<&str> = "the cat sat on the mat with the hat".split(' ').collect();
        assert_eq!(learn_bpe(c.iter().copied(), 20, none), learn_bpe(c.iter().copied(), 20, none));
    }

    /// Independent reference: recount every pair from scratch each step.
    fn naive_learn(corpus: &[&str], n: usize) -> Vec<Pair> {
        let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
        for w in corpus {
            *counts.entry(w).or_default() += 1;
        }
        let mut words: Vec<(Vec<String>, i64)> = counts.into_iter().map(|(w, c)| (word_symbols(w), c)).collect();
        let mut out = Vec::new();
        for _ in 0..n {
            let mut pc: BTreeMap<Pair, i64> = BTreeMap::new();
            for (s, c) in &words {
                for p in s.windows(2) {
                    *pc.entry((p[0].clone(), p[1].clone())).or_default() += c;
                }
            }
            let Some(best) = pc.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0))).map(|x| x.0.clone())
            else {
                break;
            };
            for (s, _) in words.iter_mut() {
                let mut o = Vec::new();
                let mut i = 0;
                while i < s.len() {
                    if i + 1 < s.len() && s[i] == best.0 && s[i + 1] == best.1 {
                        o.push(format!("{}{}", best.0, best.1));
                        i += 2;
                    } else {
                        o.push(s[i].clone());
                        i += 1;
                    }
                }
                *s = o;
            }
            out.push(best);
        }
        out
    }

    proptest! {
        #[test]
        fn incremental_learner_matches_naive(words in proptest::collection::vec("[abc]{1,6}", 1..20), n in 0usize..15) {
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let fast = learn_bpe(refs.iter().copied(), n, none);
            prop_assert_eq!(fast.merges().to_vec(), naive_learn(&refs, n));
        }
    }
}
