//! Corpus BLEU, character F-score, OOV counts and entity accuracy.

use std::collections::HashMap;
use std::hash::Hash;

use thiserror::Error;

use crate::par::{self, ExecMode};
use crate::tokenize::UNK;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{hyp} hypotheses but {refs} references")]
    LengthMismatch { hyp: usize, refs: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty entity test set")]
    EmptyTestSet,
    #[error("entity test entry refers to sentence {index} of {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    #[default]
    None,
    AddOne,
}

impl std::str::FromStr for Smoothing {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Smoothing::None),
            "add_one" => Ok(Smoothing::AddOne),
            o => Err(format!("unknown smoothing {o:?} (expected none|add_one)")),
        }
    }
}

impl std::fmt::Display for Smoothing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Smoothing::None => "none",
            Smoothing::AddOne => "add_one",
        })
    }
}

fn check_lengths(h: usize, r: usize) -> Result<(), EvalError> {
    if h != r {
        return Err(EvalError::LengthMismatch { hyp: h, refs: r });
    }
    Ok(())
}

fn ngram_counts<T: Hash + Eq>(items: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if items.len() >= n {
        for w in items.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn clipped_matches<T: Hash + Eq>(hyp: &[T], reference: &[T], n: usize) -> usize {
    let r = ngram_counts(reference, n);
    ngram_counts(hyp, n).iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum()
}

/// Sufficient statistics for corpus BLEU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    fn zero(max_n: usize) -> Self {
        BleuStats { correct: vec![0; max_n], total: vec![0; max_n], hyp_len: 0, ref_len: 0 }
    }

    fn merge(mut self, o: BleuStats) -> Self {
        for i in 0..self.correct.len() {
            self.correct[i] += o.correct[i];
            self.total[i] += o.total[i];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
        self
    }

    pub fn sentence(hyp: &str, reference: &str, max_n: usize) -> Self {
        let h: Vec<&str> = hyp.split_whitespace().collect();
        let r: Vec<&str> = reference.split_whitespace().collect();
        let mut s = BleuStats::zero(max_n);
        for n in 1..=max_n {
            s.correct[n - 1] = clipped_matches(&h, &r, n);
            s.total[n - 1] = (h.len() + 1).saturating_sub(n);
        }
        s.hyp_len = h.len();
        s.ref_len = r.len();
        s
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len >= self.ref_len {
            1.0
        } else if self.hyp_len == 0 {
            0.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// BLEU on the 0..100 scale.
    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.correct.iter().all(|&c| c == 0) {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for (&c, &t) in self.correct.iter().zip(&self.total) {
            let (c, t) = match (smoothing, c) {
                (Smoothing::AddOne, 0) => (1, t + 1),
                _ => (c, t),
            };
            if c == 0 || t == 0 {
                return 0.0;
            }
            log_sum += (c as f64 / t as f64).ln();
        }
        let score = 100.0 * self.brevity_penalty() * (log_sum / self.correct.len() as f64).exp();
        score.min(100.0)
    }
}

pub fn bleu_stats<S: AsRef<str> + Sync>(
    hyps: &[S],
    refs: &[S],
    max_n: usize,
    mode: ExecMode,
) -> Result<BleuStats, EvalError> {
    check_lengths(hyps.len(), refs.len())?;
    if hyps.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let pairs: Vec<(&str, &str)> = hyps.iter().zip(refs).map(|(h, r)| (h.as_ref(), r.as_ref())).collect();
    Ok(par::map_reduce(
        mode,
        &pairs,
        BleuStats::zero(max_n),
        |(h, r)| BleuStats::sentence(h, r, max_n),
        BleuStats::merge,
    ))
}

/// Corpus BLEU over whitespace tokens, single reference.
pub fn bleu<S: AsRef<str> + Sync>(hyps: &[S], refs: &[S], max_n: usize, smoothing: Smoothing) -> Result<f64, EvalError> {
    Ok(bleu_stats(hyps, refs, max_n, ExecMode::Sequential)?.score(smoothing))
}

/// Per-order character n-gram counts `(hyp, ref, match)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChrfStats {
    pub orders: Vec<[usize; 3]>,
}

impl ChrfStats {
    fn zero(max_n: usize) -> Self {
        ChrfStats { orders: vec![[0; 3]; max_n] }
    }

    fn merge(mut self, o: ChrfStats) -> Self {
        for (a, b) in self.orders.iter_mut().zip(o.orders) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
        self
    }

    pub fn sentence(hyp: &str, reference: &str, max_n: usize) -> Self {
        let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
        let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
        let mut s = ChrfStats::zero(max_n);
        for n in 1..=max_n {
            s.orders[n - 1] = [(h.len() + 1).saturating_sub(n), (r.len() + 1).saturating_sub(n), clipped_matches(&h, &r, n)];
        }
        s
    }

    /// Precision and recall averaged over orders where both sides have
    /// n-grams, combined into F-beta on the 0..100 scale.
    pub fn score(&self, beta: f64) -> f64 {
        let (mut p, mut r, mut k) = (0.0, 0.0, 0usize);
        for &[nh, nr, nm] in &self.orders {
            if nh > 0 && nr > 0 {
                p += nm as f64 / nh as f64;
                r += nm as f64 / nr as f64;
                k += 1;
            }
        }
        if k == 0 {
            return 0.0;
        }
        p /= k as f64;
        r /= k as f64;
        if p + r == 0.0 {
            return 0.0;
        }
        let b2 = beta * beta;
        100.0 * (1.0 + b2) * p * r / (b2 * p + r)
    }
}

pub fn chrf_stats<S: AsRef<str> + Sync>(
    hyps: &[S],
    refs: &[S],
    max_n: usize,
    mode: ExecMode,
) -> Result<ChrfStats, EvalError> {
    check_lengths(hyps.len(), refs.len())?;
    let pairs: Vec<(&str, &str)> = hyps.iter().zip(refs).map(|(h, r)| (h.as_ref(), r.as_ref())).collect();
    Ok(par::map_reduce(
        mode,
        &pairs,
        ChrfStats::zero(max_n),
        |(h, r)| ChrfStats::sentence(h, r, max_n),
        ChrfStats::merge,
    ))
}

/// Corpus character n-gram F-score.
pub fn chrf<S: AsRef<str> + Sync>(hyps: &[S], refs: &[S], beta: f64, max_n: usize) -> Result<f64, EvalError> {
    Ok(chrf_stats(hyps, refs, max_n, ExecMode::Sequential)?.score(beta))
}

/// Occurrences of the UNK token across all lines.
pub fn oov_count<S: AsRef<str>>(hyps: &[S]) -> usize {
    hyps.iter().map(|h| h.as_ref().split_whitespace().filter(|t| *t == UNK).count()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EntityAccuracy {
    pub correct: usize,
    pub total: usize,
}

impl EntityAccuracy {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Fraction of `(sentence, surface)` entries whose surface tokens occur
/// contiguously, case-sensitively, in that hypothesis.
pub fn entity_accuracy<S: AsRef<str>>(hyps: &[S], testset: &[(usize, String)]) -> Result<EntityAccuracy, EvalError> {
    if testset.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut acc = EntityAccuracy { correct: 0, total: testset.len() };
    for (i, surface) in testset {
        let h = hyps.get(*i).ok_or(EvalError::IndexOutOfRange { index: *i, len: hyps.len() })?;
        let toks: Vec<&str> = h.as_ref().split_whitespace().collect();
        let want: Vec<&str> = surface.split_whitespace().collect();
        if !want.is_empty() && toks.windows(want.len()).any(|w| w == want.as_slice()) {
            acc.correct += 1;
        }
    }
    Ok(acc)
}

pub const CHRF_BETA: f64 = 3.0;
pub const CHRF_ORDER: usize = 6;
pub const BLEU_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub bleu: f64,
    pub chrf3: f64,
    pub oov_count: usize,
    pub entity: Option<EntityAccuracy>,
    pub sentences: usize,
}

impl EvalReport {
    pub fn to_key_values(&self) -> String {
        let mut out = format!(
            "bleu\t{:.4}\nchrf3\t{:.4}\nmeteor\tunsupported\noov\t{}\n",
            self.bleu, self.chrf3, self.oov_count
        );
        match self.entity {
            Some(e) => out.push_str(&format!(
                "entity_acc\t{:.6}\nentity_correct\t{}\nentity_total\t{}\n",
                e.fraction(),
                e.correct,
                e.total
            )),
            None => out.push_str("entity_acc\tNA\n"),
        }
        out.push_str(&format!("n_sentences\t{}\n", self.sentences));
        out
    }

    /// `bleu  chrf3  oov  entity_acc  n_sentences`, tab separated.
    pub fn to_tsv_line(&self) -> String {
        let ent = self.entity.map_or("NA".to_string(), |e| format!("{:.6}", e.fraction()));
        format!("{:.4}\t{:.4}\t{}\t{}\t{}", self.bleu, self.chrf3, self.oov_count, ent, self.sentences)
    }
}

pub fn evaluate<S: AsRef<str> + Sync>(
    hyps: &[S],
    refs: &[S],
    entity_testset: Option<&[(usize, String)]>,
    smoothing: Smoothing,
    mode: ExecMode,
) -> Result<EvalReport, EvalError> {
    let bleu = bleu_stats(hyps, refs, BLEU_ORDER, mode)?.score(smoothing);
    let chrf3 = chrf_stats(hyps, refs, CHRF_ORDER, mode)?.score(CHRF_BETA);
    let entity = entity_testset.map(|t| entity_accuracy(hyps, t)).transpose()?;
    Ok(EvalReport { bleu, chrf3, oov_count: oov_count(hyps), entity, sentences: hyps.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_100() {
        let x = ["the cat sat on the mat", "a b c d e"];
        assert_eq!(bleu(&x, &x, 4, Smoothing::None).unwrap(), 100.0);
        assert_eq!(chrf(&x, &x, 3.0, 6).unwrap(), 100.0);
    }

    #[test]
    fn clipped_unigram_precision() {
        let s = BleuStats::sentence("the the the the", "the cat", 4);
        assert_eq!((s.correct[0], s.total[0]), (1, 4));
    }

    #[test]
    fn brevity_penalty_formula() {
        let s = BleuStats::sentence("the cat sat", "the cat sat on the mat", 4);
        assert_eq!(s.brevity_penalty(), (1.0f64 - 6.0 / 3.0).exp());
    }

    #[test]
    fn errors() {
        assert_eq!(bleu(&["a"], &[], 4, Smoothing::None), Err(EvalError::LengthMismatch { hyp: 1, refs: 0 }));
        let e: [&str; 0] = [];
        assert_eq!(bleu(&e, &e, 4, Smoothing::None), Err(EvalError::EmptyCorpus));
        assert!(chrf(&["a"], &[], 3.0, 6).is_err());
    }

    #[test]
    fn add_one_rescues_missing_orders() {
        let h = ["the cat"];
        let r = ["the cat sat"];
        assert_eq!(bleu(&h, &r, 4, Smoothing::None).unwrap(), 0.0);
        // p1 = 2/2, p2 = 1/1, p3 = 1/1, p4 = 1/1 after adding one to empty orders
        let expected = 100.0 * (1.0f64 - 3.0 / 2.0).exp();
        assert!((bleu(&h, &r, 4, Smoothing::AddOne).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn chrf_empty_hypothesis() {
        assert_eq!(chrf(&[""], &["abc"], 3.0, 6).unwrap(), 0.0);
    }

    #[test]
    fn oov_counts() {
        assert_eq!(oov_count(&["a <unk> b <unk>"]), 2);
        assert_eq!(oov_count::<&str>(&[]), 0);
    }

    #[test]
    fn entity_accuracy_fixture() {
        let hyps = ["ich sah Großbritannien", "in New York heute", "kein treffer", "Köln ist groß"];
        let set: Vec<(usize, String)> = vec![
            (0, "Großbritannien".into()),
            (1, "New York".into()),
            (2, "Berlin".into()),
            (3, "Köln".into()),
        ];
        let acc = entity_accuracy(&hyps, &set).unwrap();
        assert_eq!(acc.fraction(), 0.75);
        assert_eq!(entity_accuracy(&hyps, &[]), Err(EvalError::EmptyTestSet));
        assert!(matches!(entity_accuracy(&hyps, &[(9, "x".into())]), Err(EvalError::IndexOutOfRange { .. })));
        assert_eq!(entity_accuracy(&hyps, &[(0, "großbritannien".into())]).unwrap().correct, 0);
    }

    #[test]
    fn report_formats() {
        let r = EvalReport {
            bleu: 12.5,
            chrf3: 40.0,
            oov_count: 3,
            entity: Some(EntityAccuracy { correct: 1, total: 2 }),
            sentences: 7,
        };
        assert_eq!(r.to_tsv_line(), "12.5000\t40.0000\t3\t0.500000\t7");
        assert!(r.to_key_values().contains("meteor\tunsupported\n"));
    }
}
