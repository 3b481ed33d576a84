use std::collections::{BTreeMap, HashMap};

use crate::tokenize::TokenizeError;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const RESERVED: [&str; 4] = [PAD, UNK, BOS, EOS];
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;

/// Token to id map with the reserved tokens at ids 0..=3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens<I: IntoIterator<Item = String>>(extra: I) -> Vocabulary {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        for t in extra {
            if !index.contains_key(&t) {
                index.insert(t.clone(), tokens.len());
                tokens.push(t);
            }
        }
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(UNK)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Out-of-vocabulary tokens map to the UNK id.
    pub fn numericalize<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref()).unwrap_or(UNK_ID)).collect()
    }

    /// Inverse of [`numericalize`](Self::numericalize); UNK becomes `<unk>`.
    pub fn denumericalize(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }

    /// One token per line; line `n` holds id `n - 1`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Vocabulary, TokenizeError> {
        let lines: Vec<&str> = text.lines().collect();
        for (i, r) in RESERVED.iter().enumerate() {
            if lines.get(i) != Some(r) {
                return Err(TokenizeError::Format { line: i + 1, message: format!("expected reserved token {r}") });
            }
        }
        let v = Vocabulary::from_tokens(lines[4..].iter().map(|s| s.to_string()));
        if v.len() != lines.len() {
            return Err(TokenizeError::Format { line: 0, message: "duplicate tokens".into() });
        }
        Ok(v)
    }
}

/// Keeps the `max_size - 4` most frequent tokens (ties lexicographic).
pub fn build_vocab<'a, I>(corpus: I, max_size: usize) -> Result<Vocabulary, TokenizeError>
where
    I: IntoIterator<Item = &'a str>,
{
    if max_size <= RESERVED.len() {
        return Err(TokenizeError::VocabTooSmall(max_size));
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for t in corpus {
        if !RESERVED.contains(&t) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - RESERVED.len());
    Ok(Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_token_corpus() {
        let v = build_vocab(["x"], 50_000).unwrap();
        assert_eq!(v.tokens(), &[PAD, UNK, BOS, EOS, "x"]);
        assert_eq!(v.id("x"), Some(4));
    }

    #[test]
    fn tie_at_cutoff_keeps_lexicographic_first() {
        let v = build_vocab(["b", "a", "c", "c"], 6).unwrap();
        assert!(v.contains("c") && v.contains("a") && !v.contains("b"));
    }

    #[test]
    fn too_small_rejected() {
        assert!(build_vocab(["a"], 4).is_err());
    }

    #[test]
    fn numericalize_roundtrip_and_oov() {
        let v = build_vocab("the cat sat".split(' '), 100).unwrap();
        let s = ["the", "cat", "sat"];
        assert_eq!(v.denumericalize(&v.numericalize(&s)), s);
        let mixed = ["the", "dog", "sat", "down"];
        let ids = v.numericalize(&mixed);
        // oracle: membership check per token
        let expected = mixed.iter().filter(|t| !v.contains(t)).count();
        assert_eq!(ids.iter().filter(|&&i| i == UNK_ID).count(), expected);
        assert_eq!(expected, 2);
        assert_eq!(v.denumericalize(&ids)[1], "<unk>");
    }

    #[test]
    fn ids_are_contiguous_and_file_roundtrips() {
        let v = build_vocab("z y x w z".split(' '), 100).unwrap();
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.id(t), Some(i));
        }
        assert_eq!(Vocabulary::from_text(&v.to_text()).unwrap(), v);
        assert!(Vocabulary::from_text("a\nb\n").is_err());
    }
}
