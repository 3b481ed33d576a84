//! Attention-guided replacement of emitted unknown tokens.

use kgnmt_core::kb::BilingualLexicon;
use kgnmt_core::linker::deannotate_token;
use kgnmt_core::tokenize::UNK;

use crate::beam::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnkMode {
    #[default]
    LexiconThenCopy,
    CopyOnly,
    Off,
}

impl std::str::FromStr for UnkMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lexicon_then_copy" => Ok(UnkMode::LexiconThenCopy),
            "copy" | "copy_only" => Ok(UnkMode::CopyOnly),
            "off" => Ok(UnkMode::Off),
            o => Err(format!("unknown unk mode {o:?} (expected off|copy|lexicon_then_copy)")),
        }
    }
}

impl std::fmt::Display for UnkMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UnkMode::LexiconThenCopy => "lexicon_then_copy",
            UnkMode::CopyOnly => "copy",
            UnkMode::Off => "off",
        })
    }
}

/// Replaces each `<unk>` at step `t` using the source token with the highest
/// weight in `attention[t]`. Annotated source tokens are copied as their
/// plain surface words; lexicon translations may span several tokens.
pub fn unk_replace<S: AsRef<str>>(
    tokens: &[S],
    attention: &[Vec<f64>],
    source: &[S],
    lexicon: Option<&BilingualLexicon>,
    mode: UnkMode,
) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    for (t, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        let aligned = attention.get(t).filter(|a| !a.is_empty()).map(|a| argmax(a)).and_then(|i| source.get(i));
        match (mode, tok == UNK, aligned) {
            (UnkMode::Off, ..) | (_, false, _) | (_, true, None) => out.push(tok.to_string()),
            (_, true, Some(src)) => {
                let words = deannotate_token(src.as_ref());
                let translated = match (mode, lexicon) {
                    (UnkMode::LexiconThenCopy, Some(lex)) => lex.translate(&words.join(" ")),
                    _ => None,
                };
                match translated {
                    Some(tr) => out.extend(tr.split_whitespace().map(str::to_string)),
                    None => out.extend(words),
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> BilingualLexicon {
        let mut l = BilingualLexicon::default();
        l.insert("cancer", "Krebs");
        l.insert("United Kingdom", "Vereinigtes Königreich");
        l
    }

    #[test]
    fn lexicon_hit() {
        let out = unk_replace(&["ein", "<unk>"], &[vec![1.0, 0.0], vec![0.1, 0.9]], &["a", "cancer"], Some(&lex()), UnkMode::LexiconThenCopy);
        assert_eq!(out, ["ein", "Krebs"]);
    }

    #[test]
    fn lexicon_miss_copies() {
        let out = unk_replace(&["<unk>"], &[vec![0.8, 0.2]], &["Chad", "x"], Some(&lex()), UnkMode::LexiconThenCopy);
        assert_eq!(out, ["Chad"]);
    }

    #[test]
    fn copy_only_ignores_lexicon() {
        let out = unk_replace(&["<unk>"], &[vec![0.0, 1.0]], &["a", "cancer"], Some(&lex()), UnkMode::CopyOnly);
        assert_eq!(out, ["cancer"]);
    }

    #[test]
    fn annotation_suffix_stripped() {
        let src = ["United_Kingdom|dbr_United_Kingdom"];
        let copied = unk_replace(&["<unk>"], &[vec![1.0]], &src, None, UnkMode::CopyOnly);
        assert_eq!(copied, ["United", "Kingdom"]);
        let tr = unk_replace(&["<unk>"], &[vec![1.0]], &src, Some(&lex()), UnkMode::LexiconThenCopy);
        assert_eq!(tr, ["Vereinigtes", "Königreich"]);
    }

    #[test]
    fn no_unk_unchanged_and_off() {
        let h = ["das", "Haus"];
        assert_eq!(unk_replace(&h, &[vec![1.0], vec![1.0]], &["x"], Some(&lex()), UnkMode::LexiconThenCopy), h);
        assert_eq!(unk_replace(&["<unk>"], &[vec![1.0]], &["cancer"], Some(&lex()), UnkMode::Off), ["<unk>"]);
    }
}
