//! Character n-grams and their hash buckets.

use crate::kge::KgeError;

/// All character n-grams of `<token>` with lengths `min_n..=max_n`,
/// grouped by length (shorter first), left to right within a length.
pub fn subword_ngrams(token: &str, min_n: usize, max_n: usize) -> Result<Vec<String>, KgeError> {
    if min_n > max_n {
        return Err(KgeError::Invalid(format!("min_n {min_n} > max_n {max_n}")));
    }
    if min_n == 0 {
        return Err(KgeError::Invalid("min_n must be at least 1".into()));
    }
    if token.is_empty() {
        return Err(KgeError::Invalid("empty token".into()));
    }
    let chars: Vec<char> = std::iter::once('<').chain(token.chars()).chain(std::iter::once('>')).collect();
    let mut out = Vec::new();
    for n in min_n..=max_n.min(chars.len()) {
        for start in 0..=chars.len() - n {
            out.push(chars[start..start + n].iter().collect());
        }
    }
    Ok(out)
}

/// 32-bit FNV-1a over the UTF-8 bytes.
pub fn fnv1a(s: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for b in s.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

pub fn bucket_of(ngram: &str, bucket_count: u32) -> u32 {
    fnv1a(ngram) % bucket_count
}

/// Label words get subword features; graph tokens (which always contain
/// `_`) never do.
pub fn subword_eligible(token: &str) -> bool {
    !token.contains('_')
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force: every substring of the marked token, filtered by length.
    fn brute(token: &str, lo: usize, hi: usize) -> Vec<String> {
        let marked: Vec<char> = format!("<{token}>").chars().collect();
        let mut all = Vec::new();
        for n in lo..=hi {
            for i in 0..marked.len() {
                if i + n <= marked.len() {
                    all.push(marked[i..i + n].iter().collect::<String>());
                }
            }
        }
        all
    }

    #[test]
    fn cat_two_to_five() {
        let got = subword_ngrams("cat", 2, 5).unwrap();
        let want = ["<c", "ca", "at", "t>", "<ca", "cat", "at>", "<cat", "cat>", "<cat>"];
        assert_eq!(got, want);
        assert_eq!(got, brute("cat", 2, 5));
    }

    #[test]
    fn single_char() {
        assert_eq!(subword_ngrams("a", 2, 2).unwrap(), vec!["<a", "a>"]);
    }

    #[test]
    fn bad_range() {
        assert!(subword_ngrams("a", 3, 2).is_err());
        assert!(subword_ngrams("", 2, 5).is_err());
    }

    #[test]
    fn unicode_chars_not_bytes() {
        assert_eq!(subword_ngrams("\u{fc}", 3, 3).unwrap(), vec!["<\u{fc}>"]);
        assert_eq!(subword_ngrams("kr\u{f6}te", 2, 5).unwrap(), brute("kr\u{f6}te", 2, 5));
    }

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 32-bit test vectors
        assert_eq!(fnv1a(""), 0x811c9dc5);
        assert_eq!(fnv1a("a"), 0xe40c292c);
        assert_eq!(fnv1a("foobar"), 0xbf9cf968);
    }

    #[test]
    fn graph_tokens_are_not_eligible() {
        assert!(!subword_eligible("dbr_Leipzig"));
        assert!(!subword_eligible("dbr_Leibniz"));
        assert!(subword_eligible("leipzig"));
    }
}
