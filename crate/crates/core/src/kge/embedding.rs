//! Trained KG embeddings: lookup, neighbours and word2vec text I/O.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::kge::subword::{bucket_of, subword_eligible, subword_ngrams};
use crate::kge::KgeError;
use crate::par::{self, ExecMode};

/// Subword metadata and the bucket rows seen during training. Buckets that
/// never received a training n-gram are treated as zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordTable {
    pub min_n: usize,
    pub max_n: usize,
    pub bucket_count: u32,
    pub buckets: BTreeMap<u32, Vec<f64>>,
}

#[derive(Debug)]
pub struct KgEmbedding {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    subwords: Option<SubwordTable>,
    bucket_accesses: AtomicU64,
}

impl Clone for KgEmbedding {
    fn clone(&self) -> Self {
        KgEmbedding {
            dim: self.dim,
            tokens: self.tokens.clone(),
            index: self.index.clone(),
            vectors: self.vectors.clone(),
            subwords: self.subwords.clone(),
            bucket_accesses: AtomicU64::new(0),
        }
    }
}

pub const SUBWORD_HASH: &str = "fnv1a32";

impl KgEmbedding {
    pub fn from_parts(
        tokens: Vec<String>,
        vectors: Vec<f64>,
        dim: usize,
        subwords: Option<SubwordTable>,
    ) -> Result<Self, KgeError> {
        if dim == 0 || vectors.len() != tokens.len() * dim {
            return Err(KgeError::Invalid(format!(
                "{} values for {} tokens of dim {dim}",
                vectors.len(),
                tokens.len()
            )));
        }
        if let Some(sw) = &subwords {
            if sw.buckets.values().any(|v| v.len() != dim) {
                return Err(KgeError::Invalid("bucket row dimension mismatch".into()));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(KgeError::Invalid(format!("duplicate token {t:?}")));
            }
        }
        Ok(KgEmbedding { dim, tokens, index, vectors, subwords, bucket_accesses: AtomicU64::new(0) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn subwords(&self) -> Option<&SubwordTable> {
        self.subwords.as_ref()
    }

    pub fn bucket_accesses(&self) -> u64 {
        self.bucket_accesses.load(Ordering::Relaxed)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Stored vector of a dictionary token, without subword fallback.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    /// Dictionary row; for unknown label words in semantic embeddings, the
    /// mean over all n-grams of the token's bucket rows.
    pub fn vector(&self, token: &str) -> Option<Vec<f64>> {
        if let Some(v) = self.get(token) {
            return Some(v.to_vec());
        }
        let sw = self.subwords.as_ref()?;
        if !subword_eligible(token) {
            return None;
        }
        let grams = subword_ngrams(token, sw.min_n, sw.max_n).ok()?;
        let mut v = vec![0.0; self.dim];
        let mut hit = false;
        for g in &grams {
            self.bucket_accesses.fetch_add(1, Ordering::Relaxed);
            if let Some(row) = sw.buckets.get(&bucket_of(g, sw.bucket_count)) {
                hit = true;
                v.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
        }
        if !hit {
            return None;
        }
        let inv = 1.0 / grams.len() as f64;
        v.iter_mut().for_each(|x| *x *= inv);
        Some(v)
    }

    /// Top-`k` tokens by cosine similarity to `token`, excluding the token
    /// itself; ties broken by token order.
    pub fn nearest_neighbors(&self, token: &str, k: usize) -> Result<Vec<(String, f64)>, KgeError> {
        self.nearest_neighbors_with(token, k, ExecMode::Sequential)
    }

    pub fn nearest_neighbors_with(
        &self,
        token: &str,
        k: usize,
        mode: ExecMode,
    ) -> Result<Vec<(String, f64)>, KgeError> {
        if k == 0 {
            return Err(KgeError::Invalid("k must be at least 1".into()));
        }
        let q = self.vector(token).ok_or_else(|| KgeError::UnknownToken(token.to_string()))?;
        let qn = norm(&q);
        if qn == 0.0 {
            return Err(KgeError::ZeroVector(token.to_string()));
        }
        let scores = par::map_range(mode, self.tokens.len(), |i| {
            let v = self.row(i);
            let n = norm(v);
            if n == 0.0 {
                0.0
            } else {
                q.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / (qn * n)
            }
        });
        let mut ranked: Vec<(String, f64)> = self
            .tokens
            .iter()
            .zip(scores)
            .filter(|(t, _)| t.as_str() != token)
            .map(|(t, s)| (t.clone(), s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        Ok(ranked)
    }

    /// word2vec text: `count dim` header, then `token v1 … vd` per line.
    pub fn to_word2vec(&self) -> String {
        let mut out = format!("{} {}\n", self.tokens.len(), self.dim);
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(t);
            for x in self.row(i) {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Sidecar for subword buckets: header `minn maxn buckets hash`, then
    /// `bucket v1 … vd` lines.
    pub fn subwords_to_text(&self) -> Option<String> {
        let sw = self.subwords.as_ref()?;
        let mut out = format!("{} {} {} {} {}\n", sw.min_n, sw.max_n, sw.bucket_count, SUBWORD_HASH, self.dim);
        for (b, row) in &sw.buckets {
            out.push_str(&b.to_string());
            for x in row {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        Some(out)
    }

    pub fn from_word2vec(text: &str, subwords: Option<&str>) -> Result<Self, KgeError> {
        let table = crate::fusion::EmbeddingTable::parse_word2vec(text)
            .map_err(|e| KgeError::Invalid(e.to_string()))?;
        let dim = table.dim();
        let (tokens, vectors) = table.into_parts();
        let sw = match subwords {
            Some(s) => Some(parse_subwords(s, dim)?),
            None => None,
        };
        KgEmbedding::from_parts(tokens, vectors, dim, sw)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn parse_subwords(text: &str, dim: usize) -> Result<SubwordTable, KgeError> {
    let mut lines = text.lines();
    let bad = |l: usize, m: &str| KgeError::Invalid(format!("subword file line {l}: {m}"));
    let header: Vec<&str> = lines.next().ok_or_else(|| bad(1, "missing header"))?.split(' ').collect();
    if header.len() != 5 || header[3] != SUBWORD_HASH {
        return Err(bad(1, "expected `minn maxn buckets fnv1a32 dim`"));
    }
    let p = |s: &str| s.parse::<usize>().map_err(|_| bad(1, "bad number"));
    let (min_n, max_n, bucket_count, d) = (p(header[0])?, p(header[1])?, p(header[2])? as u32, p(header[4])?);
    if d != dim {
        return Err(bad(1, "dimension differs from embedding"));
    }
    let mut buckets = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let mut parts = line.split(' ');
        let b: u32 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(i + 2, "bad bucket id"))?;
        let row: Vec<f64> = parts
            .map(|s| s.parse::<f64>().map_err(|_| bad(i + 2, "bad float")))
            .collect::<Result<_, _>>()?;
        if row.len() != dim {
            return Err(bad(i + 2, "wrong dimension"));
        }
        buckets.insert(b, row);
    }
    Ok(SubwordTable { min_n, max_n, bucket_count, buckets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(rows: &[(&str, [f64; 2])]) -> KgEmbedding {
        KgEmbedding::from_parts(
            rows.iter().map(|(t, _)| t.to_string()).collect(),
            rows.iter().flat_map(|(_, v)| v.iter().copied()).collect(),
            2,
            None,
        )
        .unwrap()
    }

    #[test]
    fn two_tokens_k1() {
        let e = emb(&[("a", [1.0, 0.0]), ("b", [0.5, 0.5])]);
        let nn = e.nearest_neighbors("a", 1).unwrap();
        assert_eq!(nn[0].0, "b");
    }

    #[test]
    fn zero_query_is_error() {
        let e = emb(&[("a", [0.0, 0.0]), ("b", [0.5, 0.5])]);
        assert!(matches!(e.nearest_neighbors("a", 1), Err(KgeError::ZeroVector(_))));
        assert!(matches!(e.nearest_neighbors("zzz", 1), Err(KgeError::UnknownToken(_))));
        assert!(e.nearest_neighbors("b", 0).is_err());
    }

    #[test]
    fn ranking_matches_brute_force() {
        let rows = [
            ("q", [1.0, 0.2]),
            ("a", [0.9, 0.1]),
            ("b", [-1.0, 0.0]),
            ("c", [0.1, 1.0]),
            ("d", [2.0, 0.4]),
        ];
        let e = emb(&rows);
        // brute force cosine of q against every other row
        let cos = |x: [f64; 2], y: [f64; 2]| {
            (x[0] * y[0] + x[1] * y[1]) / ((x[0].hypot(x[1])) * (y[0].hypot(y[1])))
        };
        let mut want: Vec<(String, f64)> =
            rows[1..].iter().map(|(t, v)| (t.to_string(), cos(rows[0].1, *v))).collect();
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        // d is parallel to q (cos 1), so it ranks first
        assert_eq!(want[0].0, "d");
        let got = e.nearest_neighbors_with("q", 4, ExecMode::Parallel).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.0, w.0);
            assert!((g.1 - w.1).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_break_lexicographically() {
        let e = emb(&[("q", [1.0, 0.0]), ("z", [1.0, 0.0]), ("m", [2.0, 0.0])]);
        let nn = e.nearest_neighbors("q", 2).unwrap();
        assert_eq!(nn.iter().map(|x| x.0.as_str()).collect::<Vec<_>>(), vec!["m", "z"]);
    }

    #[test]
    fn word2vec_and_subword_roundtrip() {
        let mut buckets = BTreeMap::new();
        buckets.insert(7u32, vec![0.25, -1.5]);
        let sw = SubwordTable { min_n: 2, max_n: 3, bucket_count: 16, buckets };
        let e = KgEmbedding::from_parts(vec!["x".into(), "y_z".into()], vec![0.1, 0.2, 1e-9, -3.0], 2, Some(sw)).unwrap();
        let text = e.to_word2vec();
        assert!(text.starts_with("2 2\n"));
        let back = KgEmbedding::from_word2vec(&text, e.subwords_to_text().as_deref()).unwrap();
        assert_eq!(back.get("y_z").unwrap(), &[1e-9, -3.0]);
        assert_eq!(back.subwords(), e.subwords());
    }
}
