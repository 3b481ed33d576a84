//! Embedding tables and the concat / init fusion of KG embeddings.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::Rng;
use thiserror::Error;

use crate::kge::KgEmbedding;
use crate::linker::uri_part;
use crate::text::normalize_label;
use crate::tokenize::{Vocabulary, END_OF_WORD, PAD_ID, RESERVED};

pub const INIT_RANGE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("KG embedding dim {kge} differs from model embedding dim {model}")]
    DimMismatch { kge: usize, model: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Token vectors of uniform dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable { dim, tokens: Vec::new(), index: HashMap::new(), data: Vec::new() }
    }

    /// Inserts or replaces a row.
    pub fn insert(&mut self, token: &str, v: &[f64]) -> Result<(), FusionError> {
        if v.len() != self.dim {
            return Err(FusionError::Format {
                line: 0,
                message: format!("vector for {token:?} has dim {} not {}", v.len(), self.dim),
            });
        }
        match self.index.get(token) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(v),
            None => {
                self.index.insert(token.to_string(), self.tokens.len());
                self.tokens.push(token.to_string());
                self.data.extend_from_slice(v);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<f64>) {
        (self.tokens, self.data)
    }

    /// Parses word2vec text (`count dim` header). Trailing spaces as written
    /// by fastText are accepted.
    pub fn parse_word2vec(text: &str) -> Result<Self, FusionError> {
        let mut lines = text.lines();
        let bad = |line: usize, message: String| FusionError::Format { line, message };
        let header = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(1, "header must be `count dim`".into()))?;
        let [count, dim] = h[..] else {
            return Err(bad(1, "header must be `count dim`".into()));
        };
        if dim == 0 {
            return Err(bad(1, "dimension must be positive".into()));
        }
        let mut table = EmbeddingTable::new(dim);
        let mut last = 1;
        for (i, line) in lines.enumerate() {
            let ln = i + 2;
            last = ln;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default();
            let v: Vec<f64> = parts
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(ln, "bad float".into()))?;
            if v.len() != dim {
                return Err(bad(ln, format!("expected {dim} values, found {}", v.len())));
            }
            if table.index.contains_key(token) {
                return Err(bad(ln, format!("duplicate token {token:?}")));
            }
            if table.len() == count {
                return Err(bad(ln, format!("more rows than the {count} declared")));
            }
            table.insert(token, &v)?;
        }
        if table.len() != count {
            return Err(bad(last + 1, format!("header declares {count} rows, found {}", table.len())));
        }
        Ok(table)
    }

    pub fn to_word2vec(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(t);
            for x in &self.data[i * self.dim..(i + 1) * self.dim] {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, FusionError> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        EmbeddingTable::parse_word2vec(&s)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), FusionError> {
        w.write_all(self.to_word2vec().as_bytes())?;
        Ok(())
    }

    pub fn from_kge(kge: &KgEmbedding) -> Self {
        let mut t = EmbeddingTable::new(kge.dim());
        for (i, tok) in kge.tokens().iter().enumerate() {
            t.insert(tok, kge.row(i)).expect("uniform dim");
        }
        t
    }
}

/// Source of pretrained vectors for fusion.
pub trait VectorSource {
    fn dim(&self) -> usize;
    /// Exact lookup only.
    fn exact(&self, key: &str) -> Option<Vec<f64>>;
    /// Lookup with any composition the source supports.
    fn composed(&self, key: &str) -> Option<Vec<f64>> {
        self.exact(key)
    }
}

impl VectorSource for KgEmbedding {
    fn dim(&self) -> usize {
        KgEmbedding::dim(self)
    }
    fn exact(&self, key: &str) -> Option<Vec<f64>> {
        self.get(key).map(<[f64]>::to_vec)
    }
    fn composed(&self, key: &str) -> Option<Vec<f64>> {
        self.vector(key)
    }
}

impl VectorSource for EmbeddingTable {
    fn dim(&self) -> usize {
        self.dim
    }
    fn exact(&self, key: &str) -> Option<Vec<f64>> {
        self.get(key).map(<[f64]>::to_vec)
    }
}

/// Resolves a vocabulary token to a pretrained vector: the URI part of an
/// annotation token, else the token itself, its normalized form, then any
/// subword composition. A trailing BPE end marker is ignored.
pub fn resolve<V: VectorSource + ?Sized>(src: &V, token: &str) -> Option<Vec<f64>> {
    if RESERVED.contains(&token) {
        return None;
    }
    let token = token.strip_suffix(END_OF_WORD).unwrap_or(token);
    if token.is_empty() {
        return None;
    }
    if let Some(u) = uri_part(token) {
        return src.exact(u);
    }
    if let Some(v) = src.exact(token) {
        return Some(v);
    }
    let norm = normalize_label(token);
    src.exact(&norm).or_else(|| src.composed(&norm))
}

/// Vocabulary rows whose token is itself a KGE entry (by URI part, exact or
/// normalized form), as opposed to rows reached only by subword composition.
pub fn direct_rows<V: VectorSource + ?Sized>(src: &V, vocab: &Vocabulary) -> Vec<usize> {
    vocab
        .tokens()
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            if RESERVED.contains(&t.as_str()) {
                return false;
            }
            let t = t.strip_suffix(END_OF_WORD).unwrap_or(t);
            match uri_part(t) {
                Some(u) => src.exact(u).is_some(),
                None => !t.is_empty() && (src.exact(t).is_some() || src.exact(&normalize_label(t)).is_some()),
            }
        })
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Coverage {
    pub covered: usize,
    pub zero_filled: usize,
    pub random_init: usize,
}

impl Coverage {
    pub fn total(&self) -> usize {
        self.covered + self.zero_filled + self.random_init
    }

    pub fn report(&self) -> String {
        format!("covered\t{}\nzero_filled\t{}\nrandom_init\t{}\n", self.covered, self.zero_filled, self.random_init)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    Concat,
    Init,
}

impl std::str::FromStr for FusionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "concat" => Ok(FusionMode::Concat),
            "init" => Ok(FusionMode::Init),
            o => Err(format!("unknown fusion mode {o:?} (expected concat|init)")),
        }
    }
}

/// Row-major `|vocab| x dim` matrix aligned with a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbeddingMatrix {
    pub mode: FusionMode,
    pub rows: usize,
    pub dim: usize,
    /// Width of the leading model-embedding block (0 in init mode).
    pub model_dim: usize,
    pub data: Vec<f64>,
    pub coverage: Coverage,
}

impl FusedEmbeddingMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn kge_slice(&self, i: usize) -> &[f64] {
        &self.row(i)[self.model_dim..]
    }
}

/// Appends the resolved pretrained vector (or zeros) to each model row.
/// Vocabulary tokens missing from `nmt_emb` get a zero model block.
pub fn fuse_concat<V: VectorSource + ?Sized>(
    nmt_emb: &EmbeddingTable,
    kge: &V,
    vocab: &Vocabulary,
) -> FusedEmbeddingMatrix {
    let (m, d) = (nmt_emb.dim(), kge.dim());
    let dim = m + d;
    let mut data = vec![0.0; vocab.len() * dim];
    let mut coverage = Coverage::default();
    for (i, tok) in vocab.tokens().iter().enumerate() {
        let row = &mut data[i * dim..(i + 1) * dim];
        if let Some(e) = nmt_emb.get(tok) {
            row[..m].copy_from_slice(e);
        }
        match resolve(kge, tok) {
            Some(v) => {
                row[m..].copy_from_slice(&v);
                coverage.covered += 1;
            }
            None => coverage.zero_filled += 1,
        }
    }
    FusedEmbeddingMatrix { mode: FusionMode::Concat, rows: vocab.len(), dim, model_dim: m, data, coverage }
}

/// Seeds a model embedding matrix from pretrained vectors; unresolved rows
/// are uniform in `[-0.1, 0.1]` and the padding row is zero.
pub fn fuse_init<V: VectorSource + ?Sized, R: Rng + ?Sized>(
    kge: &V,
    vocab: &Vocabulary,
    m: usize,
    rng: &mut R,
) -> Result<FusedEmbeddingMatrix, FusionError> {
    if kge.dim() != m {
        return Err(FusionError::DimMismatch { kge: kge.dim(), model: m });
    }
    let mut data = vec![0.0; vocab.len() * m];
    let mut coverage = Coverage::default();
    for (i, tok) in vocab.tokens().iter().enumerate() {
        let row = &mut data[i * m..(i + 1) * m];
        if i == PAD_ID {
            coverage.zero_filled += 1;
            continue;
        }
        match resolve(kge, tok) {
            Some(v) => {
                row.copy_from_slice(&v);
                coverage.covered += 1;
            }
            None => {
                row.iter_mut().for_each(|x| *x = rng.random_range(-INIT_RANGE..=INIT_RANGE));
                coverage.random_init += 1;
            }
        }
    }
    Ok(FusedEmbeddingMatrix { mode: FusionMode::Init, rows: vocab.len(), dim: m, model_dim: 0, data, coverage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kge(rows: &[(&str, Vec<f64>)]) -> KgEmbedding {
        let dim = rows[0].1.len();
        KgEmbedding::from_parts(
            rows.iter().map(|(t, _)| t.to_string()).collect(),
            rows.iter().flat_map(|(_, v)| v.iter().copied()).collect(),
            dim,
            None,
        )
        .unwrap()
    }

    fn vocab(ts: &[&str]) -> Vocabulary {
        Vocabulary::from_tokens(ts.iter().map(|s| s.to_string()))
    }

    #[test]
    fn word2vec_roundtrip() {
        let mut t = EmbeddingTable::new(4);
        t.insert("a", &[0.1, -2.5, 1e-7, 3.0]).unwrap();
        t.insert("b|dbr_B", &[1.0 / 3.0, 0.0, -0.0, 12345.678]).unwrap();
        t.insert("c", &[f64::MIN_POSITIVE, 1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = EmbeddingTable::read(&buf[..]).unwrap();
        assert_eq!(back.tokens(), t.tokens());
        for tok in t.tokens() {
            for (x, y) in t.get(tok).unwrap().iter().zip(back.get(tok).unwrap()) {
                assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn short_file_errors_at_eof() {
        let text = "5 2\na 1 2\nb 1 2\nc 1 2\nd 1 2\n";
        match EmbeddingTable::parse_word2vec(text) {
            Err(FusionError::Format { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_row_reports_line() {
        match EmbeddingTable::parse_word2vec("2 2\na 1 2\nb 1\n") {
            Err(FusionError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(EmbeddingTable::parse_word2vec("x y\n").is_err());
    }

    #[test]
    fn full_scale_concat_dim() {
        let e = {
            let mut t = EmbeddingTable::new(500);
            t.insert("cancer", &vec![0.5; 500]).unwrap();
            t
        };
        let k = kge(&[("dbr_Cancer", vec![0.25; 500])]);
        let f = fuse_concat(&e, &k, &vocab(&["cancer|dbr_Cancer", "cancer"]));
        assert_eq!(f.dim, 1000);
    }

    #[test]
    fn concat_slices() {
        let mut e = EmbeddingTable::new(2);
        e.insert("cancer|dbr_Cancer", &[1.0, 2.0]).unwrap();
        e.insert("ward", &[3.0, 4.0]).unwrap();
        let k = kge(&[("dbr_Cancer", vec![7.0, 8.0, 9.0])]);
        let v = vocab(&["cancer|dbr_Cancer", "ward"]);
        let f = fuse_concat(&e, &k, &v);
        let i = v.id("cancer|dbr_Cancer").unwrap();
        assert_eq!(f.row(i), &[1.0, 2.0, 7.0, 8.0, 9.0]);
        let w = v.id("ward").unwrap();
        assert_eq!(f.row(w), &[3.0, 4.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.coverage, Coverage { covered: 1, zero_filled: 5, random_init: 0 });
    }

    #[test]
    fn init_dim_mismatch() {
        let k = kge(&[("x", vec![0.0; 300])]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        match fuse_init(&k, &vocab(&[]), 500, &mut rng) {
            Err(FusionError::DimMismatch { kge: 300, model: 500 }) => {}
            other => panic!("{other:?}"),
        }
        let k = kge(&[("x", vec![0.0; 500])]);
        assert!(fuse_init(&k, &vocab(&[]), 500, &mut rng).is_ok());
    }

    #[test]
    fn init_rows() {
        let k = kge(&[("cancer", vec![0.7, -0.3]), ("dbr_Kiwi", vec![0.5, 0.5])]);
        let v = vocab(&["cancer", "kiwi|dbr_Kiwi", "Cancer", "ward", "can@@", "cancer</w>"]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = fuse_init(&k, &v, 2, &mut rng).unwrap();
        assert_eq!(f.row(PAD_ID), &[0.0, 0.0]);
        assert_eq!(f.row(v.id("cancer").unwrap()), &[0.7, -0.3]);
        assert_eq!(f.row(v.id("Cancer").unwrap()), &[0.7, -0.3]);
        assert_eq!(f.row(v.id("cancer</w>").unwrap()), &[0.7, -0.3]);
        assert_eq!(f.row(v.id("kiwi|dbr_Kiwi").unwrap()), &[0.5, 0.5]);
        for x in f.row(v.id("ward").unwrap()) {
            assert!(x.abs() <= INIT_RANGE);
        }
        assert_eq!(f.coverage, Coverage { covered: 4, zero_filled: 1, random_init: 5 });
        assert_eq!(f.coverage.total(), v.len());
    }

    #[test]
    fn direct_rows_skip_composed_and_reserved() {
        let k = kge(&[("cancer", vec![0.7, -0.3]), ("dbr_Kiwi", vec![0.5, 0.5])]);
        let v = vocab(&["cancer", "kiwi|dbr_Kiwi", "Cancer", "ward", "kiwi|dbr_Ward"]);
        let names: Vec<&str> = direct_rows(&k, &v).into_iter().map(|i| v.token(i)).collect();
        assert_eq!(names, ["cancer", "kiwi|dbr_Kiwi", "Cancer"]);
    }

    #[test]
    fn external_table_as_source() {
        let mut mono = EmbeddingTable::new(2);
        mono.insert("ward", &[0.2, 0.4]).unwrap();
        let v = vocab(&["ward"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = fuse_init(&mono, &v, 2, &mut rng).unwrap();
        assert_eq!(f.row(v.id("ward").unwrap()), &[0.2, 0.4]);
    }
}
