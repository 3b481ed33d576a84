//! Bag-of-words linear classifier over graph tokens, trained with
//! hierarchical softmax.
//!
//! For a record with input rows `z` and label `y`, the hidden vector is the
//! mean of the rows of `input` selected by `z` (tokens plus, in semantic
//! mode, their subword buckets). The label probability is the product over
//! the label's Huffman path of `sigmoid(±output[node] · hidden)`; the loss is
//! its negative log, averaged over records.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kb::KgeRecordSet;
use crate::kge::embedding::{KgEmbedding, SubwordTable};
use crate::kge::huffman::{build_huffman, HuffmanTree};
use crate::kge::subword::{bucket_of, subword_eligible, subword_ngrams};
use crate::kge::{KgeConfig, KgeError};

#[derive(Debug, Clone)]
struct Encoded {
    rows: Vec<usize>,
    leaf: usize,
}

#[derive(Debug)]
pub struct KgeModel {
    config: KgeConfig,
    tokens: Vec<String>,
    token_index: HashMap<String, usize>,
    token_subwords: Vec<Vec<usize>>,
    bucket_rows: BTreeMap<u32, usize>,
    tree: HuffmanTree,
    label_index: HashMap<String, usize>,
    input: Vec<f64>,
    output: Vec<f64>,
    loss_log: Vec<f64>,
    bucket_accesses: AtomicU64,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shared parameter storage for lock-free multi-threaded SGD. Element
/// updates are relaxed loads and stores, so concurrent read-modify-write
/// races can lose updates; with one thread the arithmetic is identical to
/// plain `f64` code.
struct SharedParams(Vec<AtomicU64>);

impl SharedParams {
    fn from(v: &[f64]) -> Self {
        SharedParams(v.iter().map(|x| AtomicU64::new(x.to_bits())).collect())
    }

    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, i: usize, d: f64) {
        self.0[i].store((self.get(i) + d).to_bits(), Ordering::Relaxed);
    }

    fn into_vec(self) -> Vec<f64> {
        self.0.into_iter().map(|a| f64::from_bits(a.into_inner())).collect()
    }
}

impl KgeModel {
    /// Builds the dictionary, subword buckets and Huffman tree for `records`
    /// and initializes parameters (input rows uniform in ±1/dim, output zero).
    pub fn new(records: &KgeRecordSet, config: &KgeConfig) -> Result<Self, KgeError> {
        config.validate()?;
        if records.is_empty() {
            return Err(KgeError::EmptyRecords);
        }
        let mut tokens = Vec::new();
        let mut token_index = HashMap::new();
        let mut label_counts: BTreeMap<&str, u64> = BTreeMap::new();
        for r in &records.records {
            for f in &r.features {
                if !token_index.contains_key(f) {
                    token_index.insert(f.clone(), tokens.len());
                    tokens.push(f.clone());
                }
            }
            *label_counts.entry(r.label.as_str()).or_default() += 1;
        }
        let tree = build_huffman(label_counts.iter().map(|(l, c)| (*l, *c)))?;
        let label_index = tree.labels().iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();

        let mut bucket_rows = BTreeMap::new();
        let mut token_subwords = vec![Vec::new(); tokens.len()];
        if config.uses_subwords() {
            let mut next = tokens.len();
            for (i, t) in tokens.iter().enumerate() {
                if !subword_eligible(t) {
                    continue;
                }
                for g in subword_ngrams(t, config.min_subword, config.max_subword)? {
                    let b = bucket_of(&g, config.bucket_count);
                    let row = *bucket_rows.entry(b).or_insert_with(|| {
                        next += 1;
                        next - 1
                    });
                    token_subwords[i].push(row);
                }
            }
        }
        let rows = tokens.len() + bucket_rows.len();
        let dim = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 1.0 / dim as f64;
        let input = (0..rows * dim).map(|_| rng.random_range(-bound..bound)).collect();
        let output = vec![0.0; tree.internal_count() * dim];
        Ok(KgeModel {
            config: config.clone(),
            tokens,
            token_index,
            token_subwords,
            bucket_rows,
            tree,
            label_index,
            input,
            output,
            loss_log: Vec::new(),
            bucket_accesses: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &KgeConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tree(&self) -> &HuffmanTree {
        &self.tree
    }

    /// Mean training loss per epoch.
    pub fn loss_log(&self) -> &[f64] {
        &self.loss_log
    }

    /// Number of subword-bucket row reads so far (training and lookup).
    pub fn bucket_accesses(&self) -> u64 {
        self.bucket_accesses.load(Ordering::Relaxed)
    }

    pub fn input_params(&self) -> &[f64] {
        &self.input
    }

    pub fn input_params_mut(&mut self) -> &mut [f64] {
        &mut self.input
    }

    pub fn output_params(&self) -> &[f64] {
        &self.output
    }

    pub fn output_params_mut(&mut self) -> &mut [f64] {
        &mut self.output
    }

    /// Row index of a dictionary token in the input matrix.
    pub fn token_row(&self, token: &str) -> Option<usize> {
        self.token_index.get(token).copied()
    }

    pub fn label_leaf(&self, label: &str) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    fn rows_for(&self, token: &str, rows: &mut Vec<usize>) -> bool {
        match self.token_index.get(token) {
            Some(&i) => {
                rows.push(i);
                if !self.token_subwords[i].is_empty() {
                    self.bucket_accesses.fetch_add(self.token_subwords[i].len() as u64, Ordering::Relaxed);
                    rows.extend_from_slice(&self.token_subwords[i]);
                }
                true
            }
            None => false,
        }
    }

    fn encode(&self, records: &KgeRecordSet) -> Result<Vec<Encoded>, KgeError> {
        records
            .records
            .iter()
            .map(|r| {
                let mut rows = Vec::new();
                for f in &r.features {
                    if !self.rows_for(f, &mut rows) {
                        return Err(KgeError::Internal(format!("feature {f:?} not in dictionary")));
                    }
                }
                let leaf = self
                    .label_leaf(&r.label)
                    .ok_or_else(|| KgeError::Internal(format!("label {:?} absent from Huffman tree", r.label)))?;
                Ok(Encoded { rows, leaf })
            })
            .collect()
    }

    fn hidden(&self, rows: &[usize]) -> Vec<f64> {
        let dim = self.dim();
        let mut h = vec![0.0; dim];
        for &r in rows {
            for (hj, v) in h.iter_mut().zip(&self.input[r * dim..(r + 1) * dim]) {
                *hj += v;
            }
        }
        let inv = 1.0 / rows.len() as f64;
        h.iter_mut().for_each(|x| *x *= inv);
        h
    }

    fn record_loss(&self, hidden: &[f64], leaf: usize) -> f64 {
        let dim = self.dim();
        let mut loss = 0.0;
        for (&node, &bit) in self.tree.path(leaf).iter().zip(self.tree.code(leaf)) {
            let x = dot(&self.output[node * dim..(node + 1) * dim], hidden);
            loss += if bit { softplus(-x) } else { softplus(x) };
        }
        loss
    }

    /// Mean hierarchical-softmax loss over `records` at the current parameters.
    pub fn objective(&self, records: &KgeRecordSet) -> Result<f64, KgeError> {
        let enc = self.encode(records)?;
        let total: f64 = enc.iter().map(|e| self.record_loss(&self.hidden(&e.rows), e.leaf)).sum();
        Ok(total / enc.len() as f64)
    }

    /// Analytic gradient of [`objective`](Self::objective) with respect to
    /// the input matrix and the internal-node vectors.
    pub fn objective_gradient(&self, records: &KgeRecordSet) -> Result<(Vec<f64>, Vec<f64>), KgeError> {
        let enc = self.encode(records)?;
        let dim = self.dim();
        let scale = 1.0 / enc.len() as f64;
        let mut d_in = vec![0.0; self.input.len()];
        let mut d_out = vec![0.0; self.output.len()];
        for e in &enc {
            let h = self.hidden(&e.rows);
            let mut dh = vec![0.0; dim];
            for (&node, &bit) in self.tree.path(e.leaf).iter().zip(self.tree.code(e.leaf)) {
                let w = &self.output[node * dim..(node + 1) * dim];
                let g = (sigmoid(dot(w, &h)) - if bit { 1.0 } else { 0.0 }) * scale;
                for j in 0..dim {
                    d_out[node * dim + j] += g * h[j];
                    dh[j] += g * w[j];
                }
            }
            let share = 1.0 / e.rows.len() as f64;
            for &r in &e.rows {
                for j in 0..dim {
                    d_in[r * dim + j] += dh[j] * share;
                }
            }
        }
        Ok((d_in, d_out))
    }

    /// SGD with linearly decaying learning rate. Each epoch visits a seeded
    /// permutation of the records; with `threads > 1` workers update shared
    /// parameters without locking.
    pub fn train(&mut self, records: &KgeRecordSet) -> Result<(), KgeError> {
        let enc = self.encode(records)?;
        let dim = self.dim();
        let epochs = self.config.epochs;
        let threads = self.config.threads.min(enc.len()).max(1);
        let total_steps = (epochs * enc.len()) as f64;
        let lr0 = self.config.lr;
        let input = SharedParams::from(&self.input);
        let output = SharedParams::from(&self.output);
        let progress = AtomicUsize::new(0);
        let tree = &self.tree;
        let mut order: Vec<usize> = (0..enc.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x9e37_79b9_7f4a_7c15);

        let worker = |chunk: &[usize]| -> f64 {
            let mut loss = 0.0;
            let mut h = vec![0.0; dim];
            let mut grad = vec![0.0; dim];
            for &ri in chunk {
                let e = &enc[ri];
                let step = progress.fetch_add(1, Ordering::Relaxed) as f64;
                let lr = lr0 * (1.0 - step / total_steps).max(0.0);
                h.iter_mut().for_each(|x| *x = 0.0);
                for &r in &e.rows {
                    for (j, hj) in h.iter_mut().enumerate() {
                        *hj += input.get(r * dim + j);
                    }
                }
                let inv = 1.0 / e.rows.len() as f64;
                h.iter_mut().for_each(|x| *x *= inv);
                grad.iter_mut().for_each(|x| *x = 0.0);
                for (&node, &bit) in tree.path(e.leaf).iter().zip(tree.code(e.leaf)) {
                    let base = node * dim;
                    let x: f64 = (0..dim).map(|j| output.get(base + j) * h[j]).sum();
                    let target = if bit { 1.0 } else { 0.0 };
                    loss += if bit { softplus(-x) } else { softplus(x) };
                    let alpha = lr * (target - sigmoid(x));
                    for j in 0..dim {
                        grad[j] += alpha * output.get(base + j);
                        output.add(base + j, alpha * h[j]);
                    }
                }
                for &r in &e.rows {
                    for j in 0..dim {
                        input.add(r * dim + j, grad[j] * inv);
                    }
                }
            }
            loss
        };

        for _ in 0..epochs {
            order.shuffle(&mut rng);
            let loss: f64 = if threads == 1 {
                worker(&order)
            } else {
                let per = order.len().div_ceil(threads);
                std::thread::scope(|s| {
                    let handles: Vec<_> = order.chunks(per).map(|c| s.spawn(|| worker(c))).collect();
                    handles.into_iter().map(|h| h.join().expect("kge worker panicked")).sum()
                })
            };
            self.loss_log.push(loss / enc.len() as f64);
        }
        self.input = input.into_vec();
        self.output = output.into_vec();
        Ok(())
    }

    /// Log-probability of every label (indexed by leaf) for a bag of input
    /// tokens. Unknown tokens are ignored; `None` when nothing is known.
    pub fn label_log_probs(&self, features: &[&str]) -> Option<Vec<f64>> {
        let mut rows = Vec::new();
        for f in features {
            self.rows_for(f, &mut rows);
        }
        if rows.is_empty() {
            return None;
        }
        let h = self.hidden(&rows);
        let dim = self.dim();
        let n = self.tree.label_count();
        let mut logp = vec![0.0; 2 * n - 1];
        for i in (0..self.tree.internal_count()).rev() {
            let x = dot(&self.output[i * dim..(i + 1) * dim], &h);
            let (c0, c1) = self.tree.children(i);
            let base = logp[n + i];
            logp[c0] = base - softplus(x);
            logp[c1] = base - softplus(-x);
        }
        logp.truncate(n);
        Some(logp)
    }

    /// Label names aligned with [`label_log_probs`](Self::label_log_probs).
    pub fn labels(&self) -> &[String] {
        self.tree.labels()
    }

    /// The token's input row, or for unknown label-like tokens in semantic
    /// mode the mean of its subword-bucket rows.
    pub fn vector(&self, token: &str) -> Option<Vec<f64>> {
        let dim = self.dim();
        if let Some(i) = self.token_row(token) {
            return Some(self.input[i * dim..(i + 1) * dim].to_vec());
        }
        if !self.config.uses_subwords() || !subword_eligible(token) {
            return None;
        }
        let grams = subword_ngrams(token, self.config.min_subword, self.config.max_subword).ok()?;
        let mut v = vec![0.0; dim];
        let mut hit = false;
        for g in &grams {
            self.bucket_accesses.fetch_add(1, Ordering::Relaxed);
            if let Some(&r) = self.bucket_rows.get(&bucket_of(g, self.config.bucket_count)) {
                hit = true;
                for (vj, x) in v.iter_mut().zip(&self.input[r * dim..(r + 1) * dim]) {
                    *vj += x;
                }
            }
        }
        if !hit {
            return None;
        }
        let inv = 1.0 / grams.len() as f64;
        v.iter_mut().for_each(|x| *x *= inv);
        Some(v)
    }

    /// Freezes the learned input rows into a lookup table.
    pub fn embedding(&self) -> KgEmbedding {
        let dim = self.dim();
        let subwords = self.config.uses_subwords().then(|| SubwordTable {
            min_n: self.config.min_subword,
            max_n: self.config.max_subword,
            bucket_count: self.config.bucket_count,
            buckets: self
                .bucket_rows
                .iter()
                .map(|(&b, &r)| (b, self.input[r * dim..(r + 1) * dim].to_vec()))
                .collect(),
        });
        let vectors = self.input[..self.tokens.len() * dim].to_vec();
        KgEmbedding::from_parts(self.tokens.clone(), vectors, dim, subwords)
            .expect("model rows are consistent")
    }
}

/// Builds and trains a model on `records`.
pub fn train_kge(records: &KgeRecordSet, config: &KgeConfig) -> Result<KgeModel, KgeError> {
    let mut m = KgeModel::new(records, config)?;
    m.train(records)?;
    Ok(m)
}
