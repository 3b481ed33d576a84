//! Mini-batch training with teacher forcing.

use std::collections::{BTreeSet, HashMap};

use ndarray::{ArrayView1, ArrayViewMut1, IntoNdProducer, Ix1, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use kgnmt_core::par::{self, ExecMode};
use kgnmt_core::tokenize::{BOS_ID, EOS_ID};

use crate::model::Model;
use crate::tensor::{Grads, Graph, Mat, ParamId};
use crate::NmtError;

/// Learning-rate schedule for Adam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant { lr: f64 },
    /// `factor * dim^-0.5 * min(step^-0.5, step * warmup^-1.5)`.
    InverseSqrt { factor: f64, warmup: usize, dim: usize },
}

impl Schedule {
    pub fn lr(&self, step: usize) -> f64 {
        match *self {
            Schedule::Constant { lr } => lr,
            Schedule::InverseSqrt { factor, warmup, dim } => {
                let s = step.max(1) as f64;
                factor * (dim as f64).powf(-0.5) * s.powf(-0.5).min(s * (warmup.max(1) as f64).powf(-1.5))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { schedule: Schedule, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam(schedule: Schedule) -> Self {
        Optimizer::Adam { schedule, beta1: 0.9, beta2: 0.98, eps: 1e-9 }
    }

    pub fn lr(&self, step: usize) -> f64 {
        match self {
            Optimizer::Sgd { lr } => *lr,
            Optimizer::Adam { schedule, .. } => schedule.lr(step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Sentences per batch; ignored when `token_budget` is set.
    pub batch_size: usize,
    /// Batches are filled up to this many source plus target tokens.
    pub token_budget: Option<usize>,
    pub optimizer: Optimizer,
    pub dropout: f64,
    pub max_len: usize,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: f64,
    /// Sentences per gradient shard. Shards are summed in order, so results
    /// do not depend on the thread count.
    pub shard_size: usize,
    /// Update only the embedding rows of tokens present in the batch.
    #[serde(default)]
    pub sparse_embeddings: bool,
}

impl TrainConfig {
    /// Batch 32, SGD at 0.0002, dropout 0.3, sentences up to 80 tokens.
    pub fn full_scale_rnn() -> Self {
        TrainConfig {
            batch_size: 32,
            token_budget: None,
            optimizer: Optimizer::Sgd { lr: 0.0002 },
            dropout: 0.3,
            max_len: 80,
            epochs: 10,
            seed: 1,
            clip_norm: 5.0,
            shard_size: 8,
            sparse_embeddings: true,
        }
    }

    /// Token batches of 4076, Adam with warmup scaled by 2, dropout 0.1.
    pub fn full_scale_transformer(dim: usize) -> Self {
        TrainConfig {
            token_budget: Some(4076),
            optimizer: Optimizer::adam(Schedule::InverseSqrt { factor: 2.0, warmup: 8000, dim }),
            dropout: 0.1,
            ..TrainConfig::full_scale_rnn()
        }
    }

    /// Desk-scale RNN training.
    pub fn rnn() -> Self {
        TrainConfig {
            optimizer: Optimizer::adam(Schedule::Constant { lr: 0.003 }),
            epochs: 15,
            ..TrainConfig::full_scale_rnn()
        }
    }

    /// Desk-scale Transformer training: warmup shortened to 400 steps.
    pub fn transformer(dim: usize) -> Self {
        TrainConfig {
            token_budget: None,
            optimizer: Optimizer::adam(Schedule::InverseSqrt { factor: 2.0, warmup: 400, dim }),
            dropout: 0.1,
            epochs: 15,
            ..TrainConfig::full_scale_rnn()
        }
    }

    pub fn validate(&self) -> Result<(), NmtError> {
        let bad = |m: &str| Err(NmtError::Config(m.to_string()));
        if self.batch_size == 0 && self.token_budget.is_none() {
            return bad("batch_size must be positive");
        }
        if self.token_budget == Some(0) {
            return bad("token_budget must be positive");
        }
        if self.shard_size == 0 {
            return bad("shard_size must be positive");
        }
        if self.max_len == 0 {
            return bad("max_len must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout outside [0, 1)");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean per-token training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub skipped: usize,
    pub steps: usize,
    pub sentences: usize,
}

pub type Pair = (Vec<usize>, Vec<usize>);

struct Adam {
    m: Vec<Option<Mat>>,
    v: Vec<Option<Mat>>,
}

fn batches(order: &[usize], pairs: &[Pair], cfg: &TrainConfig) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    match cfg.token_budget {
        None => {
            for c in order.chunks(cfg.batch_size) {
                out.push(c.to_vec());
            }
        }
        Some(budget) => {
            let mut cur = Vec::new();
            let mut tokens = 0;
            for &i in order {
                let n = pairs[i].0.len() + pairs[i].1.len() + 1;
                if !cur.is_empty() && tokens + n > budget {
                    out.push(std::mem::take(&mut cur));
                    tokens = 0;
                }
                cur.push(i);
                tokens += n;
            }
            if !cur.is_empty() {
                out.push(cur);
            }
        }
    }
    out
}

/// Summed loss and gradients over one shard.
fn shard_grads(model: &Model, pairs: &[Pair], idx: &[usize], norm: f64, rng: Option<ChaCha8Rng>) -> (f64, Grads) {
    let src: Vec<&[usize]> = idx.iter().map(|&i| pairs[i].0.as_slice()).collect();
    let tgt: Vec<&[usize]> = idx.iter().map(|&i| pairs[i].1.as_slice()).collect();
    let mut g = Graph::new(model.params());
    let mut rng = rng;
    let loss = model.loss(&mut g, &src, &tgt, norm, rng.as_mut());
    (g.scalar(loss), g.backward(loss))
}

/// Mean per-token loss without dropout.
pub fn evaluate_loss(model: &Model, pairs: &[Pair], mode: ExecMode) -> f64 {
    let tokens: usize = pairs.iter().map(|p| p.1.len() + 1).sum();
    if tokens == 0 {
        return 0.0;
    }
    let chunks: Vec<Vec<usize>> = (0..pairs.len()).collect::<Vec<_>>().chunks(8).map(|c| c.to_vec()).collect();
    let losses = par::map(mode, &chunks, |idx| {
        let src: Vec<&[usize]> = idx.iter().map(|&i| pairs[i].0.as_slice()).collect();
        let tgt: Vec<&[usize]> = idx.iter().map(|&i| pairs[i].1.as_slice()).collect();
        let mut g = Graph::new(model.params());
        let l = model.loss(&mut g, &src, &tgt, 1.0, None);
        g.scalar(l)
    });
    losses.iter().sum::<f64>() / tokens as f64
}

/// Trains in place. Pairs with an empty source or either side longer than
/// `max_len` are skipped and counted.
pub fn train(model: &mut Model, pairs: &[Pair], cfg: &TrainConfig, mode: ExecMode) -> Result<TrainLog, NmtError> {
    cfg.validate()?;
    let kept: Vec<usize> = (0..pairs.len())
        .filter(|&i| !pairs[i].0.is_empty() && pairs[i].0.len() <= cfg.max_len && pairs[i].1.len() <= cfg.max_len)
        .collect();
    let mut log = TrainLog { skipped: pairs.len() - kept.len(), sentences: kept.len(), ..TrainLog::default() };
    if kept.is_empty() {
        return Err(NmtError::Config("no training pairs within max_len".into()));
    }
    if cfg.epochs == 0 {
        return Ok(log);
    }
    model.set_dropout(cfg.dropout);
    let n_params = model.params().len();
    let mut adam = Adam { m: vec![None; n_params], v: vec![None; n_params] };
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = kept;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in batches(&order, pairs, cfg) {
            log.steps += 1;
            let step = log.steps;
            let tokens: usize = batch.iter().map(|&i| pairs[i].1.len() + 1).sum();
            let norm = 1.0 / tokens as f64;
            let shards: Vec<(usize, Vec<usize>)> = batch.chunks(cfg.shard_size).map(|c| c.to_vec()).enumerate().collect();
            let dropout_on = cfg.dropout > 0.0;
            let model_ref: &Model = model;
            let results = par::map(mode, &shards, |(k, idx)| {
                let rng = dropout_on.then(|| {
                    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
                    r.set_stream(((step as u64) << 20) | *k as u64);
                    r
                });
                shard_grads(model_ref, pairs, idx, norm, rng)
            });
            let mut loss = 0.0;
            let mut grads = Grads::new(n_params);
            for (l, g) in &results {
                loss += l;
                grads.add(g);
            }
            let lr = cfg.optimizer.lr(step);
            let gnorm = grads.norm();
            if !loss.is_finite() || !gnorm.is_finite() {
                return Err(NmtError::NonFinite { epoch, step, lr, loss, grad_norm: gnorm, batch });
            }
            grads.clip(cfg.clip_norm);
            let rows = if cfg.sparse_embeddings { batch_rows(model, pairs, &batch) } else { HashMap::new() };
            apply(model, &grads, &cfg.optimizer, &mut adam, step, &rows);
            epoch_loss += loss * tokens as f64;
            epoch_tokens += tokens;
        }
        log.epoch_losses.push(epoch_loss / epoch_tokens as f64);
    }
    Ok(log)
}

fn flat(a: &mut Mat) -> ArrayViewMut1<'_, f64> {
    ArrayViewMut1::from(a.as_slice_mut().expect("contiguous"))
}

/// Embedding tables mapped to the rows used by a batch.
fn batch_rows(model: &Model, pairs: &[Pair], batch: &[usize]) -> HashMap<ParamId, Vec<usize>> {
    let mut src = BTreeSet::new();
    let mut tgt: BTreeSet<usize> = [BOS_ID, EOS_ID].into();
    for &i in batch {
        src.extend(pairs[i].0.iter().copied());
        tgt.extend(pairs[i].1.iter().copied());
    }
    let (se, te) = model.embeddings();
    let mut rows = HashMap::new();
    for (emb, set) in [(se, src), (te, tgt)] {
        let v: Vec<usize> = set.into_iter().collect();
        for id in std::iter::once(emb.e).chain(emb.kge) {
            rows.insert(id, v.clone());
        }
    }
    rows
}

fn update<'a>(
    w: impl IntoNdProducer<Item = &'a mut f64, Dim = Ix1>,
    m: impl IntoNdProducer<Item = &'a mut f64, Dim = Ix1>,
    v: impl IntoNdProducer<Item = &'a mut f64, Dim = Ix1>,
    g: impl IntoNdProducer<Item = &'a f64, Dim = Ix1>,
    opt: &Optimizer,
    step: usize,
) {
    match *opt {
        Optimizer::Sgd { lr } => Zip::from(w).and(g).for_each(|w, &g| *w -= lr * g),
        Optimizer::Adam { schedule, beta1, beta2, eps } => {
            let lr = schedule.lr(step);
            let c1 = 1.0 - beta1.powi(step as i32);
            let c2 = 1.0 - beta2.powi(step as i32);
            Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

fn apply(
    model: &mut Model,
    grads: &Grads,
    opt: &Optimizer,
    adam: &mut Adam,
    step: usize,
    rows: &HashMap<ParamId, Vec<usize>>,
) {
    let ids: Vec<ParamId> = model.params().ids().collect();
    for id in ids {
        let Some(g) = grads.get(id) else { continue };
        if !model.params().param(id).trainable {
            continue;
        }
        let frozen = model.params().param(id).frozen_rows.clone();
        let w = model.params_mut().get_mut(id);
        let m = adam.m[id.0].get_or_insert_with(|| Mat::zeros(g.raw_dim()));
        let v = adam.v[id.0].get_or_insert_with(|| Mat::zeros(g.raw_dim()));
        let all_rows;
        let rs = match rows.get(&id) {
            Some(rs) => Some(rs),
            None if !frozen.is_empty() => {
                all_rows = (0..w.nrows()).collect::<Vec<_>>();
                Some(&all_rows)
            }
            None => None,
        };
        match rs {
            Some(rs) => {
                for &r in rs {
                    if frozen.binary_search(&r).is_err() {
                        update(w.row_mut(r), m.row_mut(r), v.row_mut(r), g.row(r), opt, step);
                    }
                }
            }
            None => {
                let g = g.as_standard_layout();
                let gs = ArrayView1::from(g.as_slice().expect("contiguous"));
                update(flat(w), flat(m), flat(v), gs, opt, step);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_rnn_defaults() {
        let c = TrainConfig::full_scale_rnn();
        assert_eq!((c.batch_size, c.optimizer, c.dropout, c.max_len), (32, Optimizer::Sgd { lr: 0.0002 }, 0.3, 80));
    }

    #[test]
    fn full_scale_transformer_budget() {
        let c = TrainConfig::full_scale_transformer(512);
        assert_eq!(c.token_budget, Some(4076));
        assert_eq!(c.dropout, 0.1);
    }

    #[test]
    fn inverse_sqrt_peaks_at_warmup() {
        let s = Schedule::InverseSqrt { factor: 2.0, warmup: 100, dim: 64 };
        let peak = s.lr(100);
        assert!((peak - 2.0 / 8.0 / 10.0).abs() < 1e-15);
        assert!(s.lr(50) < peak && s.lr(200) < peak);
        assert!((s.lr(400) - peak / 2.0).abs() < 1e-15);
    }

    #[test]
    fn token_batches_respect_budget() {
        let pairs: Vec<Pair> = (0..10).map(|i| (vec![4; i + 1], vec![5; 2])).collect();
        let cfg = TrainConfig { token_budget: Some(12), ..TrainConfig::rnn() };
        let order: Vec<usize> = (0..10).collect();
        let b = batches(&order, &pairs, &cfg);
        assert_eq!(b.concat(), order);
        for batch in &b {
            let t: usize = batch.iter().map(|&i| pairs[i].0.len() + 3).sum();
            assert!(batch.len() == 1 || t <= 12);
        }
    }
}
