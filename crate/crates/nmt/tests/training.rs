use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgnmt_core::par::ExecMode;
use kgnmt_nmt::beam::greedy;
use kgnmt_nmt::checkpoint::{read_checkpoint, write_checkpoint, VocabHashes};
use kgnmt_nmt::model::{EmbeddingInit, Model, ModelConfig};
use kgnmt_nmt::train::{evaluate_loss, train, Optimizer, Pair, Schedule, TrainConfig};
use kgnmt_nmt::NmtError;

fn copy_pairs(n: usize, vocab: usize, seed: u64) -> Vec<Pair> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s: Vec<usize> = (0..r.random_range(2..5)).map(|_| r.random_range(4..vocab)).collect();
            (s.clone(), s)
        })
        .collect()
}

fn tiny_rnn(vocab: usize) -> Model {
    let cfg = ModelConfig { emb_dim: 16, hidden: 16, layers: 1, dropout: 0.0, seed: 7, ..ModelConfig::rnn(vocab, vocab) };
    Model::new(&cfg, &EmbeddingInit::Random, &EmbeddingInit::Random).unwrap()
}

fn copy_config() -> TrainConfig {
    TrainConfig {
        batch_size: 10,
        optimizer: Optimizer::adam(Schedule::Constant { lr: 0.01 }),
        dropout: 0.0,
        epochs: 30,
        seed: 7,
        ..TrainConfig::rnn()
    }
}

#[test]
fn copy_task_is_learned() {
    let pairs = copy_pairs(50, 10, 7);
    let mut m = tiny_rnn(10);
    let before = evaluate_loss(&m, &pairs, ExecMode::Parallel);
    let log = train(&mut m, &pairs, &copy_config(), ExecMode::Parallel).unwrap();
    let after = evaluate_loss(&m, &pairs, ExecMode::Parallel);
    assert_eq!(log.epoch_losses.len(), 30);
    assert!(after < before, "{before} -> {after}");
    let exact = pairs.iter().filter(|(s, t)| greedy(&m, s, 10).tokens == *t).count();
    assert!(exact * 10 >= pairs.len() * 9, "{exact}/50 reproduced");
}

#[test]
fn transformer_loss_decreases() {
    let pairs = copy_pairs(30, 10, 3);
    let cfg = ModelConfig { emb_dim: 8, hidden: 8, heads: 2, ff_dim: 16, ..ModelConfig::transformer(10, 10) };
    let mut m = Model::new(&cfg, &EmbeddingInit::Random, &EmbeddingInit::Random).unwrap();
    let before = evaluate_loss(&m, &pairs, ExecMode::Sequential);
    let tc = TrainConfig { epochs: 5, batch_size: 8, ..TrainConfig::transformer(8) };
    train(&mut m, &pairs, &tc, ExecMode::Sequential).unwrap();
    assert!(evaluate_loss(&m, &pairs, ExecMode::Sequential) < before);
}

#[test]
fn zero_epochs_leave_parameters_untouched() {
    let pairs = copy_pairs(5, 10, 1);
    let mut m = tiny_rnn(10);
    let init = m.clone();
    let log = train(&mut m, &pairs, &TrainConfig { epochs: 0, ..copy_config() }, ExecMode::Parallel).unwrap();
    assert!(log.epoch_losses.is_empty());
    for ((_, a), (_, b)) in init.params().iter().zip(m.params().iter()) {
        let bits = |m: &ndarray::Array2<f64>| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.value), bits(&b.value));
    }
}

#[test]
fn long_and_empty_pairs_are_skipped() {
    let mut pairs = copy_pairs(6, 10, 2);
    pairs.push((vec![4; 90], vec![5; 3]));
    pairs.push((vec![4; 3], vec![5; 81]));
    pairs.push((vec![], vec![5]));
    let mut m = tiny_rnn(10);
    let log = train(&mut m, &pairs, &TrainConfig { epochs: 1, max_len: 80, ..copy_config() }, ExecMode::Parallel).unwrap();
    assert_eq!((log.skipped, log.sentences), (3, 6));
}

#[test]
fn thread_count_does_not_change_result() {
    let pairs = copy_pairs(20, 10, 4);
    let cfg = TrainConfig { epochs: 2, dropout: 0.3, batch_size: 7, shard_size: 3, ..copy_config() };
    let mut a = tiny_rnn(10);
    let mut b = tiny_rnn(10);
    let la = train(&mut a, &pairs, &cfg, ExecMode::Sequential).unwrap();
    let lb = train(&mut b, &pairs, &cfg, ExecMode::Parallel).unwrap();
    assert_eq!(la, lb);
    for ((_, x), (_, y)) in a.params().iter().zip(b.params().iter()) {
        assert_eq!(x.value, y.value);
    }
}

#[test]
fn nan_aborts_with_diagnostics() {
    let pairs = copy_pairs(4, 10, 5);
    let mut m = tiny_rnn(10);
    let id = m.params().id("out.b").unwrap();
    m.params_mut().get_mut(id)[[0, 4]] = f64::NAN;
    match train(&mut m, &pairs, &copy_config(), ExecMode::Sequential) {
        Err(NmtError::NonFinite { epoch, step, batch, .. }) => {
            assert_eq!((epoch, step), (0, 1));
            assert!(!batch.is_empty());
        }
        other => panic!("expected abort, got {other:?}"),
    }
}

#[test]
fn unseen_embedding_rows_stay_put() {
    let pairs: Vec<Pair> = copy_pairs(20, 8, 6);
    let cfg = ModelConfig { tie_output: true, ..ModelConfig::rnn(12, 12) };
    let cfg = ModelConfig { emb_dim: 8, hidden: 8, layers: 1, ..cfg };
    let mut m = Model::new(&cfg, &EmbeddingInit::Random, &EmbeddingInit::Random).unwrap();
    let init = m.clone();
    train(&mut m, &pairs, &TrainConfig { epochs: 2, ..copy_config() }, ExecMode::Sequential).unwrap();
    for name in ["src.E", "tgt.E"] {
        let id = m.params().id(name).unwrap();
        let (a, b) = (init.params().get(id), m.params().get(id));
        for row in 8..12 {
            assert_eq!(a.row(row), b.row(row), "{name} row {row}");
        }
        assert_ne!(a.row(4), b.row(4));
    }
}

#[test]
fn frozen_rows_stay_put() {
    let pairs: Vec<Pair> = copy_pairs(20, 8, 6);
    for sparse in [true, false] {
        let mut m = tiny_rnn(8);
        m.freeze_embedding_rows(&[4, 5], &[6]);
        let init = m.clone();
        let tc = TrainConfig { epochs: 2, sparse_embeddings: sparse, ..copy_config() };
        train(&mut m, &pairs, &tc, ExecMode::Sequential).unwrap();
        for (name, frozen, free) in [("src.E", 4, 6), ("src.E", 5, 7), ("tgt.E", 6, 4)] {
            let id = m.params().id(name).unwrap();
            let (a, b) = (init.params().get(id), m.params().get(id));
            assert_eq!(a.row(frozen), b.row(frozen), "{name} row {frozen}, sparse {sparse}");
            assert_ne!(a.row(free), b.row(free), "{name} row {free}, sparse {sparse}");
        }
    }
}

#[test]
fn frozen_rows_survive_checkpoint() {
    let mut m = tiny_rnn(8);
    m.freeze_embedding_rows(&[5, 4, 5, 99], &[]);
    let hashes = VocabHashes { src: "s".into(), tgt: "t".into() };
    let mut buf = Vec::new();
    write_checkpoint(&m, &hashes, &mut buf).unwrap();
    let (back, _) = read_checkpoint(buf.as_slice()).unwrap();
    let id = back.params().id("src.E").unwrap();
    assert_eq!(back.params().param(id).frozen_rows, vec![4, 5]);
    let id = back.params().id("tgt.E").unwrap();
    assert!(back.params().param(id).frozen_rows.is_empty());
}
