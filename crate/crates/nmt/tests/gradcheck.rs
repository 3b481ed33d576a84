use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgnmt_nmt::gradcheck::grad_check;
use kgnmt_nmt::layers::{uniform, AdditiveAttention, FeedForward, LayerNorm, Linear, LstmCell, MultiHeadAttention};
use kgnmt_nmt::model::{EmbeddingInit, Embeddings, Model, ModelConfig};
use kgnmt_nmt::tensor::{Graph, Mat, Params, Var};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-5;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fixed random readout so every output entry reaches the loss.
fn readout(g: &mut Graph, x: Var, seed: u64) -> Var {
    let (r, c) = g.shape(x);
    let w = uniform(&mut rng(seed), r, c, 1.0);
    let w = g.constant(w);
    let m = g.mul(x, w);
    g.sum_all(m)
}

fn input(r: usize, c: usize, seed: u64) -> Mat {
    uniform(&mut rng(seed), r, c, 1.0)
}

fn perturb(p: &mut Params, seed: u64) {
    let mut r = rng(seed);
    let ids: Vec<_> = p.ids().collect();
    for id in ids {
        p.get_mut(id).mapv_inplace(|x| x + r.random_range(-0.5..0.5));
    }
}

#[test]
fn linear_layer() {
    let mut p = Params::new();
    let l = Linear::new(&mut p, "l", 4, 3, &mut rng(1));
    let x = input(2, 4, 2);
    let r = grad_check(&p, EPS, |g| {
        let x = g.constant(x.clone());
        let y = l.bind(g).forward(g, x);
        readout(g, y, 3)
    })
    .unwrap();
    assert!(r.max_rel_error <= 1e-7, "{r:?}");
}

#[test]
fn lstm_cell_dim3() {
    let mut p = Params::new();
    let cell = LstmCell::new(&mut p, "lstm", 3, 3, &mut rng(1));
    perturb(&mut p, 1);
    let xs: Vec<Mat> = (0..3).map(|t| input(2, 3, 10 + t)).collect();
    let r = grad_check(&p, EPS, |g| {
        let v = cell.bind(g);
        let mut h = g.zeros(2, 3);
        let mut c = g.zeros(2, 3);
        for x in &xs {
            let x = g.constant(x.clone());
            (h, c) = v.step(g, x, h, c);
        }
        let both = g.concat_cols(&[h, c]);
        readout(g, both, 4)
    })
    .unwrap();
    assert!(r.max_rel_error <= TOL, "{r:?}");
}

#[test]
fn additive_attention_with_padding() {
    let mut p = Params::new();
    let att = AdditiveAttention::new(&mut p, "att", 4, 6, 5, &mut rng(2));
    perturb(&mut p, 2);
    let mem = input(2 * 3, 6, 20);
    let q = input(2, 4, 21);
    let r = grad_check(&p, EPS, |g| {
        let m = g.constant(mem.clone());
        let am = att.memory(g, m, 2, 3, &[3, 2]);
        let q = g.constant(q.clone());
        let (ctx, w) = att.bind(g).attend(g, q, &am);
        let both = g.concat_cols(&[ctx, w]);
        readout(g, both, 5)
    })
    .unwrap();
    assert!(r.max_rel_error <= TOL, "{r:?}");
}

#[test]
fn multi_head_attention_self_and_causal() {
    for causal in [false, true] {
        let mut p = Params::new();
        let mha = MultiHeadAttention::new(&mut p, "mha", 8, 2, &mut rng(3));
        perturb(&mut p, 3);
        let x = input(3, 8, 30);
        let m = input(4, 8, 31);
        let r = grad_check(&p, EPS, |g| {
            let x = g.constant(x.clone());
            let (s, _) = mha.forward(g, x, x, causal);
            let m = g.constant(m.clone());
            let (c, _) = mha.forward(g, s, m, false);
            readout(g, c, 6)
        })
        .unwrap();
        assert!(r.max_rel_error <= TOL, "causal={causal}: {r:?}");
    }
}

#[test]
fn feed_forward() {
    let mut p = Params::new();
    let ff = FeedForward::new(&mut p, "ff", 4, 7, &mut rng(4));
    perturb(&mut p, 4);
    let x = input(3, 4, 40);
    let r = grad_check(&p, EPS, |g| {
        let x = g.constant(x.clone());
        let y = ff.forward(g, x);
        readout(g, y, 7)
    })
    .unwrap();
    assert!(r.max_rel_error <= TOL, "{r:?}");
}

#[test]
fn layer_norm() {
    let mut p = Params::new();
    let ln = LayerNorm::new(&mut p, "ln", 5);
    perturb(&mut p, 5);
    let x = input(3, 5, 50);
    let r = grad_check(&p, EPS, |g| {
        let x = g.constant(x.clone());
        let y = ln.forward(g, x);
        readout(g, y, 8)
    })
    .unwrap();
    assert!(r.max_rel_error <= TOL, "{r:?}");
}

#[test]
fn embeddings_and_output_projection() {
    let mut p = Params::new();
    let emb = Embeddings::new(&mut p, "src", 7, 3, 0, &EmbeddingInit::Random, &mut rng(6)).unwrap();
    let out = Linear::new(&mut p, "out", 3, 7, &mut rng(7));
    perturb(&mut p, 6);
    let ids = [4, 5, 4, 6];
    let targets = [5, 6, 3, 4];
    let r = grad_check(&p, EPS, |g| {
        let e = emb.lookup(g, &ids);
        let t = g.tanh(e);
        let logits = out.bind(g).forward(g, t);
        g.nll(logits, &targets, &[1.0, 0.5, 1.0, 0.0])
    })
    .unwrap();
    assert!(r.max_rel_error <= TOL, "{r:?}");
}

fn tiny(base: ModelConfig) -> ModelConfig {
    ModelConfig { emb_dim: 4, hidden: 4, heads: 2, ff_dim: 6, layers: 2, dropout: 0.0, ..base }
}

#[test]
fn full_rnn_loss() {
    let mut m = Model::new(&tiny(ModelConfig::rnn(8, 8)), &EmbeddingInit::Random, &EmbeddingInit::Random).unwrap();
    perturb(m.params_mut(), 8);
    let src: Vec<&[usize]> = vec![&[4, 5, 6], &[7, 4]];
    let tgt: Vec<&[usize]> = vec![&[5, 6], &[4, 7, 7]];
    let r = grad_check(m.params(), EPS, |g| m.loss(g, &src, &tgt, 0.5, None)).unwrap();
    assert!(r.max_rel_error <= TOL, "{r:?}");
}

#[test]
fn full_transformer_loss() {
    let mut m =
        Model::new(&tiny(ModelConfig::transformer(8, 8)), &EmbeddingInit::Random, &EmbeddingInit::Random).unwrap();
    perturb(m.params_mut(), 9);
    let src: Vec<&[usize]> = vec![&[4, 5, 6], &[7]];
    let tgt: Vec<&[usize]> = vec![&[5, 6], &[4, 7, 7]];
    let r = grad_check(m.params(), EPS, |g| m.loss(g, &src, &tgt, 0.5, None)).unwrap();
    assert!(r.max_rel_error <= TOL, "{r:?}");
}

#[test]
fn zero_epsilon_rejected() {
    let mut p = Params::new();
    let l = Linear::new(&mut p, "l", 2, 2, &mut rng(1));
    assert!(grad_check(&p, 0.0, |g| {
        let x = g.constant(Mat::ones((1, 2)));
        let y = l.bind(g).forward(g, x);
        g.sum_all(y)
    })
    .is_err());
}

#[test]
fn tied_output_with_concat_embeddings() {
    use kgnmt_core::fusion::{Coverage, FusedEmbeddingMatrix, FusionMode};
    let matrix = FusedEmbeddingMatrix {
        mode: FusionMode::Concat,
        rows: 8,
        dim: 7,
        model_dim: 4,
        data: input(8, 7, 90).into_raw_vec_and_offset().0,
        coverage: Coverage::default(),
    };
    let concat = EmbeddingInit::Concat { matrix, freeze_kge: false };
    for base in [ModelConfig::rnn(8, 8), ModelConfig::transformer(8, 8)] {
        let cfg = ModelConfig { src_kge_dim: 3, tgt_kge_dim: 3, tie_output: true, ..tiny(base) };
        let mut m = Model::new(&cfg, &concat, &concat).unwrap();
        perturb(m.params_mut(), 10);
        let src: Vec<&[usize]> = vec![&[4, 5, 6], &[7]];
        let tgt: Vec<&[usize]> = vec![&[5, 6], &[4, 7]];
        let r = grad_check(m.params(), EPS, |g| m.loss(g, &src, &tgt, 0.5, None)).unwrap();
        assert!(r.max_rel_error <= TOL, "{r:?}");
    }
}
