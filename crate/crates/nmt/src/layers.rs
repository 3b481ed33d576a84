//! Parameterized building blocks shared by both architectures.

use ndarray::Array2;
use rand::Rng;

use crate::tensor::{Graph, Mat, ParamId, Params, Var};

pub const INIT_RANGE: f64 = 0.1;

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, range: f64) -> Mat {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-range..=range))
}

/// Inverted dropout mask scaled by `1 / (1 - p)`.
pub fn dropout<R: Rng + ?Sized>(g: &mut Graph, x: Var, p: f64, rng: Option<&mut R>) -> Var {
    let Some(rng) = rng else { return x };
    if p <= 0.0 {
        return x;
    }
    let (r, c) = g.shape(x);
    let keep = 1.0 / (1.0 - p);
    let mask = Array2::from_shape_fn((r, c), |_| if rng.random::<f64>() < p { 0.0 } else { keep });
    let m = g.constant(mask);
    g.mul(x, m)
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearVars {
    pub w: Var,
    pub b: Var,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(p: &mut Params, name: &str, inp: usize, out: usize, rng: &mut R) -> Self {
        Linear {
            w: p.add(&format!("{name}.w"), uniform(rng, inp, out, INIT_RANGE)),
            b: p.add(&format!("{name}.b"), Mat::zeros((1, out))),
        }
    }

    pub fn bind(&self, g: &mut Graph) -> LinearVars {
        LinearVars { w: g.param(self.w), b: g.param(self.b) }
    }
}

impl LinearVars {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let y = g.matmul(x, self.w);
        g.add_row(y, self.b)
    }
}

/// LSTM cell with gates ordered input, forget, output, candidate.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(p: &mut Params, name: &str, inp: usize, hidden: usize, rng: &mut R) -> Self {
        LstmCell {
            w: p.add(&format!("{name}.W"), uniform(rng, inp, 4 * hidden, INIT_RANGE)),
            u: p.add(&format!("{name}.U"), uniform(rng, hidden, 4 * hidden, INIT_RANGE)),
            b: p.add(&format!("{name}.b"), Mat::zeros((1, 4 * hidden))),
            hidden,
        }
    }

    pub fn bind(&self, g: &mut Graph) -> LstmVars {
        LstmVars { w: g.param(self.w), u: g.param(self.u), b: g.param(self.b), hidden: self.hidden }
    }
}

impl LstmVars {
    /// Input projection for a whole sequence can be precomputed with
    /// [`Self::project`] and passed to [`Self::step_projected`].
    pub fn project(&self, g: &mut Graph, x: Var) -> Var {
        let xw = g.matmul(x, self.w);
        g.add_row(xw, self.b)
    }

    pub fn step_projected(&self, g: &mut Graph, xw: Var, h: Var, c: Var) -> (Var, Var) {
        let hu = g.matmul(h, self.u);
        let z = g.add(xw, hu);
        let n = self.hidden;
        let i = g.slice_cols(z, 0, n);
        let f = g.slice_cols(z, n, 2 * n);
        let o = g.slice_cols(z, 2 * n, 3 * n);
        let cand = g.slice_cols(z, 3 * n, 4 * n);
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let o = g.sigmoid(o);
        let cand = g.tanh(cand);
        let fc = g.mul(f, c);
        let ic = g.mul(i, cand);
        let c2 = g.add(fc, ic);
        let tc = g.tanh(c2);
        let h2 = g.mul(o, tc);
        (h2, c2)
    }

    pub fn step(&self, g: &mut Graph, x: Var, h: Var, c: Var) -> (Var, Var) {
        let xw = self.project(g, x);
        self.step_projected(g, xw, h, c)
    }
}

/// `score(s, h_j) = v^T tanh(W_q s + W_k h_j)` over a batch-major memory.
#[derive(Debug, Clone)]
pub struct AdditiveAttention {
    pub wq: ParamId,
    pub wk: ParamId,
    pub v: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub wq: Var,
    pub v: Var,
}

/// Precomputed keys for one memory of `B` sentences of `T` positions.
#[derive(Debug, Clone, Copy)]
pub struct AttentionMemory {
    pub mem: Var,
    pub keys: Var,
    pub mask: Var,
    pub batch: usize,
    pub len: usize,
}

impl AdditiveAttention {
    pub fn new<R: Rng + ?Sized>(p: &mut Params, name: &str, query: usize, key: usize, dim: usize, rng: &mut R) -> Self {
        AdditiveAttention {
            wq: p.add(&format!("{name}.Wq"), uniform(rng, query, dim, INIT_RANGE)),
            wk: p.add(&format!("{name}.Wk"), uniform(rng, key, dim, INIT_RANGE)),
            v: p.add(&format!("{name}.v"), uniform(rng, dim, 1, INIT_RANGE)),
        }
    }

    pub fn bind(&self, g: &mut Graph) -> AttentionVars {
        AttentionVars { wq: g.param(self.wq), v: g.param(self.v) }
    }

    /// `mem` is `(B*T) x H` batch-major; `valid[b]` is the true length of
    /// sentence `b`.
    pub fn memory(&self, g: &mut Graph, mem: Var, batch: usize, len: usize, valid: &[usize]) -> AttentionMemory {
        let wk = g.param(self.wk);
        let keys = g.matmul(mem, wk);
        let mask = Array2::from_shape_fn((batch, len), |(b, t)| if t < valid[b] { 0.0 } else { -1e30 });
        let mask = g.constant(mask);
        AttentionMemory { mem, keys, mask, batch, len }
    }
}

impl AttentionVars {
    /// Returns the context `B x H` and weights `B x T`.
    pub fn attend(&self, g: &mut Graph, query: Var, m: &AttentionMemory) -> (Var, Var) {
        let q = g.matmul(query, self.wq);
        let rep = g.repeat_rows(q, m.len);
        let s = g.add(rep, m.keys);
        let s = g.tanh(s);
        let e = g.matmul(s, self.v);
        let e = g.reshape(e, m.batch, m.len);
        let e = g.add(e, m.mask);
        let w = g.softmax_rows(e);
        let ctx = g.weighted_sum(w, m.mem);
        (ctx, w)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

pub const LN_EPS: f64 = 1e-6;

impl LayerNorm {
    pub fn new(p: &mut Params, name: &str, dim: usize) -> Self {
        LayerNorm {
            gain: p.add(&format!("{name}.gain"), Mat::ones((1, dim))),
            bias: p.add(&format!("{name}.bias"), Mat::zeros((1, dim))),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let gain = g.param(self.gain);
        let bias = g.param(self.bias);
        g.layer_norm(x, gain, bias, LN_EPS)
    }
}

/// Scaled dot-product attention with `heads` heads over row sequences.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(p: &mut Params, name: &str, dim: usize, heads: usize, rng: &mut R) -> Self {
        assert!(heads > 0 && dim % heads == 0, "dim {dim} not divisible by {heads} heads");
        MultiHeadAttention {
            q: Linear::new(p, &format!("{name}.q"), dim, dim, rng),
            k: Linear::new(p, &format!("{name}.k"), dim, dim, rng),
            v: Linear::new(p, &format!("{name}.v"), dim, dim, rng),
            o: Linear::new(p, &format!("{name}.o"), dim, dim, rng),
            heads,
            dim,
        }
    }

    /// `x: n x d` queries over `mem: m x d`; `causal` masks positions
    /// after the query index. Returns the output and per-head weights.
    pub fn forward(&self, g: &mut Graph, x: Var, mem: Var, causal: bool) -> (Var, Vec<Var>) {
        let q = self.q.bind(g).forward(g, x);
        let k = self.k.bind(g).forward(g, mem);
        let v = self.v.bind(g).forward(g, mem);
        let (n, _) = g.shape(x);
        let (m, _) = g.shape(mem);
        let dk = self.dim / self.heads;
        let mask = causal.then(|| {
            let mk = Array2::from_shape_fn((n, m), |(i, j)| if j > i { -1e30 } else { 0.0 });
            g.constant(mk)
        });
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * dk, (h + 1) * dk);
            let kh = g.slice_cols(k, h * dk, (h + 1) * dk);
            let vh = g.slice_cols(v, h * dk, (h + 1) * dk);
            let sc = g.matmul_t(qh, kh);
            let mut sc = g.scale(sc, 1.0 / (dk as f64).sqrt());
            if let Some(mk) = mask {
                sc = g.add(sc, mk);
            }
            let w = g.softmax_rows(sc);
            outs.push(g.matmul(w, vh));
            weights.push(w);
        }
        let cat = g.concat_cols(&outs);
        let out = self.o.bind(g).forward(g, cat);
        (out, weights)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub l1: Linear,
    pub l2: Linear,
}

impl FeedForward {
    pub fn new<R: Rng + ?Sized>(p: &mut Params, name: &str, dim: usize, ff: usize, rng: &mut R) -> Self {
        FeedForward {
            l1: Linear::new(p, &format!("{name}.1"), dim, ff, rng),
            l2: Linear::new(p, &format!("{name}.2"), ff, dim, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let h = self.l1.bind(g).forward(g, x);
        let h = g.relu(h);
        self.l2.bind(g).forward(g, h)
    }
}
