//! Pre-norm Transformer encoder-decoder, one sentence at a time.
//!
//! `h^0_i = W E_{x_i} + e_pos,i` with fixed sinusoidal positions. Each
//! sublayer is wrapped as `h = h + f(LayerNorm(h))`, so a sublayer with
//! zero parameters leaves its input unchanged.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use kgnmt_core::tokenize::{BOS_ID, EOS_ID};

use crate::beam::{StepModel, StepOutput};
use crate::layers::{dropout, uniform, FeedForward, LayerNorm, MultiHeadAttention, INIT_RANGE};
use crate::model::{EmbeddingInit, Embeddings, ModelConfig, OutputLayer};
use crate::tensor::{Graph, Mat, ParamId, Params, Var};
use crate::NmtError;

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub ln_att: LayerNorm,
    pub att: MultiHeadAttention,
    pub ln_ff: LayerNorm,
    pub ff: FeedForward,
}

#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub ln_self: LayerNorm,
    pub self_att: MultiHeadAttention,
    pub ln_cross: LayerNorm,
    pub cross: MultiHeadAttention,
    pub ln_ff: LayerNorm,
    pub ff: FeedForward,
}

#[derive(Debug, Clone)]
pub struct TransformerModel {
    pub config: ModelConfig,
    pub params: Params,
    pub src_emb: Embeddings,
    pub tgt_emb: Embeddings,
    pub src_in: ParamId,
    pub tgt_in: ParamId,
    pub enc: Vec<EncoderLayer>,
    pub enc_norm: LayerNorm,
    pub dec: Vec<DecoderLayer>,
    pub dec_norm: LayerNorm,
    pub out: OutputLayer,
}

/// Sinusoidal position table `len x dim`.
pub fn positions(len: usize, dim: usize) -> Mat {
    Array2::from_shape_fn((len, dim), |(pos, i)| {
        let rate = 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
        let a = pos as f64 / rate;
        if i % 2 == 0 {
            a.sin()
        } else {
            a.cos()
        }
    })
}

#[derive(Debug, Clone)]
pub struct TransformerContext {
    pub memory: Mat,
}

/// Decoder input so far, starting empty (BOS is implicit).
pub type TransformerState = Vec<usize>;

pub struct DecoderOutput {
    pub top: Var,
    pub layers: Vec<Var>,
    /// Last layer cross-attention weights, one `len x src` matrix per head.
    pub cross: Vec<Var>,
    pub self_att: Vec<Vec<Var>>,
}

impl TransformerModel {
    pub fn new(
        config: &ModelConfig,
        src: &EmbeddingInit,
        tgt: &EmbeddingInit,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NmtError> {
        let mut p = Params::new();
        let d = config.hidden;
        let src_emb = Embeddings::new(&mut p, "src", config.src_vocab, config.emb_dim, config.src_kge_dim, src, rng)?;
        let tgt_emb = Embeddings::new(&mut p, "tgt", config.tgt_vocab, config.emb_dim, config.tgt_kge_dim, tgt, rng)?;
        let src_in = p.add("src.W", uniform(rng, src_emb.out_dim, d, INIT_RANGE));
        let tgt_in = p.add("tgt.W", uniform(rng, tgt_emb.out_dim, d, INIT_RANGE));
        let enc = (0..config.layers)
            .map(|l| EncoderLayer {
                ln_att: LayerNorm::new(&mut p, &format!("enc.{l}.ln_att"), d),
                att: MultiHeadAttention::new(&mut p, &format!("enc.{l}.att"), d, config.heads, rng),
                ln_ff: LayerNorm::new(&mut p, &format!("enc.{l}.ln_ff"), d),
                ff: FeedForward::new(&mut p, &format!("enc.{l}.ff"), d, config.ff_dim, rng),
            })
            .collect();
        let enc_norm = LayerNorm::new(&mut p, "enc.norm", d);
        let dec = (0..config.layers)
            .map(|l| DecoderLayer {
                ln_self: LayerNorm::new(&mut p, &format!("dec.{l}.ln_self"), d),
                self_att: MultiHeadAttention::new(&mut p, &format!("dec.{l}.self"), d, config.heads, rng),
                ln_cross: LayerNorm::new(&mut p, &format!("dec.{l}.ln_cross"), d),
                cross: MultiHeadAttention::new(&mut p, &format!("dec.{l}.cross"), d, config.heads, rng),
                ln_ff: LayerNorm::new(&mut p, &format!("dec.{l}.ln_ff"), d),
                ff: FeedForward::new(&mut p, &format!("dec.{l}.ff"), d, config.ff_dim, rng),
            })
            .collect();
        let dec_norm = LayerNorm::new(&mut p, "dec.norm", d);
        let out = OutputLayer::new(&mut p, d, config.tgt_vocab, &tgt_emb, config.tie_output, rng);
        Ok(TransformerModel {
            config: config.clone(),
            params: p,
            src_emb,
            tgt_emb,
            src_in,
            tgt_in,
            enc,
            enc_norm,
            dec,
            dec_norm,
            out,
        })
    }

    fn embed(&self, g: &mut Graph, emb: &Embeddings, w: ParamId, ids: &[usize]) -> Var {
        let e = emb.lookup(g, ids);
        let wv = g.param(w);
        let x = g.matmul(e, wv);
        let pe = g.constant(positions(ids.len(), self.config.hidden));
        g.add(x, pe)
    }

    /// Encoder states after each layer (index 0 is the embedded input)
    /// and the normalized output.
    pub fn encode(&self, g: &mut Graph, src: &[usize], mut rng: Option<&mut ChaCha8Rng>) -> (Vec<Var>, Var) {
        let p = self.config.dropout;
        let src = if src.is_empty() { &[EOS_ID][..] } else { src };
        let mut h = self.embed(g, &self.src_emb, self.src_in, src);
        h = dropout(g, h, p, rng.as_deref_mut());
        let mut layers = vec![h];
        for layer in &self.enc {
            let n = layer.ln_att.forward(g, h);
            let (a, _) = layer.att.forward(g, n, n, false);
            let a = dropout(g, a, p, rng.as_deref_mut());
            h = g.add(h, a);
            let n = layer.ln_ff.forward(g, h);
            let f = layer.ff.forward(g, n);
            let f = dropout(g, f, p, rng.as_deref_mut());
            h = g.add(h, f);
            layers.push(h);
        }
        let out = self.enc_norm.forward(g, h);
        (layers, out)
    }

    /// Runs the decoder over `[BOS] + inputs` style ids with causal masking.
    pub fn decode(&self, g: &mut Graph, memory: Var, inputs: &[usize], mut rng: Option<&mut ChaCha8Rng>) -> DecoderOutput {
        let p = self.config.dropout;
        let mut h = self.embed(g, &self.tgt_emb, self.tgt_in, inputs);
        h = dropout(g, h, p, rng.as_deref_mut());
        let mut layers = vec![h];
        let mut cross = Vec::new();
        let mut self_att = Vec::new();
        for layer in &self.dec {
            let n = layer.ln_self.forward(g, h);
            let (a, sw) = layer.self_att.forward(g, n, n, true);
            let a = dropout(g, a, p, rng.as_deref_mut());
            h = g.add(h, a);
            let n = layer.ln_cross.forward(g, h);
            let (a, cw) = layer.cross.forward(g, n, memory, false);
            let a = dropout(g, a, p, rng.as_deref_mut());
            h = g.add(h, a);
            let n = layer.ln_ff.forward(g, h);
            let f = layer.ff.forward(g, n);
            let f = dropout(g, f, p, rng.as_deref_mut());
            h = g.add(h, f);
            layers.push(h);
            cross = cw;
            self_att.push(sw);
        }
        let top = self.dec_norm.forward(g, h);
        DecoderOutput { top, layers, cross, self_att }
    }

    pub fn loss(
        &self,
        g: &mut Graph,
        src: &[&[usize]],
        tgt: &[&[usize]],
        norm: f64,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Var {
        let mut total: Option<Var> = None;
        for (s, t) in src.iter().zip(tgt) {
            let (_, mem) = self.encode(g, s, rng.as_deref_mut());
            let inputs: Vec<usize> = std::iter::once(BOS_ID).chain(t.iter().copied()).collect();
            let targets: Vec<usize> = t.iter().copied().chain(std::iter::once(EOS_ID)).collect();
            let d = self.decode(g, mem, &inputs, rng.as_deref_mut());
            let logits = self.out.logits(g, d.top);
            let l = g.nll(logits, &targets, &vec![norm; targets.len()]);
            total = Some(match total {
                Some(acc) => g.add(acc, l),
                None => l,
            });
        }
        total.unwrap_or_else(|| g.zeros(1, 1))
    }
}

fn log_softmax_row(row: ndarray::ArrayView1<f64>) -> Vec<f64> {
    let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

impl StepModel for TransformerModel {
    type Context = TransformerContext;
    type State = TransformerState;

    fn start(&self, src: &[usize]) -> (TransformerContext, TransformerState) {
        let mut g = Graph::new(&self.params);
        let (_, mem) = self.encode(&mut g, src, None);
        (TransformerContext { memory: g.value(mem).clone() }, Vec::new())
    }

    fn step(&self, ctx: &TransformerContext, states: &[&TransformerState], prev: &[usize]) -> Vec<StepOutput<TransformerState>> {
        states
            .iter()
            .zip(prev)
            .map(|(s, &p)| {
                let mut inputs: Vec<usize> = (*s).clone();
                if inputs.is_empty() && p != BOS_ID {
                    inputs.push(BOS_ID);
                }
                inputs.push(p);
                let mut g = Graph::new(&self.params);
                let mem = g.constant(ctx.memory.clone());
                let d = self.decode(&mut g, mem, &inputs, None);
                let last = inputs.len() - 1;
                let top = g.slice_rows(d.top, last, last + 1);
                let logits = self.out.logits(&mut g, top);
                let heads = d.cross.len() as f64;
                let mut att = vec![0.0; ctx.memory.nrows()];
                for &w in &d.cross {
                    for (a, x) in att.iter_mut().zip(g.value(w).row(last)) {
                        *a += x / heads;
                    }
                }
                StepOutput { log_probs: log_softmax_row(g.value(logits).row(0)), attention: att, state: inputs }
            })
            .collect()
    }

    fn source_len(ctx: &TransformerContext) -> usize {
        ctx.memory.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny(layers: usize) -> TransformerModel {
        let cfg = ModelConfig {
            emb_dim: 4,
            hidden: 8,
            heads: 2,
            ff_dim: 6,
            layers,
            dropout: 0.0,
            ..ModelConfig::transformer(9, 9)
        };
        TransformerModel::new(&cfg, &EmbeddingInit::Random, &EmbeddingInit::Random, &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap()
    }

    fn zero_sublayers(m: &mut TransformerModel) {
        let names: Vec<String> = m.params.iter().map(|(_, p)| p.name.clone()).collect();
        for n in names {
            let sub = [".att.", ".ff.", ".self.", ".cross."].iter().any(|s| n.contains(s));
            if (n.starts_with("enc.") || n.starts_with("dec.")) && sub {
                let id = m.params.id(&n).unwrap();
                m.params.get_mut(id).fill(0.0);
            }
        }
    }

    #[test]
    fn zeroed_sublayers_are_identity() {
        let mut m = tiny(3);
        zero_sublayers(&mut m);
        let mut g = Graph::new(&m.params);
        let (layers, mem) = m.encode(&mut g, &[4, 5, 6], None);
        for l in 1..layers.len() {
            assert_eq!(g.value(layers[l]), g.value(layers[0]));
        }
        let d = m.decode(&mut g, mem, &[BOS_ID, 7], None);
        for l in 1..d.layers.len() {
            assert_eq!(g.value(d.layers[l]), g.value(d.layers[0]));
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let m = tiny(2);
        let mut g = Graph::new(&m.params);
        let (_, mem) = m.encode(&mut g, &[4, 5, 6, 7], None);
        let d = m.decode(&mut g, mem, &[BOS_ID, 5, 6], None);
        for w in d.cross.iter().chain(d.self_att.iter().flatten()) {
            for row in g.value(*w).rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn causal_mask_hides_future() {
        let m = tiny(2);
        let mut g = Graph::new(&m.params);
        let (_, mem) = m.encode(&mut g, &[4, 5], None);
        let a = m.decode(&mut g, mem, &[BOS_ID, 5, 6, 7], None);
        let b = m.decode(&mut g, mem, &[BOS_ID, 5, 6, 8], None);
        let (va, vb) = (g.value(a.top), g.value(b.top));
        for r in 0..3 {
            assert_eq!(va.row(r), vb.row(r));
        }
        assert_ne!(va.row(3), vb.row(3));
    }

    #[test]
    fn loss_matches_stepwise() {
        let m = tiny(2);
        let src: &[usize] = &[4, 5, 6];
        let tgt: &[usize] = &[7, 8];
        let mut g = Graph::new(&m.params);
        let l = m.loss(&mut g, &[src], &[tgt], 1.0, None);
        let (ctx, mut st) = m.start(src);
        let mut prev = BOS_ID;
        let mut total = 0.0;
        for &y in tgt.iter().chain(&[EOS_ID]) {
            let o = m.step(&ctx, &[&st], &[prev]).pop().unwrap();
            total -= o.log_probs[y];
            st = o.state;
            prev = y;
        }
        assert!((g.scalar(l) - total).abs() < 1e-10);
    }

    #[test]
    fn sinusoid_values() {
        let pe = positions(3, 4);
        assert_eq!(pe[[0, 0]], 0.0);
        assert_eq!(pe[[0, 1]], 1.0);
        assert!((pe[[2, 2]] - (2.0f64 / 100.0).sin()).abs() < 1e-15);
    }
}
