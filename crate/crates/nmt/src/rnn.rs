//! Bidirectional LSTM encoder with residual stacking and an attentional
//! LSTM decoder.
//!
//! Layer 0 runs a forward and a backward LSTM over the embedded source and
//! concatenates their states. Every later layer adds its bidirectional
//! output to its input: `h^l_i = h^{l-1}_i + [fwd; bwd](h^{l-1})_i`. The
//! decoder starts from the mean of the top encoder states and feeds the
//! previous attentional output back into its first layer.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use kgnmt_core::tokenize::{BOS_ID, EOS_ID, PAD_ID};

use crate::beam::{StepModel, StepOutput};
use crate::layers::{dropout, AdditiveAttention, AttentionMemory, Linear, LstmCell, LstmVars};
use crate::model::{EmbeddingInit, Embeddings, ModelConfig, OutputLayer};
use crate::tensor::{Graph, Mat, Params, Var};
use crate::NmtError;

#[derive(Debug, Clone)]
pub struct RnnModel {
    pub config: ModelConfig,
    pub params: Params,
    pub src_emb: Embeddings,
    pub tgt_emb: Embeddings,
    /// `(forward, backward)` cell per encoder layer.
    pub enc: Vec<(LstmCell, LstmCell)>,
    pub dec: Vec<LstmCell>,
    pub attention: AdditiveAttention,
    pub combine: Linear,
    pub out: OutputLayer,
}

/// Encoder output for a batch, as graph variables.
pub struct Encoded {
    /// Per layer, per time step `B x 2n`.
    pub layers: Vec<Vec<Var>>,
    pub memory: Var,
    pub mean: Var,
    pub lens: Vec<usize>,
    pub max_len: usize,
}

#[derive(Debug, Clone)]
pub struct DecState {
    pub h: Vec<Mat>,
    pub c: Vec<Mat>,
    pub feed: Mat,
}

#[derive(Debug, Clone)]
pub struct RnnContext {
    pub memory: Mat,
    pub src_len: usize,
}

struct DecVars {
    cells: Vec<LstmVars>,
    att: crate::layers::AttentionVars,
    combine: crate::layers::LinearVars,
}

impl RnnModel {
    pub fn new(
        config: &ModelConfig,
        src: &EmbeddingInit,
        tgt: &EmbeddingInit,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NmtError> {
        let mut p = Params::new();
        let n = config.hidden;
        let src_emb = Embeddings::new(&mut p, "src", config.src_vocab, config.emb_dim, config.src_kge_dim, src, rng)?;
        let tgt_emb = Embeddings::new(&mut p, "tgt", config.tgt_vocab, config.emb_dim, config.tgt_kge_dim, tgt, rng)?;
        let mut enc = Vec::new();
        for l in 0..config.layers {
            let inp = if l == 0 { src_emb.out_dim } else { 2 * n };
            enc.push((
                LstmCell::new(&mut p, &format!("enc.{l}.fwd"), inp, n, rng),
                LstmCell::new(&mut p, &format!("enc.{l}.bwd"), inp, n, rng),
            ));
        }
        let h = 2 * n;
        let mut dec = Vec::new();
        for l in 0..config.layers {
            let inp = if l == 0 { tgt_emb.out_dim + h } else { h };
            dec.push(LstmCell::new(&mut p, &format!("dec.{l}"), inp, h, rng));
        }
        let attention = AdditiveAttention::new(&mut p, "att", h, h, h, rng);
        let combine = Linear::new(&mut p, "combine", 2 * h, h, rng);
        let out = OutputLayer::new(&mut p, h, config.tgt_vocab, &tgt_emb, config.tie_output, rng);
        Ok(RnnModel { config: config.clone(), params: p, src_emb, tgt_emb, enc, dec, attention, combine, out })
    }

    pub fn dec_hidden(&self) -> usize {
        2 * self.config.hidden
    }

    /// Runs the encoder over padded sentences.
    pub fn encode(&self, g: &mut Graph, src: &[&[usize]], mut rng: Option<&mut ChaCha8Rng>) -> Encoded {
        let b = src.len();
        let t_max = src.iter().map(|s| s.len()).max().unwrap_or(0).max(1);
        let lens: Vec<usize> = src.iter().map(|s| s.len().max(1)).collect();
        let ids: Vec<usize> = (0..t_max)
            .flat_map(|t| src.iter().map(move |s| s.get(t).copied().unwrap_or(PAD_ID)))
            .collect();
        let n = self.config.hidden;
        let p = self.config.dropout;
        let mut input = self.src_emb.lookup(g, &ids);
        let mut steps: Vec<Var> = Vec::new();
        let mut layers = Vec::new();
        for (l, (fc, bc)) in self.enc.iter().enumerate() {
            let fv = fc.bind(g);
            let bv = bc.bind(g);
            let xf = fv.project(g, input);
            let xb = bv.project(g, input);
            let zero = g.zeros(b, n);
            let (mut h, mut c) = (zero, zero);
            let mut fwd = Vec::with_capacity(t_max);
            for t in 0..t_max {
                let x = g.slice_rows(xf, t * b, (t + 1) * b);
                (h, c) = fv.step_projected(g, x, h, c);
                fwd.push(h);
            }
            let (mut h, mut c) = (zero, zero);
            let mut bwd = vec![zero; t_max];
            for t in (0..t_max).rev() {
                let x = g.slice_rows(xb, t * b, (t + 1) * b);
                let (h2, c2) = bv.step_projected(g, x, h, c);
                let mask: Vec<bool> = lens.iter().map(|&len| t < len).collect();
                h = g.mask_rows(h2, h, &mask);
                c = g.mask_rows(c2, c, &mask);
                bwd[t] = h;
            }
            let mut outs = Vec::with_capacity(t_max);
            for t in 0..t_max {
                let cat = g.concat_cols(&[fwd[t], bwd[t]]);
                let cat = dropout(g, cat, p, rng.as_deref_mut());
                outs.push(if l == 0 { cat } else { g.add(steps[t], cat) });
            }
            steps = outs;
            input = g.concat_rows(&steps);
            layers.push(steps.clone());
        }
        let memory = g.interleave(&steps);
        let w = Array2::from_shape_fn((b, t_max), |(i, t)| if t < lens[i] { 1.0 / lens[i] as f64 } else { 0.0 });
        let w = g.constant(w);
        let mean = g.weighted_sum(w, memory);
        Encoded { layers, memory, mean, lens, max_len: t_max }
    }

    fn bind_decoder(&self, g: &mut Graph) -> DecVars {
        DecVars {
            cells: self.dec.iter().map(|c| c.bind(g)).collect(),
            att: self.attention.bind(g),
            combine: self.combine.bind(g),
        }
    }

    /// One decoder step for a batch. Returns the attentional output and
    /// the attention weights.
    #[allow(clippy::too_many_arguments)]
    fn dec_step(
        &self,
        g: &mut Graph,
        v: &DecVars,
        emb: Var,
        h: &mut [Var],
        c: &mut [Var],
        feed: Var,
        mem: &AttentionMemory,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (Var, Var) {
        let p = self.config.dropout;
        let mut x = g.concat_cols(&[emb, feed]);
        for (l, cell) in v.cells.iter().enumerate() {
            let (h2, c2) = cell.step(g, x, h[l], c[l]);
            h[l] = h2;
            c[l] = c2;
            let o = dropout(g, h2, p, rng.as_deref_mut());
            x = if l == 0 { o } else { g.add(x, o) };
        }
        let (ctx, w) = v.att.attend(g, x, mem);
        let cat = g.concat_cols(&[x, ctx]);
        let out = v.combine.forward(g, cat);
        let out = g.tanh(out);
        let out = dropout(g, out, p, rng);
        (out, w)
    }

    pub fn loss(
        &self,
        g: &mut Graph,
        src: &[&[usize]],
        tgt: &[&[usize]],
        norm: f64,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Var {
        let b = src.len();
        let enc = self.encode(g, src, rng.as_deref_mut());
        let mem = self.attention.memory(g, enc.memory, b, enc.max_len, &enc.lens);
        let steps = tgt.iter().map(|t| t.len() + 1).max().unwrap_or(1);
        let inputs: Vec<usize> = (0..steps)
            .flat_map(|t| tgt.iter().map(move |y| if t == 0 { BOS_ID } else { y.get(t - 1).copied().unwrap_or(PAD_ID) }))
            .collect();
        let emb = self.tgt_emb.lookup(g, &inputs);
        let v = self.bind_decoder(g);
        let mut h = vec![enc.mean; self.dec.len()];
        let zero = g.zeros(b, self.dec_hidden());
        let mut c = vec![zero; self.dec.len()];
        let mut feed = zero;
        let mut outs = Vec::with_capacity(steps);
        for t in 0..steps {
            let e = g.slice_rows(emb, t * b, (t + 1) * b);
            let (o, _) = self.dec_step(g, &v, e, &mut h, &mut c, feed, &mem, rng.as_deref_mut());
            outs.push(o);
            feed = o;
        }
        let all = g.concat_rows(&outs);
        let logits = self.out.logits(g, all);
        let mut targets = Vec::with_capacity(steps * b);
        let mut weights = Vec::with_capacity(steps * b);
        for t in 0..steps {
            for y in tgt {
                let (tok, w) = match t.cmp(&y.len()) {
                    std::cmp::Ordering::Less => (y[t], norm),
                    std::cmp::Ordering::Equal => (EOS_ID, norm),
                    std::cmp::Ordering::Greater => (PAD_ID, 0.0),
                };
                targets.push(tok);
                weights.push(w);
            }
        }
        g.nll(logits, &targets, &weights)
    }

    /// Per-layer encoder states of one sentence as `len x 2n` matrices.
    pub fn encoder_states(&self, src: &[usize]) -> Vec<Mat> {
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, &[src], None);
        enc.layers
            .iter()
            .map(|steps| {
                let parts: Vec<_> = steps.iter().map(|&v| g.value(v).view()).collect();
                ndarray::concatenate(ndarray::Axis(0), &parts).expect("uniform width")
            })
            .collect()
    }
}

fn log_softmax_row(row: ndarray::ArrayView1<f64>) -> Vec<f64> {
    let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

impl StepModel for RnnModel {
    type Context = RnnContext;
    type State = DecState;

    fn start(&self, src: &[usize]) -> (RnnContext, DecState) {
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, &[src], None);
        let memory = g.value(enc.memory).clone();
        let mean = g.value(enc.mean).clone();
        let h = self.dec_hidden();
        let state = DecState {
            h: vec![mean; self.dec.len()],
            c: vec![Mat::zeros((1, h)); self.dec.len()],
            feed: Mat::zeros((1, h)),
        };
        (RnnContext { memory, src_len: enc.lens[0] }, state)
    }

    fn step(&self, ctx: &RnnContext, states: &[&DecState], prev: &[usize]) -> Vec<StepOutput<DecState>> {
        let k = states.len();
        let mut g = Graph::new(&self.params);
        let stack = |f: &dyn Fn(&DecState) -> &Mat| -> Mat {
            let views: Vec<_> = states.iter().map(|s| f(s).view()).collect();
            ndarray::concatenate(ndarray::Axis(0), &views).expect("state width")
        };
        let layers = self.dec.len();
        let mut h: Vec<Var> = (0..layers).map(|l| g.constant(stack(&|s| &s.h[l]))).collect();
        let mut c: Vec<Var> = (0..layers).map(|l| g.constant(stack(&|s| &s.c[l]))).collect();
        let feed = g.constant(stack(&|s| &s.feed));
        let mem_views: Vec<_> = (0..k).map(|_| ctx.memory.view()).collect();
        let mem = g.constant(ndarray::concatenate(ndarray::Axis(0), &mem_views).expect("memory"));
        let am = self.attention.memory(&mut g, mem, k, ctx.src_len, &vec![ctx.src_len; k]);
        let emb = self.tgt_emb.lookup(&mut g, prev);
        let v = self.bind_decoder(&mut g);
        let (out, w) = self.dec_step(&mut g, &v, emb, &mut h, &mut c, feed, &am, None);
        let logits = self.out.logits(&mut g, out);
        let (lv, wv, ov) = (g.value(logits), g.value(w), g.value(out));
        (0..k)
            .map(|i| StepOutput {
                log_probs: log_softmax_row(lv.row(i)),
                attention: wv.row(i).to_vec(),
                state: DecState {
                    h: h.iter().map(|&x| g.value(x).row(i).insert_axis(ndarray::Axis(0)).to_owned()).collect(),
                    c: c.iter().map(|&x| g.value(x).row(i).insert_axis(ndarray::Axis(0)).to_owned()).collect(),
                    feed: ov.row(i).insert_axis(ndarray::Axis(0)).to_owned(),
                },
            })
            .collect()
    }

    fn source_len(ctx: &RnnContext) -> usize {
        ctx.src_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny() -> RnnModel {
        let cfg = ModelConfig { emb_dim: 4, hidden: 3, dropout: 0.0, ..ModelConfig::rnn(9, 8) };
        RnnModel::new(&cfg, &EmbeddingInit::Random, &EmbeddingInit::Random, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    #[test]
    fn zero_params_residual_identity() {
        let cfg = ModelConfig { layers: 3, ..tiny().config };
        let mut m =
            RnnModel::new(&cfg, &EmbeddingInit::Random, &EmbeddingInit::Random, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let names: Vec<String> = m.params.iter().map(|(_, p)| p.name.clone()).collect();
        for name in names.iter().filter(|n| n.starts_with("enc.1.") || n.starts_with("enc.2.")) {
            let id = m.params.id(name).unwrap();
            m.params.get_mut(id).fill(0.0);
        }
        let states = m.encoder_states(&[4, 5, 6]);
        assert!(states[0].iter().any(|&x| x != 0.0));
        assert_eq!(states[1], states[0]);
        assert_eq!(states[2], states[1]);
    }

    #[test]
    fn zero_lstm_layer_outputs_zero() {
        let mut m = tiny();
        let names: Vec<String> = m.params.iter().map(|(_, p)| p.name.clone()).collect();
        for name in names.iter().filter(|n| n.starts_with("enc.")) {
            let id = m.params.id(name).unwrap();
            m.params.get_mut(id).fill(0.0);
        }
        assert!(m.encoder_states(&[4, 5]).iter().all(|s| s.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn state_shape_per_direction() {
        let m = tiny();
        let s = m.encoder_states(&[4, 5, 6, 7, 8]);
        assert_eq!(s[0].dim(), (5, 6));
    }

    #[test]
    fn padding_does_not_change_encoding() {
        let m = tiny();
        let mut g = Graph::new(&m.params);
        let short: &[usize] = &[4, 5];
        let long: &[usize] = &[6, 7, 8, 4];
        let enc = m.encode(&mut g, &[short, long], None);
        let alone = m.encoder_states(short);
        let top = enc.layers.last().unwrap();
        for t in 0..2 {
            let row = g.value(top[t]).row(0).to_owned();
            let d: f64 = (&row - &alone.last().unwrap().row(t)).mapv(f64::abs).sum();
            assert!(d < 1e-12, "position {t}: {d}");
        }
    }

    #[test]
    fn step_attention_sums_to_one() {
        let m = tiny();
        let (ctx, st) = m.start(&[4, 5, 6]);
        let outs = m.step(&ctx, &[&st, &st], &[BOS_ID, 5]);
        for o in outs {
            assert!((o.attention.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((o.log_probs.iter().map(|x| x.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_matches_stepwise_decoding() {
        let m = tiny();
        let src: &[usize] = &[4, 5, 6];
        let tgt: &[usize] = &[5, 7];
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
}
