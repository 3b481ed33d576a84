//! Model configuration, embedding setup and the architecture-agnostic model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use kgnmt_core::fusion::{FusedEmbeddingMatrix, FusionMode};

use crate::beam::StepModel;
use crate::layers::{uniform, Linear, INIT_RANGE};
use crate::rnn::RnnModel;
use crate::tensor::{Graph, Mat, ParamId, Params, Var};
use crate::transformer::TransformerModel;
use crate::NmtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Rnn,
    Transformer,
}

impl std::str::FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rnn" => Ok(Architecture::Rnn),
            "transformer" => Ok(Architecture::Transformer),
            o => Err(format!("unknown architecture {o:?} (expected rnn|transformer)")),
        }
    }
}

/// Shape of a translation model. For the RNN, `hidden` is the size of one
/// encoder direction; the decoder runs at `2 * hidden`. For the
/// Transformer, `hidden` is the model dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Architecture,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub emb_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    /// Width of concatenated KG embeddings on each side (0 when unused).
    pub src_kge_dim: usize,
    pub tgt_kge_dim: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Score outputs against the target embedding matrix.
    #[serde(default)]
    pub tie_output: bool,
}

impl ModelConfig {
    /// Desk-scale defaults.
    pub fn rnn(src_vocab: usize, tgt_vocab: usize) -> Self {
        ModelConfig {
            arch: Architecture::Rnn,
            src_vocab,
            tgt_vocab,
            emb_dim: 64,
            hidden: 64,
            layers: 2,
            heads: 8,
            ff_dim: 256,
            src_kge_dim: 0,
            tgt_kge_dim: 0,
            dropout: 0.3,
            seed: 1,
            tie_output: false,
        }
    }

    pub fn transformer(src_vocab: usize, tgt_vocab: usize) -> Self {
        ModelConfig {
            arch: Architecture::Transformer,
            layers: 2,
            dropout: 0.1,
            ..ModelConfig::rnn(src_vocab, tgt_vocab)
        }
    }

    /// 6 layers, 8 heads, dimension 512.
    pub fn full_scale_transformer(src_vocab: usize, tgt_vocab: usize) -> Self {
        ModelConfig { emb_dim: 512, hidden: 512, layers: 6, ff_dim: 2048, ..ModelConfig::transformer(src_vocab, tgt_vocab) }
    }

    /// Two layers, embeddings and hidden size 500, dropout 0.3.
    pub fn full_scale_rnn(src_vocab: usize, tgt_vocab: usize) -> Self {
        ModelConfig { emb_dim: 500, hidden: 500, ..ModelConfig::rnn(src_vocab, tgt_vocab) }
    }

    pub fn validate(&self) -> Result<(), NmtError> {
        let bad = |m: String| Err(NmtError::Config(m));
        if self.src_vocab < 5 || self.tgt_vocab < 5 {
            return bad("vocabularies need at least one token besides the reserved four".into());
        }
        if self.emb_dim == 0 || self.hidden == 0 || self.layers == 0 {
            return bad("emb_dim, hidden and layers must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.arch == Architecture::Transformer {
            if self.heads == 0 || self.hidden % self.heads != 0 {
                return bad(format!("model dim {} not divisible by {} heads", self.hidden, self.heads));
            }
            if self.ff_dim == 0 {
                return bad("ff_dim must be positive".into());
            }
        }
        Ok(())
    }
}

/// How one side's embedding matrix is created.
#[derive(Debug, Clone, Default)]
pub enum EmbeddingInit {
    #[default]
    Random,
    /// Rows seeded from a fused matrix of width `emb_dim`.
    Init { matrix: FusedEmbeddingMatrix, freeze: bool },
    /// Trainable model block plus a KG block of width `kge_dim`.
    Concat { matrix: FusedEmbeddingMatrix, freeze_kge: bool },
}

#[derive(Debug, Clone)]
pub struct Embeddings {
    pub e: ParamId,
    pub kge: Option<ParamId>,
    pub out_dim: usize,
}

impl Embeddings {
    pub fn new(
        p: &mut Params,
        name: &str,
        vocab: usize,
        emb_dim: usize,
        kge_dim: usize,
        init: &EmbeddingInit,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NmtError> {
        let mut random = uniform(rng, vocab, emb_dim, INIT_RANGE);
        random.row_mut(kgnmt_core::tokenize::PAD_ID).fill(0.0);
        let check = |m: &FusedEmbeddingMatrix, want_dim: usize, mode: FusionMode| {
            if m.rows != vocab || m.dim != want_dim || m.mode != mode {
                return Err(NmtError::Config(format!(
                    "{name}: fused matrix is {}x{} ({:?}), expected {vocab}x{want_dim} ({mode:?})",
                    m.rows, m.dim, m.mode
                )));
            }
            Ok(())
        };
        match init {
            EmbeddingInit::Random => {
                if kge_dim != 0 {
                    return Err(NmtError::Config(format!("{name}: kge_dim {kge_dim} without a concat matrix")));
                }
                let e = p.add(&format!("{name}.E"), random);
                Ok(Embeddings { e, kge: None, out_dim: emb_dim })
            }
            EmbeddingInit::Init { matrix, freeze } => {
                check(matrix, emb_dim, FusionMode::Init)?;
                if kge_dim != 0 {
                    return Err(NmtError::Config(format!("{name}: init mode takes no kge_dim")));
                }
                let m = Mat::from_shape_vec((vocab, emb_dim), matrix.data.clone()).expect("checked shape");
                let e = p.add(&format!("{name}.E"), m);
                p.set_trainable(e, !freeze);
                Ok(Embeddings { e, kge: None, out_dim: emb_dim })
            }
            EmbeddingInit::Concat { matrix, freeze_kge } => {
                check(matrix, matrix.model_dim + kge_dim, FusionMode::Concat)?;
                if matrix.model_dim != emb_dim {
                    return Err(NmtError::Config(format!(
                        "{name}: concat model block is {} wide, expected {emb_dim}",
                        matrix.model_dim
                    )));
                }
                let full = Mat::from_shape_vec((vocab, matrix.dim), matrix.data.clone()).expect("checked shape");
                let e = p.add(&format!("{name}.E"), full.slice(ndarray::s![.., ..emb_dim]).to_owned());
                let k = p.add(&format!("{name}.Ekg"), full.slice(ndarray::s![.., emb_dim..]).to_owned());
                p.set_trainable(k, !freeze_kge);
                Ok(Embeddings { e, kge: Some(k), out_dim: emb_dim + kge_dim })
            }
        }
    }

    /// The full `vocab x out_dim` matrix.
    pub fn matrix(&self, g: &mut Graph) -> Var {
        let e = g.param(self.e);
        match self.kge {
            Some(k) => {
                let kv = g.param(k);
                g.concat_cols(&[e, kv])
            }
            None => e,
        }
    }

    pub fn lookup(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let e = g.gather(self.e, ids);
        match self.kge {
            Some(k) => {
                let kv = g.gather(k, ids);
                g.concat_cols(&[e, kv])
            }
            None => e,
        }
    }
}

/// Output projection to vocabulary logits. When tied, the decoder state is
/// projected into embedding space and scored against every target
/// embedding, with no per-word bias.
#[derive(Debug, Clone)]
pub struct OutputLayer {
    pub proj: Linear,
    pub tied: Option<Embeddings>,
}

impl OutputLayer {
    pub fn new(p: &mut Params, input: usize, vocab: usize, tgt: &Embeddings, tie: bool, rng: &mut ChaCha8Rng) -> Self {
        if tie {
            OutputLayer { proj: Linear::new(p, "out", input, tgt.out_dim, rng), tied: Some(tgt.clone()) }
        } else {
            OutputLayer { proj: Linear::new(p, "out", input, vocab, rng), tied: None }
        }
    }

    pub fn logits(&self, g: &mut Graph, x: Var) -> Var {
        let y = self.proj.bind(g).forward(g, x);
        match &self.tied {
            Some(emb) => {
                let m = emb.matrix(g);
                g.matmul_t(y, m)
            }
            None => y,
        }
    }
}

/// Either architecture behind one interface.
#[derive(Debug, Clone)]
pub enum Model {
    Rnn(RnnModel),
    Transformer(TransformerModel),
}

impl Model {
    pub fn new(config: &ModelConfig, src: &EmbeddingInit, tgt: &EmbeddingInit) -> Result<Model, NmtError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(match config.arch {
            Architecture::Rnn => Model::Rnn(RnnModel::new(config, src, tgt, &mut rng)?),
            Architecture::Transformer => Model::Transformer(TransformerModel::new(config, src, tgt, &mut rng)?),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Model::Rnn(m) => &m.config,
            Model::Transformer(m) => &m.config,
        }
    }

    pub fn set_dropout(&mut self, p: f64) {
        match self {
            Model::Rnn(m) => m.config.dropout = p,
            Model::Transformer(m) => m.config.dropout = p,
        }
    }

    /// Source and target embedding tables.
    pub fn embeddings(&self) -> (&Embeddings, &Embeddings) {
        match self {
            Model::Rnn(m) => (&m.src_emb, &m.tgt_emb),
            Model::Transformer(m) => (&m.src_emb, &m.tgt_emb),
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            Model::Rnn(m) => &m.params,
            Model::Transformer(m) => &m.params,
        }
    }

    /// Freezes the pretrained part of the given source and target embedding
    /// rows: the whole row in init mode, the KGE block in concat mode.
    pub fn freeze_embedding_rows(&mut self, src: &[usize], tgt: &[usize]) {
        let (se, te) = self.embeddings();
        let (s, t) = (se.kge.unwrap_or(se.e), te.kge.unwrap_or(te.e));
        let p = self.params_mut();
        p.freeze_rows(s, src.iter().copied());
        p.freeze_rows(t, tgt.iter().copied());
    }

    pub fn params_mut(&mut self) -> &mut Params {
        match self {
            Model::Rnn(m) => &mut m.params,
            Model::Transformer(m) => &mut m.params,
        }
    }

    /// Summed token cross-entropy scaled by `norm`, with teacher forcing.
    /// Targets exclude BOS and EOS.
    pub fn loss(
        &self,
        g: &mut Graph,
        src: &[&[usize]],
        tgt: &[&[usize]],
        norm: f64,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Var {
        match self {
            Model::Rnn(m) => m.loss(g, src, tgt, norm, rng),
            Model::Transformer(m) => m.loss(g, src, tgt, norm, rng),
        }
    }
}

/// Decoding context of either architecture.
#[derive(Debug, Clone)]
pub enum ModelContext {
    Rnn(<RnnModel as StepModel>::Context),
    Transformer(<TransformerModel as StepModel>::Context),
}

#[derive(Debug, Clone)]
pub enum ModelState {
    Rnn(<RnnModel as StepModel>::State),
    Transformer(<TransformerModel as StepModel>::State),
}

impl StepModel for Model {
    type Context = ModelContext;
    type State = ModelState;

    fn start(&self, src: &[usize]) -> (Self::Context, Self::State) {
        match self {
            Model::Rnn(m) => {
                let (c, s) = m.start(src);
                (ModelContext::Rnn(c), ModelState::Rnn(s))
            }
            Model::Transformer(m) => {
                let (c, s) = m.start(src);
                (ModelContext::Transformer(c), ModelState::Transformer(s))
            }
        }
    }

    fn step(&self, ctx: &Self::Context, states: &[&Self::State], prev: &[usize]) -> Vec<crate::beam::StepOutput<Self::State>> {
        match (self, ctx) {
            (Model::Rnn(m), ModelContext::Rnn(c)) => {
                let st: Vec<_> = states
                    .iter()
                    .map(|s| match s {
                        ModelState::Rnn(s) => s,
                        _ => unreachable!("state from another architecture"),
                    })
                    .collect();
                m.step(c, &st, prev).into_iter().map(|o| o.map_state(ModelState::Rnn)).collect()
            }
            (Model::Transformer(m), ModelContext::Transformer(c)) => {
                let st: Vec<_> = states
                    .iter()
                    .map(|s| match s {
                        ModelState::Transformer(s) => s,
                        _ => unreachable!("state from another architecture"),
                    })
                    .collect();
                m.step(c, &st, prev).into_iter().map(|o| o.map_state(ModelState::Transformer)).collect()
            }
            _ => unreachable!("context from another architecture"),
        }
    }

    fn source_len(ctx: &Self::Context) -> usize {
        match ctx {
            ModelContext::Rnn(c) => RnnModel::source_len(c),
            ModelContext::Transformer(c) => TransformerModel::source_len(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_transformer_accepted() {
        assert!(ModelConfig::full_scale_transformer(100, 100).validate().is_ok());
        let bad = ModelConfig { hidden: 510, ..ModelConfig::full_scale_transformer(100, 100) };
        assert!(matches!(bad.validate(), Err(NmtError::Config(_))));
    }

    #[test]
    fn full_scale_rnn_sizes() {
        let c = ModelConfig::full_scale_rnn(100, 100);
        assert_eq!((c.emb_dim, c.hidden, c.layers, c.dropout), (500, 500, 2, 0.3));
    }
}
