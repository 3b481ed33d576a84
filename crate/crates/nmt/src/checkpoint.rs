//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "KGNMTCKP"            8-byte magic
//! version: u32          currently 1
//! header_len: u64
//! header: JSON          { config, vocab: {src, tgt}, tensors: [{name, rows, cols, trainable, frozen_rows?}] }
//! data: f64 * n         tensors in header order, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use kgnmt_core::fusion::{Coverage, FusedEmbeddingMatrix, FusionMode};

use crate::model::{EmbeddingInit, Model, ModelConfig};
use crate::tensor::Mat;
use crate::NmtError;

pub const MAGIC: &[u8; 8] = b"KGNMTCKP";
pub const VERSION: u32 = 1;

/// Opaque fingerprints of the vocabularies a model was trained with.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabHashes {
    pub src: String,
    pub tgt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub trainable: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub config: ModelConfig,
    pub vocab: VocabHashes,
    pub tensors: Vec<TensorInfo>,
}

fn format_err(m: impl Into<String>) -> NmtError {
    NmtError::Checkpoint(m.into())
}

pub fn write_checkpoint<W: Write>(model: &Model, vocab: &VocabHashes, mut w: W) -> Result<(), NmtError> {
    let tensors = model
        .params()
        .iter()
        .map(|(_, p)| TensorInfo { name: p.name.clone(), rows: p.value.nrows(), cols: p.value.ncols(), trainable: p.trainable,
            frozen_rows: p.frozen_rows.clone(),
        })
        .collect();
    let header = Header { config: model.config().clone(), vocab: vocab.clone(), tensors };
    let json = serde_json::to_vec(&header).map_err(|e| format_err(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(model.params().scalar_count() * 8);
    for (_, p) in model.params().iter() {
        for x in p.value.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn placeholder(config: &ModelConfig, vocab: usize, kge_dim: usize) -> EmbeddingInit {
    if kge_dim == 0 {
        return EmbeddingInit::Random;
    }
    let dim = config.emb_dim + kge_dim;
    EmbeddingInit::Concat {
        matrix: FusedEmbeddingMatrix {
            mode: FusionMode::Concat,
            rows: vocab,
            dim,
            model_dim: config.emb_dim,
            data: vec![0.0; vocab * dim],
            coverage: Coverage::default(),
        },
        freeze_kge: false,
    }
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(Model, VocabHashes), NmtError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(format_err("not a checkpoint (bad magic)"));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(format_err(format!("unsupported checkpoint version {version}")));
    }
    let mut l = [0u8; 8];
    r.read_exact(&mut l)?;
    let len = u64::from_le_bytes(l) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| format_err(format!("header: {e}")))?;
    let c = &header.config;
    let src = placeholder(c, c.src_vocab, c.src_kge_dim);
    let tgt = placeholder(c, c.tgt_vocab, c.tgt_kge_dim);
    let mut model = Model::new(c, &src, &tgt)?;
    if model.params().len() != header.tensors.len() {
        return Err(format_err(format!(
            "header lists {} tensors, model has {}",
            header.tensors.len(),
            model.params().len()
        )));
    }
    for t in &header.tensors {
        let id = model.params().id(&t.name).ok_or_else(|| format_err(format!("unknown tensor {}", t.name)))?;
        let shape = model.params().get(id).dim();
        if shape != (t.rows, t.cols) {
            return Err(format_err(format!("tensor {} is {}x{}, expected {:?}", t.name, t.rows, t.cols, shape)));
        }
        let mut bytes = vec![0u8; t.rows * t.cols * 8];
        r.read_exact(&mut bytes)?;
        let data: Vec<f64> = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        *model.params_mut().get_mut(id) = Mat::from_shape_vec((t.rows, t.cols), data).expect("checked shape");
        model.params_mut().set_trainable(id, t.trainable);
        model.params_mut().freeze_rows(id, t.frozen_rows.iter().copied());
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(format_err(format!("{} trailing bytes", rest.len())));
    }
    Ok((model, header.vocab))
}

pub fn save(model: &Model, vocab: &VocabHashes, path: &Path) -> Result<(), NmtError> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(model, vocab, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Model, VocabHashes), NmtError> {
    let f = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(f))
}
