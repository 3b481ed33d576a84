//! End-to-end runs: link, embed, tokenize, fuse, train, decode, evaluate.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use kgnmt_core::eval::{evaluate, oov_count, EvalReport};
use kgnmt_core::fusion::{direct_rows, fuse_concat, fuse_init, EmbeddingTable, FusedEmbeddingMatrix, INIT_RANGE};
use kgnmt_core::kb::{
    extract_bilingual_lexicon, materialize_sameas, parse_ntriples, triples_to_records, write_records,
    BilingualLexicon, ParseLimits, RecordOptions, TripleSet,
};
use kgnmt_core::kge::{train_kge, KgEmbedding};
use kgnmt_core::linker::{annotate_corpus, annotation_token, deannotate, is_annotation_token, uri_token, Linker};
use kgnmt_core::par::{self, ExecMode};
use kgnmt_core::text::{OWL_SAMEAS, RDFS_LABEL};
use kgnmt_core::tokenize::{build_vocab, de_bpe, learn_bpe, Bpe, MergeTable, Vocabulary, RESERVED};
use kgnmt_nmt::beam::beam_search;
use kgnmt_nmt::checkpoint::{self, VocabHashes};
use kgnmt_nmt::model::{EmbeddingInit, Model, ModelConfig};
use kgnmt_nmt::train::{train, Pair, TrainLog};
use kgnmt_nmt::{unk_replace, UnkMode};

use crate::config::{Freeze, PipelineConfig, Strategy, Tokenization};
use crate::io::{atomic_write, read_lines, sha256_hex, split_tokens};

#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed: {message}")]
pub struct PipelineError {
    pub stage: String,
    pub message: String,
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub deterministic: bool,
    pub config: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, InputRecord>,
    pub seeds: BTreeMap<String, u64>,
    pub stages: Vec<StageRecord>,
    /// Content hashes of every artifact, keyed by path relative to the run.
    pub artifacts: BTreeMap<String, String>,
    pub eval: BTreeMap<String, String>,
}

impl Manifest {
    /// The manifest with stage timings zeroed.
    pub fn without_timings(&self) -> Manifest {
        let mut m = self.clone();
        for s in &mut m.stages {
            s.seconds = 0.0;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: Manifest,
    pub report: EvalReport,
}

/// Creates the next free `run-NNN` directory; existing runs are never reused.
pub fn create_run_dir(output: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(output)?;
    let mut next = 1 + std::fs::read_dir(output)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_prefix("run-")).and_then(|n| n.parse::<u32>().ok()))
        .max()
        .unwrap_or(0);
    loop {
        let dir = output.join(format!("run-{next:03}"));
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => next += 1,
            Err(e) => return Err(e),
        }
    }
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    dir: PathBuf,
    mode: ExecMode,
    manifest: Manifest,
}

type StageResult<T> = Result<T, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

impl Run<'_> {
    /// Writes an artifact once; a second write to the same path is refused.
    fn write(&mut self, rel: &str, bytes: &[u8]) -> StageResult<()> {
        let path = self.dir.join(rel);
        if path.exists() {
            return Err(format!("artifact {rel} already exists"));
        }
        if let Some(p) = path.parent() {
            std::fs::create_dir_all(p).map_err(err)?;
        }
        std::fs::write(&path, bytes).map_err(err)?;
        self.manifest.artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn write_lines(&mut self, rel: &str, lines: &[Vec<String>]) -> StageResult<()> {
        let text: String = lines.iter().map(|l| l.join(" ") + "\n").collect();
        self.write(rel, text.as_bytes())
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> StageResult<T>) -> Result<T, PipelineError> {
        let t0 = Instant::now();
        match f(self) {
            Ok(v) => {
                self.manifest.stages.push(StageRecord { name: name.into(), seconds: t0.elapsed().as_secs_f64() });
                Ok(v)
            }
            Err(message) => {
                self.manifest.stages.push(StageRecord { name: name.into(), seconds: t0.elapsed().as_secs_f64() });
                self.manifest.status = "failed".into();
                self.manifest.failed_stage = Some(name.into());
                self.manifest.error = Some(message.clone());
                let _ = self.save_manifest();
                Err(PipelineError { stage: name.into(), message, run_dir: Some(self.dir.clone()) })
            }
        }
    }

    fn save_manifest(&self) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        atomic_write(&self.dir.join("manifest.json"), format!("{json}\n").as_bytes())
    }
}

struct Corpora {
    train_src: Vec<Vec<String>>,
    train_tgt: Vec<Vec<String>>,
    test_src: Vec<Vec<String>>,
    test_tgt: Vec<Vec<String>>,
    entities: Option<Vec<(usize, String)>>,
}

pub fn parse_entity_testset(text: &str) -> Result<Vec<(usize, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (idx, surface) = line.split_once('\t').ok_or_else(|| format!("line {}: expected index<TAB>surface", i + 1))?;
        let idx = idx.trim().parse().map_err(|_| format!("line {}: bad index {idx:?}", i + 1))?;
        out.push((idx, surface.trim().to_string()));
    }
    Ok(out)
}

pub fn load_kb(path: &Path) -> Result<TripleSet, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_ntriples(&bytes, ParseLimits::default()).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn label_relations() -> BTreeSet<String> {
    [RDFS_LABEL.to_string()].into()
}

/// `(entity, label text)` for every label literal in `lang` (or untagged).
pub fn labels_in(kb: &TripleSet, lang: &str) -> Vec<(String, String)> {
    let rels = label_relations();
    kb.iter()
        .filter(|t| rels.contains(&t.relation))
        .filter_map(|t| {
            let lit = t.object.as_literal()?;
            match lit.lang.as_deref() {
                Some(l) if l != lang => None,
                _ => Some((t.subject_id().to_string(), lit.text.clone())),
            }
        })
        .collect()
}

/// Keeps tokens seen at least `min_count` times (most frequent first, up to
/// `max_size` including reserved tokens), then appends `extra` tokens.
pub fn build_vocabulary(
    corpus: &[Vec<String>],
    max_size: usize,
    min_count: usize,
    extra: &[String],
) -> Result<Vocabulary, String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in corpus.iter().flatten() {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let kept = corpus.iter().flatten().map(String::as_str).filter(|t| counts[t] >= min_count.max(1));
    let base = build_vocab(kept, max_size).map_err(err)?;
    let tokens = base.tokens()[RESERVED.len()..].iter().cloned().chain(extra.iter().cloned());
    Ok(Vocabulary::from_tokens(tokens))
}

/// Uniform random model block for every vocabulary token.
pub fn random_table(vocab: &Vocabulary, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(dim);
    for tok in vocab.tokens() {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE)).collect();
        t.insert(tok, &v).expect("uniform dim");
    }
    t
}

pub fn fused_to_table(m: &FusedEmbeddingMatrix, vocab: &Vocabulary) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(m.dim);
    for (i, tok) in vocab.tokens().iter().enumerate() {
        t.insert(tok, m.row(i)).expect("uniform dim");
    }
    t
}

/// One decoded sentence before and after post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub raw: Vec<String>,
    pub attention: Vec<Vec<f64>>,
    pub text: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DecodeOptions<'a> {
    pub beam: usize,
    pub max_len: usize,
    pub unk: UnkMode,
    pub lexicon: Option<&'a BilingualLexicon>,
    pub bpe: bool,
}

/// Beam-decodes every sentence, replaces unknown words, joins subwords and
/// strips annotations.
pub fn translate_corpus(
    model: &Model,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    sentences: &[Vec<String>],
    opts: &DecodeOptions<'_>,
    mode: ExecMode,
) -> Vec<Translation> {
    par::map(mode, sentences, |s| {
        let ids = src_vocab.numericalize(s);
        let best = beam_search(model, &ids, opts.beam, opts.max_len).into_iter().next();
        let (tokens, attention) = best.map(|h| (h.tokens, h.attention)).unwrap_or_default();
        let raw = tgt_vocab.denumericalize(&tokens);
        let mut text = unk_replace(&raw, &attention, s, opts.lexicon, opts.unk);
        if opts.bpe {
            text = de_bpe(&text, is_annotation_token);
        }
        Translation { raw, attention, text: deannotate(&text) }
    })
}

fn surface_lines(lines: &[Vec<String>]) -> Vec<String> {
    lines.iter().map(|l| deannotate(l).join(" ")).collect()
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome, PipelineError> {
    let dir = create_run_dir(&cfg.paths.output_dir).map_err(|e| PipelineError {
        stage: "setup".into(),
        message: format!("{}: {e}", cfg.paths.output_dir.display()),
        run_dir: None,
    })?;
    let deterministic = cfg.is_deterministic();
    let mut kge_cfg = cfg.kge.clone();
    if deterministic {
        kge_cfg.threads = 1;
    }
    let seeds: BTreeMap<String, u64> =
        [("pipeline".to_string(), cfg.seed), ("kge".to_string(), kge_cfg.seed)].into_iter().collect();
    let manifest = Manifest {
        tool: "kgnmt".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        status: "running".into(),
        failed_stage: None,
        error: None,
        deterministic,
        config: cfg.echo(),
        inputs: BTreeMap::new(),
        seeds,
        stages: Vec::new(),
        artifacts: BTreeMap::new(),
        eval: BTreeMap::new(),
    };
    let mut run = Run { cfg, dir, mode: cfg.exec_mode(), manifest };
    let _ = run.save_manifest();
    let strategy = cfg.strategy;
    let bpe = cfg.tokenization == Tokenization::Bpe;

    let corpora = run.stage("read", |r| {
        let p = &r.cfg.paths;
        let mut inputs = vec![
            ("train_src", p.train_src.clone()),
            ("train_tgt", p.train_tgt.clone()),
            ("test_src", p.test_src.clone()),
            ("test_tgt", p.test_tgt.clone()),
        ];
        for (k, v) in [("kb_src", &p.kb_src), ("kb_tgt", &p.kb_tgt), ("entity_testset", &p.entity_testset)] {
            if let Some(v) = v {
                inputs.push((k, v.clone()));
            }
        }
        for (k, path) in &inputs {
            let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
            r.manifest
                .inputs
                .insert(k.to_string(), InputRecord { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        }
        let load = |p: &Path| read_lines(p).map(|l| split_tokens(&l)).map_err(|e| format!("{}: {e}", p.display()));
        let c = Corpora {
            train_src: load(&p.train_src)?,
            train_tgt: load(&p.train_tgt)?,
            test_src: load(&p.test_src)?,
            test_tgt: load(&p.test_tgt)?,
            entities: match &p.entity_testset {
                Some(path) => Some(parse_entity_testset(&std::fs::read_to_string(path).map_err(err)?)?),
                None => None,
            },
        };
        if c.train_src.len() != c.train_tgt.len() {
            return Err(format!("training corpus has {} source and {} target lines", c.train_src.len(), c.train_tgt.len()));
        }
        if c.test_src.len() != c.test_tgt.len() {
            return Err(format!("test corpus has {} source and {} target lines", c.test_src.len(), c.test_tgt.len()));
        }
        Ok(c)
    })?;
    let Corpora { mut train_src, mut train_tgt, mut test_src, test_tgt, entities } = corpora;

    let kbs = run.stage("kb", |r| {
        let p = &r.cfg.paths;
        let src = p.kb_src.as_deref().map(load_kb).transpose()?;
        let tgt = p.kb_tgt.as_deref().map(load_kb).transpose()?;
        let lexicon = match (&src, &tgt) {
            (Some(s), Some(t)) => {
                let (lex, report) = extract_bilingual_lexicon(s, t, OWL_SAMEAS, &label_relations());
                r.write("kb/lexicon.tsv", lex.to_tsv().as_bytes())?;
                r.write("kb/lexicon_report.txt", (report.lines().join("\n") + "\n").as_bytes())?;
                Some(lex)
            }
            _ => None,
        };
        Ok((src, tgt, lexicon))
    })?;
    let (kb_src, kb_tgt, lexicon) = kbs;

    if strategy == Strategy::ElKge {
        run.stage("link", |r| {
            let (Some(ks), Some(kt)) = (&kb_src, &kb_tgt) else {
                return Err("entity linking needs both knowledge bases".into());
            };
            let mut ls = Linker::from_kb(ks, &label_relations(), &r.cfg.src_prefix);
            let mut lt = Linker::from_kb(kt, &label_relations(), &r.cfg.tgt_prefix);
            ls.max_span = r.cfg.max_span;
            lt.max_span = r.cfg.max_span;
            let train = annotate_corpus(&train_src, &train_tgt, &ls, &lt, r.mode).map_err(err)?;
            let (test, test_stats) = ls.annotate_all(&test_src, r.mode).map_err(err)?;
            r.write_lines("el/train.src", &train.source)?;
            r.write_lines("el/train.tgt", &train.target)?;
            r.write_lines("el/test.src", &test)?;
            let mut report = train.report();
            for line in test_stats.report().lines() {
                report.push_str(&format!("test.{line}\n"));
            }
            r.write("el/report.txt", report.as_bytes())?;
            train_src = train.source;
            train_tgt = train.target;
            test_src = test;
            Ok(())
        })?;
    }

    let kge: Option<KgEmbedding> = if strategy == Strategy::Baseline {
        None
    } else {
        Some(run.stage("kge", |r| {
            let ks = kb_src.as_ref().ok_or("paths.kb_src missing")?;
            let mut kb = match &kb_tgt {
                Some(kt) => ks.merged(kt),
                None => ks.clone(),
            };
            if r.cfg.materialize_sameas {
                kb = materialize_sameas(&kb, OWL_SAMEAS);
            }
            let out = triples_to_records(&kb, kge_cfg.mode, r.cfg.max_bag, &RecordOptions::default()).map_err(err)?;
            let mut buf = Vec::new();
            write_records(&out.records, &mut buf).map_err(err)?;
            r.write("kge/records.txt", &buf)?;
            if !out.warnings.is_empty() {
                r.write("kge/warnings.txt", (out.warnings.join("\n") + "\n").as_bytes())?;
            }
            let model = train_kge(&out.records, &kge_cfg).map_err(err)?;
            let emb = model.embedding();
            r.write("kge/embeddings.vec", emb.to_word2vec().as_bytes())?;
            if let Some(sw) = emb.subwords_to_text() {
                r.write("kge/subwords.txt", sw.as_bytes())?;
            }
            let losses: String = model.loss_log().iter().map(|l| format!("{l}\n")).collect();
            r.write("kge/loss.txt", losses.as_bytes())?;
            Ok(emb)
        })?)
    };

    let merges = if bpe {
        Some(run.stage("bpe", |r| {
            let corpus = train_src.iter().chain(&train_tgt).flatten().map(String::as_str);
            let table = learn_bpe(corpus, r.cfg.bpe_merges, is_annotation_token);
            r.write("bpe/merges.txt", table.to_text().as_bytes())?;
            let b = Bpe::new(&table);
            train_src = b.apply_corpus(&train_src, is_annotation_token, r.mode);
            train_tgt = b.apply_corpus(&train_tgt, is_annotation_token, r.mode);
            test_src = b.apply_corpus(&test_src, is_annotation_token, r.mode);
            r.write_lines("bpe/train.src", &train_src)?;
            r.write_lines("bpe/train.tgt", &train_tgt)?;
            r.write_lines("bpe/test.src", &test_src)?;
            Ok(table)
        })?)
    } else {
        None
    };

    let (src_vocab, tgt_vocab) = run.stage("vocab", |r| {
        let c = r.cfg;
        let (mut src_extra, mut tgt_extra) = (Vec::new(), Vec::new());
        if c.kg_extend && strategy != Strategy::Baseline {
            let kbs: Vec<&TripleSet> = kb_src.iter().chain(kb_tgt.iter()).collect();
            let (src_kb, tgt_kb): (&[&TripleSet], &[&TripleSet]) = match strategy {
                Strategy::ElKge => (&kbs[..1], &kbs[kbs.len() - 1..]),
                _ => (&kbs[..], &kbs[..]),
            };
            (src_extra, tgt_extra) = (
                extension_tokens(src_kb, &c.src_lang, strategy, &c.src_prefix, merges.as_ref()),
                extension_tokens(tgt_kb, &c.tgt_lang, strategy, &c.tgt_prefix, merges.as_ref()),
            );
        }
        let sv = build_vocabulary(&train_src, c.vocab_max_size, c.min_count, &src_extra)?;
        let tv = build_vocabulary(&train_tgt, c.vocab_max_size, c.min_count, &tgt_extra)?;
        r.write("vocab/src.vocab", sv.to_text().as_bytes())?;
        r.write("vocab/tgt.vocab", tv.to_text().as_bytes())?;
        Ok((sv, tv))
    })?;

    let (src_init, tgt_init, kge_dim, frozen) = run.stage("fuse", |r| {
        let c = r.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0x0f05_e000);
        let Some(kge) = &kge else {
            return Ok((EmbeddingInit::Random, EmbeddingInit::Random, 0, None));
        };
        let frozen = (c.freeze == Freeze::Kb).then(|| (direct_rows(kge, &src_vocab), direct_rows(kge, &tgt_vocab)));
        let all = c.freeze == Freeze::All;
        let mut fused = Vec::new();
        for (side, vocab) in [("src", &src_vocab), ("tgt", &tgt_vocab)] {
            let m = match strategy {
                Strategy::ElKge => {
                    let table = random_table(vocab, c.nmt.emb_dim, &mut rng);
                    fuse_concat(&table, kge, vocab)
                }
                _ => fuse_init(kge, vocab, c.nmt.emb_dim, &mut rng).map_err(err)?,
            };
            r.write(&format!("fuse/{side}.vec"), fused_to_table(&m, vocab).to_word2vec().as_bytes())?;
            r.write(&format!("fuse/{side}.coverage.txt"), m.coverage.report().as_bytes())?;
            fused.push(m);
        }
        let tgt = fused.pop().expect("two sides");
        let src = fused.pop().expect("two sides");
        Ok(match strategy {
            Strategy::ElKge => (
                EmbeddingInit::Concat { matrix: src, freeze_kge: all },
                EmbeddingInit::Concat { matrix: tgt, freeze_kge: all },
                kge.dim(),
                frozen,
            ),
            _ => (
                EmbeddingInit::Init { matrix: src, freeze: all },
                EmbeddingInit::Init { matrix: tgt, freeze: all },
                0,
                frozen,
            ),
        })
    })?;

    let model = run.stage("train", |r| {
        let c = r.cfg;
        let n = &c.nmt;
        let mc = ModelConfig {
            arch: c.model,
            src_vocab: src_vocab.len(),
            tgt_vocab: tgt_vocab.len(),
            emb_dim: n.emb_dim,
            hidden: n.hidden,
            layers: n.layers,
            heads: n.heads,
            ff_dim: n.ff_dim,
            src_kge_dim: kge_dim,
            tgt_kge_dim: kge_dim,
            dropout: n.dropout,
            seed: c.seed,
            tie_output: n.tie_output,
        };
        let mut model = Model::new(&mc, &src_init, &tgt_init).map_err(err)?;
        if let Some((s, t)) = &frozen {
            model.freeze_embedding_rows(s, t);
        }
        let pairs: Vec<Pair> = train_src
            .iter()
            .zip(&train_tgt)
            .map(|(s, t)| (src_vocab.numericalize(s), tgt_vocab.numericalize(t)))
            .collect();
        let log: TrainLog = train(&mut model, &pairs, &c.train_config(), r.mode).map_err(err)?;
        model.set_dropout(0.0);
        let hashes = VocabHashes {
            src: sha256_hex(src_vocab.to_text().as_bytes()),
            tgt: sha256_hex(tgt_vocab.to_text().as_bytes()),
        };
        let mut ckpt = Vec::new();
        checkpoint::write_checkpoint(&model, &hashes, &mut ckpt).map_err(err)?;
        r.write("model/model.ckpt", &ckpt)?;
        let log_json = serde_json::to_string_pretty(&log).map_err(err)?;
        r.write("model/train_log.json", (log_json + "\n").as_bytes())?;
        Ok(model)
    })?;

    let translations = run.stage("decode", |r| {
        let opts = DecodeOptions {
            beam: r.cfg.beam,
            max_len: r.cfg.decode_max_len,
            unk: r.cfg.unk,
            lexicon: lexicon.as_ref(),
            bpe,
        };
        let out = translate_corpus(&model, &src_vocab, &tgt_vocab, &test_src, &opts, r.mode);
        let raw: Vec<Vec<String>> = out.iter().map(|t| t.raw.clone()).collect();
        let text: Vec<Vec<String>> = out.iter().map(|t| t.text.clone()).collect();
        r.write_lines("output/test.raw", &raw)?;
        r.write_lines("output/test.hyp", &text)?;
        Ok(out)
    })?;

    let report = run.stage("eval", |r| {
        let hyps: Vec<String> = translations.iter().map(|t| t.text.join(" ")).collect();
        let refs = surface_lines(&test_tgt);
        let raw: Vec<String> = translations.iter().map(|t| t.raw.join(" ")).collect();
        let mut report =
            evaluate(&hyps, &refs, entities.as_deref(), r.cfg.smoothing, r.mode).map_err(err)?;
        report.oov_count = oov_count(&raw);
        r.write("eval/report.txt", report.to_key_values().as_bytes())?;
        r.write("eval/report.tsv", (report.to_tsv_line() + "\n").as_bytes())?;
        for line in report.to_key_values().lines() {
            if let Some((k, v)) = line.split_once('\t') {
                r.manifest.eval.insert(k.to_string(), v.to_string());
            }
        }
        Ok(report)
    })?;

    run.manifest.status = "complete".into();
    run.save_manifest().map_err(|e| PipelineError {
        stage: "manifest".into(),
        message: e.to_string(),
        run_dir: Some(run.dir.clone()),
    })?;
    Ok(RunOutcome { run_dir: run.dir, manifest: run.manifest, report })
}

/// Vocabulary tokens a KB contributes for one language.
fn extension_tokens(
    kbs: &[&TripleSet],
    lang: &str,
    strategy: Strategy,
    prefix: &str,
    merges: Option<&MergeTable>,
) -> Vec<String> {
    let bpe = merges.map(Bpe::new);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for kb in kbs {
        for (entity, label) in labels_in(kb, lang) {
            let words: Vec<&str> = label.split_whitespace().collect();
            let toks: Vec<String> = match (strategy, &bpe) {
                (Strategy::ElKge, _) => vec![annotation_token(&words, &uri_token(&entity, prefix))],
                (_, Some(b)) => b.apply(&words, |_| false),
                _ => words.iter().map(|w| w.to_string()).collect(),
            };
            for t in toks {
                if seen.insert(t.clone()) {
                    out.push(t);
                }
            }
        }
    }
    out
}
