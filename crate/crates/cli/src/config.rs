//! Flat `key = value` pipeline configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key is namespaced.
//! Relative paths resolve against the directory of the config file.
//!
//! | key | default |
//! |---|---|
//! | `pipeline.strategy` | `baseline` (`baseline`, `el_kge`, `sem_kge`) |
//! | `pipeline.tokenization` | `word` (`word`, `bpe`) |
//! | `pipeline.model` | `rnn` (`rnn`, `transformer`) |
//! | `pipeline.unk` | `copy` (`off`, `copy`, `lexicon_then_copy`) |
//! | `pipeline.seed` | `1` |
//! | `pipeline.deterministic` | `false` |
//! | `paths.train_src`, `paths.train_tgt`, `paths.test_src`, `paths.test_tgt` | required |
//! | `paths.output_dir` | required |
//! | `paths.kb_src` | required for `el_kge`, `sem_kge` and `lexicon_then_copy` |
//! | `paths.kb_tgt` | required for `el_kge` and `lexicon_then_copy` |
//! | `paths.entity_testset` | none |
//! | `kb.max_bag` | `50` |
//! | `kb.materialize_sameas` | `true` |
//! | `kge.dim` | `64` |
//! | `kge.epochs`, `kge.lr` | `25`, `0.1` |
//! | `kge.minn`, `kge.maxn` | `2`, `5` |
//! | `kge.buckets` | `65536` |
//! | `kge.threads` | `1` |
//! | `kge.seed` | `pipeline.seed` |
//! | `kge.mode` | `structure` for `el_kge`, `semantic` otherwise |
//! | `el.max_span` | `5` |
//! | `el.src_prefix`, `el.tgt_prefix` | `dbr_`, `dbr_de_` |
//! | `bpe.merges` | `2000` |
//! | `vocab.max_size` | `50000` |
//! | `vocab.min_count` | `2` |
//! | `vocab.kg_extend` | `true` |
//! | `vocab.src_lang`, `vocab.tgt_lang` | `en`, `de` |
//! | `fuse.freeze` | `kb` (`none`, `kb`, `all`) |
//! | `nmt.emb_dim`, `nmt.hidden` | `64`, `64` |
//! | `nmt.layers`, `nmt.heads`, `nmt.ff_dim` | `2`, `4`, `128` |
//! | `nmt.dropout` | `0.3` (rnn), `0.1` (transformer) |
//! | `nmt.tie_output` | `true` |
//! | `train.epochs`, `train.batch_size` | `15`, `32` |
//! | `train.token_budget` | `0` (sentence batches) |
//! | `train.optimizer` | `adam` (`adam`, `sgd`) |
//! | `train.lr` | `0.003` (rnn), `2.0` (transformer warmup factor) |
//! | `train.warmup` | `0` (rnn), `400` (transformer) |
//! | `train.max_len`, `train.clip_norm` | `80`, `5.0` |
//! | `train.shard_size` | `8` |
//! | `train.sparse_embeddings` | `true` |
//! | `decode.beam`, `decode.max_len` | `5`, `80` |
//! | `eval.smoothing` | `none` (`none`, `add_one`) |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kgnmt_core::eval::Smoothing;
use kgnmt_core::kb::RecordMode;
use kgnmt_core::kge::KgeConfig;
use kgnmt_nmt::model::Architecture;
use kgnmt_nmt::train::{Optimizer, Schedule, TrainConfig};
use kgnmt_nmt::UnkMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Baseline,
    ElKge,
    SemKge,
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "el_kge" => Ok(Strategy::ElKge),
            "sem_kge" => Ok(Strategy::SemKge),
            o => Err(format!("unknown strategy {o:?} (expected baseline|el_kge|sem_kge)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Baseline => "baseline",
            Strategy::ElKge => "el_kge",
            Strategy::SemKge => "sem_kge",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tokenization {
    Word,
    Bpe,
}

impl FromStr for Tokenization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "word" => Ok(Tokenization::Word),
            "bpe" => Ok(Tokenization::Bpe),
            o => Err(format!("unknown tokenization {o:?} (expected word|bpe)")),
        }
    }
}

impl fmt::Display for Tokenization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tokenization::Word => "word",
            Tokenization::Bpe => "bpe",
        })
    }
}

/// Which pretrained embedding values stay fixed during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Freeze {
    None,
    /// Rows whose token is itself a KB token (labels, URIs).
    Kb,
    /// Every pretrained row (init mode) or the whole KGE block (concat).
    All,
}

impl FromStr for Freeze {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Freeze::None),
            "kb" => Ok(Freeze::Kb),
            "all" => Ok(Freeze::All),
            o => Err(format!("unknown freeze mode {o:?} (expected none|kb|all)")),
        }
    }
}

impl fmt::Display for Freeze {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Freeze::None => "none",
            Freeze::Kb => "kb",
            Freeze::All => "all",
        })
    }
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    match s {
        "rnn" => Ok(Architecture::Rnn),
        "transformer" => Ok(Architecture::Transformer),
        o => Err(format!("unknown model {o:?} (expected rnn|transformer)")),
    }
}

fn arch_name(a: Architecture) -> &'static str {
    match a {
        Architecture::Rnn => "rnn",
        Architecture::Transformer => "transformer",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub train_src: PathBuf,
    pub train_tgt: PathBuf,
    pub test_src: PathBuf,
    pub test_tgt: PathBuf,
    pub output_dir: PathBuf,
    pub kb_src: Option<PathBuf>,
    pub kb_tgt: Option<PathBuf>,
    pub entity_testset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmtSettings {
    pub emb_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub tie_output: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub token_budget: usize,
    pub adam: bool,
    pub lr: f64,
    pub warmup: usize,
    pub max_len: usize,
    pub clip_norm: f64,
    pub shard_size: usize,
    pub sparse_embeddings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub strategy: Strategy,
    pub tokenization: Tokenization,
    pub model: Architecture,
    pub unk: UnkMode,
    pub seed: u64,
    pub deterministic: bool,
    pub paths: Paths,
    pub max_bag: usize,
    pub materialize_sameas: bool,
    pub kge: KgeConfig,
    pub max_span: usize,
    pub src_prefix: String,
    pub tgt_prefix: String,
    pub bpe_merges: usize,
    pub vocab_max_size: usize,
    pub min_count: usize,
    pub kg_extend: bool,
    pub src_lang: String,
    pub tgt_lang: String,
    pub freeze: Freeze,
    pub nmt: NmtSettings,
    pub train: TrainSettings,
    pub beam: usize,
    pub decode_max_len: usize,
    pub smoothing: Smoothing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// Key path, or `line N` for malformed lines.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

pub const KEYS: &[&str] = &[
    "pipeline.strategy",
    "pipeline.tokenization",
    "pipeline.model",
    "pipeline.unk",
    "pipeline.seed",
    "pipeline.deterministic",
    "paths.train_src",
    "paths.train_tgt",
    "paths.test_src",
    "paths.test_tgt",
    "paths.output_dir",
    "paths.kb_src",
    "paths.kb_tgt",
    "paths.entity_testset",
    "kb.max_bag",
    "kb.materialize_sameas",
    "kge.dim",
    "kge.epochs",
    "kge.lr",
    "kge.minn",
    "kge.maxn",
    "kge.buckets",
    "kge.threads",
    "kge.seed",
    "kge.mode",
    "el.max_span",
    "el.src_prefix",
    "el.tgt_prefix",
    "bpe.merges",
    "vocab.max_size",
    "vocab.min_count",
    "vocab.kg_extend",
    "vocab.src_lang",
    "vocab.tgt_lang",
    "fuse.freeze",
    "nmt.emb_dim",
    "nmt.hidden",
    "nmt.layers",
    "nmt.heads",
    "nmt.ff_dim",
    "nmt.dropout",
    "nmt.tie_output",
    "train.epochs",
    "train.batch_size",
    "train.token_budget",
    "train.optimizer",
    "train.lr",
    "train.warmup",
    "train.max_len",
    "train.clip_norm",
    "train.shard_size",
    "train.sparse_embeddings",
    "decode.beam",
    "decode.max_len",
    "eval.smoothing",
];

/// Splits config text into `(line, key, value)` entries.
fn entries(text: &str, errors: &mut Vec<ConfigError>) -> Vec<(usize, String, String)> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => out.push((i + 1, k.trim().to_string(), v.trim().to_string())),
            _ => errors.push(ConfigError { key: format!("line {}", i + 1), message: format!("expected key = value, got {line:?}") }),
        }
    }
    out
}

struct Reader {
    values: BTreeMap<String, String>,
    base: PathBuf,
    errors: Vec<ConfigError>,
    require_paths: bool,
}

impl Reader {
    fn err(&mut self, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError { key: key.to_string(), message: message.into() });
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T, what: &str) -> T {
        match self.values.get(key).cloned() {
            None => default,
            Some(v) => match v.parse() {
                Ok(x) => x,
                Err(_) => {
                    self.err(key, format!("expected {what}, got {v:?}"));
                    default
                }
            },
        }
    }

    fn with<T>(&mut self, key: &str, default: T, f: impl Fn(&str) -> Result<T, String>) -> T {
        match self.values.get(key).cloned() {
            None => default,
            Some(v) => match f(&v) {
                Ok(x) => x,
                Err(m) => {
                    self.err(key, m);
                    default
                }
            },
        }
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                self.base.join(p)
            }
        })
    }

    fn required_path(&mut self, key: &str) -> PathBuf {
        match self.path(key) {
            Some(p) => p,
            None => {
                if self.require_paths {
                    self.err(key, "required");
                }
                PathBuf::new()
            }
        }
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        o => Err(format!("expected true|false, got {o:?}")),
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<PipelineConfig, Vec<ConfigError>> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            vec![ConfigError { key: path.display().to_string(), message: format!("cannot read config: {e}") }]
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        PipelineConfig::parse(&text, &base)
    }

    /// Parses and validates; every problem is reported, not just the first.
    pub fn parse(text: &str, base: &Path) -> Result<PipelineConfig, Vec<ConfigError>> {
        PipelineConfig::parse_with(text, base, true)
    }

    /// Parses module settings only: paths are optional and unchecked.
    pub fn parse_settings(text: &str) -> Result<PipelineConfig, Vec<ConfigError>> {
        PipelineConfig::parse_with(text, Path::new("."), false)
    }

    fn parse_with(text: &str, base: &Path, require_paths: bool) -> Result<PipelineConfig, Vec<ConfigError>> {
        let mut errors = Vec::new();
        let mut values = BTreeMap::new();
        for (line, k, v) in entries(text, &mut errors) {
            if !KEYS.contains(&k.as_str()) {
                errors.push(ConfigError { key: k, message: format!("unknown key (line {line})") });
            } else if values.insert(k.clone(), v).is_some() {
                errors.push(ConfigError { key: k, message: format!("set more than once (line {line})") });
            }
        }
        let mut r = Reader { values, base: base.to_path_buf(), errors, require_paths };

        let strategy = r.with("pipeline.strategy", Strategy::Baseline, Strategy::from_str);
        let tokenization = r.with("pipeline.tokenization", Tokenization::Word, Tokenization::from_str);
        let model = r.with("pipeline.model", Architecture::Rnn, parse_arch);
        let unk = r.with("pipeline.unk", UnkMode::CopyOnly, UnkMode::from_str);
        let seed = r.parse("pipeline.seed", 1u64, "an unsigned integer");
        let deterministic = r.with("pipeline.deterministic", false, parse_bool);
        let transformer = model == Architecture::Transformer;

        let paths = Paths {
            train_src: r.required_path("paths.train_src"),
            train_tgt: r.required_path("paths.train_tgt"),
            test_src: r.required_path("paths.test_src"),
            test_tgt: r.required_path("paths.test_tgt"),
            output_dir: r.required_path("paths.output_dir"),
            kb_src: r.path("paths.kb_src"),
            kb_tgt: r.path("paths.kb_tgt"),
            entity_testset: r.path("paths.entity_testset"),
        };

        let mut kge = KgeConfig {
            dim: 64,
            epochs: 25,
            lr: 0.1,
            bucket_count: 1 << 16,
            threads: 1,
            seed,
            mode: if strategy == Strategy::ElKge { RecordMode::Structure } else { RecordMode::Semantic },
            ..KgeConfig::default()
        };
        for key in KEYS.iter().copied().filter(|k| k.starts_with("kge.")) {
            if let Some(v) = r.values.get(key).cloned() {
                if let Err(m) = kge.apply(key, &v) {
                    let m = m.strip_prefix(&format!("{key}: ")).unwrap_or(&m).to_string();
                    r.err(key, m);
                }
            }
        }

        let nmt = NmtSettings {
            emb_dim: r.parse("nmt.emb_dim", 64, "an unsigned integer"),
            hidden: r.parse("nmt.hidden", 64, "an unsigned integer"),
            layers: r.parse("nmt.layers", 2, "an unsigned integer"),
            heads: r.parse("nmt.heads", 4, "an unsigned integer"),
            ff_dim: r.parse("nmt.ff_dim", 128, "an unsigned integer"),
            dropout: r.parse("nmt.dropout", if transformer { 0.1 } else { 0.3 }, "a number"),
            tie_output: r.with("nmt.tie_output", true, parse_bool),
        };
        let train = TrainSettings {
            epochs: r.parse("train.epochs", 15, "an unsigned integer"),
            batch_size: r.parse("train.batch_size", 32, "an unsigned integer"),
            token_budget: r.parse("train.token_budget", 0, "an unsigned integer"),
            adam: r.with("train.optimizer", true, |v| match v {
                "adam" => Ok(true),
                "sgd" => Ok(false),
                o => Err(format!("unknown optimizer {o:?} (expected adam|sgd)")),
            }),
            lr: r.parse("train.lr", if transformer { 2.0 } else { 0.003 }, "a number"),
            warmup: r.parse("train.warmup", if transformer { 400 } else { 0 }, "an unsigned integer"),
            max_len: r.parse("train.max_len", 80, "an unsigned integer"),
            clip_norm: r.parse("train.clip_norm", 5.0, "a number"),
            shard_size: r.parse("train.shard_size", 8, "an unsigned integer"),
            sparse_embeddings: r.with("train.sparse_embeddings", true, parse_bool),
        };

        let cfg = PipelineConfig {
            strategy,
            tokenization,
            model,
            unk,
            seed,
            deterministic,
            paths,
            max_bag: r.parse("kb.max_bag", 50, "an unsigned integer"),
            materialize_sameas: r.with("kb.materialize_sameas", true, parse_bool),
            kge,
            max_span: r.parse("el.max_span", kgnmt_core::linker::DEFAULT_MAX_SPAN, "an unsigned integer"),
            src_prefix: r.values.get("el.src_prefix").cloned().unwrap_or_else(|| "dbr_".into()),
            tgt_prefix: r.values.get("el.tgt_prefix").cloned().unwrap_or_else(|| "dbr_de_".into()),
            bpe_merges: r.parse("bpe.merges", 2000, "an unsigned integer"),
            vocab_max_size: r.parse("vocab.max_size", 50_000, "an unsigned integer"),
            min_count: r.parse("vocab.min_count", 2, "an unsigned integer"),
            kg_extend: r.with("vocab.kg_extend", true, parse_bool),
            src_lang: r.values.get("vocab.src_lang").cloned().unwrap_or_else(|| "en".into()),
            tgt_lang: r.values.get("vocab.tgt_lang").cloned().unwrap_or_else(|| "de".into()),
            freeze: r.with("fuse.freeze", Freeze::Kb, Freeze::from_str),
            nmt,
            train,
            beam: r.parse("decode.beam", 5, "an unsigned integer"),
            decode_max_len: r.parse("decode.max_len", 80, "an unsigned integer"),
            smoothing: r.parse("eval.smoothing", Smoothing::None, "none|add_one"),
        };
        let mut errors = r.errors;
        cfg.check(&mut errors, require_paths);
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    fn check(&self, errors: &mut Vec<ConfigError>, require_paths: bool) {
        let failed: BTreeSet<String> = errors.iter().map(|e| e.key.clone()).collect();
        let mut err = |key: &str, message: String| {
            if !failed.contains(key) {
                errors.push(ConfigError { key: key.to_string(), message });
            }
        };
        if self.strategy == Strategy::ElKge && self.tokenization == Tokenization::Bpe {
            err(
                "pipeline.tokenization",
                "el_kge requires word tokenization: segmenting URI annotations into subwords would assign \
                 vectors to entity fragments, so EL+KGE has no BPE variant"
                    .into(),
            );
        }
        let needs_src = self.strategy != Strategy::Baseline || self.unk == UnkMode::LexiconThenCopy;
        let needs_tgt = self.strategy == Strategy::ElKge || self.unk == UnkMode::LexiconThenCopy;
        let why = if self.strategy == Strategy::Baseline {
            "pipeline.unk = lexicon_then_copy".to_string()
        } else {
            format!("pipeline.strategy = {}", self.strategy)
        };
        if require_paths && needs_src && self.paths.kb_src.is_none() {
            err("paths.kb_src", format!("required when {why}"));
        }
        if require_paths && needs_tgt && self.paths.kb_tgt.is_none() {
            err("paths.kb_tgt", format!("required when {why}"));
        }
        let p = &self.paths;
        let files = [
            ("paths.train_src", Some(&p.train_src)),
            ("paths.train_tgt", Some(&p.train_tgt)),
            ("paths.test_src", Some(&p.test_src)),
            ("paths.test_tgt", Some(&p.test_tgt)),
            ("paths.kb_src", p.kb_src.as_ref()),
            ("paths.kb_tgt", p.kb_tgt.as_ref()),
            ("paths.entity_testset", p.entity_testset.as_ref()),
        ];
        for (key, path) in files {
            if let Some(path) = path {
                if !path.as_os_str().is_empty() && !path.is_file() {
                    err(key, format!("file not found: {}", path.display()));
                }
            }
        }
        if let Err(e) = self.kge.validate() {
            err("kge", e.to_string());
        }
        let wanted = match self.strategy {
            Strategy::ElKge => Some(RecordMode::Structure),
            Strategy::SemKge => Some(RecordMode::Semantic),
            Strategy::Baseline => None,
        };
        if wanted.is_some_and(|m| m != self.kge.mode) {
            err("kge.mode", format!("{} trains on {} records", self.strategy, if self.kge.mode == RecordMode::Structure { "semantic" } else { "structure" }));
        }
        if self.strategy == Strategy::SemKge && self.kge.dim != self.nmt.emb_dim {
            err("nmt.emb_dim", format!("must equal kge.dim ({}) for sem_kge initialization", self.kge.dim));
        }
        if self.max_bag < 2 {
            err("kb.max_bag", "must be at least 2".into());
        }
        if self.max_span == 0 {
            err("el.max_span", "must be at least 1".into());
        }
        if self.vocab_max_size <= kgnmt_core::tokenize::RESERVED.len() {
            err("vocab.max_size", "must exceed the 4 reserved tokens".into());
        }
        for (key, v) in [
            ("nmt.emb_dim", self.nmt.emb_dim),
            ("nmt.hidden", self.nmt.hidden),
            ("nmt.layers", self.nmt.layers),
            ("nmt.heads", self.nmt.heads),
            ("decode.beam", self.beam),
            ("decode.max_len", self.decode_max_len),
            ("train.shard_size", self.train.shard_size),
            ("train.max_len", self.train.max_len),
        ] {
            if v == 0 {
                err(key, "must be positive".into());
            }
        }
        if self.model == Architecture::Transformer && self.nmt.heads > 0 && self.nmt.hidden % self.nmt.heads != 0 {
            err("nmt.heads", format!("must divide nmt.hidden ({})", self.nmt.hidden));
        }
        if !(0.0..1.0).contains(&self.nmt.dropout) {
            err("nmt.dropout", format!("must be in [0, 1), got {}", self.nmt.dropout));
        }
        if !(self.train.lr > 0.0 && self.train.lr.is_finite()) {
            err("train.lr", format!("must be positive, got {}", self.train.lr));
        }
        if self.train.batch_size == 0 && self.train.token_budget == 0 {
            err("train.batch_size", "must be positive unless train.token_budget is set".into());
        }
    }

    pub fn exec_mode(&self) -> kgnmt_core::par::ExecMode {
        use kgnmt_core::par::{deterministic_from_env, ExecMode};
        if self.deterministic || deterministic_from_env() {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic || kgnmt_core::par::deterministic_from_env()
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let schedule = if t.warmup > 0 {
            Schedule::InverseSqrt { factor: t.lr, warmup: t.warmup, dim: self.nmt.hidden }
        } else {
            Schedule::Constant { lr: t.lr }
        };
        let optimizer = if t.adam {
            Optimizer::adam(schedule)
        } else {
            Optimizer::Sgd { lr: t.lr }
        };
        TrainConfig {
            batch_size: t.batch_size,
            token_budget: (t.token_budget > 0).then_some(t.token_budget),
            optimizer,
            dropout: self.nmt.dropout,
            max_len: t.max_len,
            epochs: t.epochs,
            seed: self.seed,
            clip_norm: t.clip_norm,
            shard_size: t.shard_size,
            sparse_embeddings: t.sparse_embeddings,
        }
    }

    /// Every key with its effective value, one `key = value` per line, sorted.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let p = |x: &Path| x.display().to_string();
        let opt = |x: &Option<PathBuf>| x.as_ref().map(|x| p(x)).unwrap_or_default();
        let t = &self.train;
        let n = &self.nmt;
        let k = &self.kge;
        let pairs: Vec<(&str, String)> = vec![
            ("pipeline.strategy", self.strategy.to_string()),
            ("pipeline.tokenization", self.tokenization.to_string()),
            ("pipeline.model", arch_name(self.model).into()),
            ("pipeline.unk", self.unk.to_string()),
            ("pipeline.seed", self.seed.to_string()),
            ("pipeline.deterministic", self.deterministic.to_string()),
            ("paths.train_src", p(&self.paths.train_src)),
            ("paths.train_tgt", p(&self.paths.train_tgt)),
            ("paths.test_src", p(&self.paths.test_src)),
            ("paths.test_tgt", p(&self.paths.test_tgt)),
            ("paths.output_dir", p(&self.paths.output_dir)),
            ("paths.kb_src", opt(&self.paths.kb_src)),
            ("paths.kb_tgt", opt(&self.paths.kb_tgt)),
            ("paths.entity_testset", opt(&self.paths.entity_testset)),
            ("kb.max_bag", self.max_bag.to_string()),
            ("kb.materialize_sameas", self.materialize_sameas.to_string()),
            ("kge.dim", k.dim.to_string()),
            ("kge.epochs", k.epochs.to_string()),
            ("kge.lr", k.lr.to_string()),
            ("kge.minn", k.min_subword.to_string()),
            ("kge.maxn", k.max_subword.to_string()),
            ("kge.buckets", k.bucket_count.to_string()),
            ("kge.threads", k.threads.to_string()),
            ("kge.seed", k.seed.to_string()),
            ("kge.mode", if k.mode == RecordMode::Structure { "structure" } else { "semantic" }.into()),
            ("el.max_span", self.max_span.to_string()),
            ("el.src_prefix", self.src_prefix.clone()),
            ("el.tgt_prefix", self.tgt_prefix.clone()),
            ("bpe.merges", self.bpe_merges.to_string()),
            ("vocab.max_size", self.vocab_max_size.to_string()),
            ("vocab.min_count", self.min_count.to_string()),
            ("vocab.kg_extend", self.kg_extend.to_string()),
            ("vocab.src_lang", self.src_lang.clone()),
            ("vocab.tgt_lang", self.tgt_lang.clone()),
            ("fuse.freeze", self.freeze.to_string()),
            ("nmt.emb_dim", n.emb_dim.to_string()),
            ("nmt.hidden", n.hidden.to_string()),
            ("nmt.layers", n.layers.to_string()),
            ("nmt.heads", n.heads.to_string()),
            ("nmt.ff_dim", n.ff_dim.to_string()),
            ("nmt.dropout", n.dropout.to_string()),
            ("nmt.tie_output", n.tie_output.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.token_budget", t.token_budget.to_string()),
            ("train.optimizer", if t.adam { "adam" } else { "sgd" }.into()),
            ("train.lr", t.lr.to_string()),
            ("train.warmup", t.warmup.to_string()),
            ("train.max_len", t.max_len.to_string()),
            ("train.clip_norm", t.clip_norm.to_string()),
            ("train.shard_size", t.shard_size.to_string()),
            ("train.sparse_embeddings", t.sparse_embeddings.to_string()),
            ("decode.beam", self.beam.to_string()),
            ("decode.max_len", self.decode_max_len.to_string()),
            ("eval.smoothing", self.smoothing.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
