use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kgnmt_cli::config::{ConfigError, PipelineConfig};
use kgnmt_cli::io::{join_lines, read_lines, sha256_hex, split_tokens};
use kgnmt_cli::pipeline::{
    fused_to_table, label_relations, load_kb, parse_entity_testset, random_table, run_pipeline, translate_corpus,
    DecodeOptions,
};
use kgnmt_cli::synth::{generate, SynthConfig};
use kgnmt_core::eval::{evaluate, oov_count, Smoothing};
use kgnmt_core::fusion::{fuse_concat, fuse_init, EmbeddingTable, FusedEmbeddingMatrix, FusionMode};
use kgnmt_core::kb::{
    extract_bilingual_lexicon, materialize_sameas, serialize_ntriples, triples_to_records, write_records,
    BilingualLexicon, RecordMode, RecordOptions, TripleSet,
};
use kgnmt_core::kge::{train_kge, KgEmbedding};
use kgnmt_core::linker::{deannotate, is_annotation_token, Linker};
use kgnmt_core::par::ExecMode;
use kgnmt_core::text::OWL_SAMEAS;
use kgnmt_core::tokenize::{de_bpe, learn_bpe, Bpe, MergeTable, Vocabulary};
use kgnmt_nmt::checkpoint::{self, VocabHashes};
use kgnmt_nmt::model::{EmbeddingInit, Model, ModelConfig};
use kgnmt_nmt::train::{train, Pair};
use kgnmt_nmt::UnkMode;

#[derive(Parser)]
#[command(name = "kgnmt", version, about = "Knowledge-graph augmented neural machine translation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Knowledge-base ingest.
    #[command(subcommand)]
    Kb(KbCommand),
    /// Knowledge-graph embeddings.
    #[command(subcommand)]
    Kge(KgeCommand),
    /// Entity linking.
    #[command(subcommand)]
    El(ElCommand),
    /// Byte-pair encoding.
    #[command(subcommand)]
    Bpe(BpeCommand),
    /// Vocabularies.
    #[command(subcommand)]
    Vocab(VocabCommand),
    /// Embedding fusion.
    #[command(subcommand)]
    Fuse(FuseCommand),
    /// Translation models.
    #[command(subcommand)]
    Nmt(NmtCommand),
    /// Score translations against references.
    Eval(EvalArgs),
    /// Whole experiments.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Write a synthetic bilingual KB and corpus.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum KbCommand {
    /// Parse N-Triples and print counts; optionally re-serialize.
    Parse {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn one or more KBs into KGE training records.
    Records {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "structure")]
        mode: RecordMode,
        #[arg(long, default_value_t = 50)]
        max_bag: usize,
        /// Copy statements across owl:sameAs links first.
        #[arg(long)]
        materialize_sameas: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract a bilingual lexicon from sameAs-linked labels.
    Lexicon {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Settings {
    /// Key-value config file; `--set` entries override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum KgeCommand {
    /// Train embeddings from a record file (`kge.*` keys).
    Train {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write subword bucket vectors, if any.
        #[arg(long)]
        subwords_out: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
}

#[derive(Subcommand)]
enum ElCommand {
    /// Annotate a tokenized corpus with `surface|uri` tokens.
    Annotate {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long, default_value = "dbr_")]
        prefix: String,
        #[arg(long, default_value_t = kgnmt_core::linker::DEFAULT_MAX_SPAN)]
        max_span: usize,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write link statistics.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BpeCommand {
    /// Learn merges from tokenized files; annotation tokens are protected.
    Learn {
        #[arg(long)]
        merges: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Segment a tokenized file.
    Apply {
        #[arg(long)]
        codes: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Join subwords back into words.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum VocabCommand {
    /// Build a vocabulary from tokenized files.
    Build {
        #[arg(long, default_value_t = 50_000)]
        max_size: usize,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        /// File with extra tokens, one per line, appended after the corpus tokens.
        #[arg(long)]
        extra: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FuseCommand {
    /// `[E | KGE-or-zero]` rows for a vocabulary.
    Concat {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        kge: PathBuf,
        #[arg(long)]
        kge_subwords: Option<PathBuf>,
        /// Model embeddings; random in [-0.1, 0.1] of `--model-dim` when absent.
        #[arg(long)]
        nmt_emb: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        model_dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rows initialized from KGE vectors, random where unresolved.
    Init {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        kge: PathBuf,
        #[arg(long)]
        kge_subwords: Option<PathBuf>,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum NmtCommand {
    /// Train a model (`nmt.*`, `train.*`, `pipeline.model`, `pipeline.seed` keys).
    Train {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        src_vocab: PathBuf,
        #[arg(long)]
        tgt_vocab: PathBuf,
        /// Fused source rows from `fuse init|concat`.
        #[arg(long)]
        src_fused: Option<PathBuf>,
        #[arg(long)]
        tgt_fused: Option<PathBuf>,
        #[arg(long, default_value = "init")]
        fusion: FusionMode,
        /// Keep pretrained rows fixed.
        #[arg(long)]
        freeze: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Beam-decode a tokenized file.
    Translate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        src_vocab: PathBuf,
        #[arg(long)]
        tgt_vocab: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Raw output before unknown-word replacement.
        #[arg(long)]
        raw_out: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        beam: usize,
        #[arg(long, default_value_t = 80)]
        max_len: usize,
        #[arg(long, default_value = "copy")]
        unk: UnkMode,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Input and output are BPE-segmented.
        #[arg(long)]
        bpe: bool,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// `index<TAB>surface` entity test set.
    #[arg(long)]
    entities: Option<PathBuf>,
    /// Decoder output before replacement, for the OOV count.
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(long, default_value = "none")]
    smoothing: Smoothing,
    /// Print the single tab-separated line instead of key-value text.
    #[arg(long)]
    tsv: bool,
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Run every stage of an experiment config.
    Run { config: PathBuf },
    /// Check a config and print its effective values.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    train_pairs: usize,
    #[arg(long, default_value_t = 400)]
    test_pairs: usize,
    #[arg(long, default_value_t = 50)]
    held_out: usize,
}

enum Failure {
    Config(Vec<String>),
    Runtime(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn config_errors(errs: Vec<ConfigError>) -> Failure {
    Failure::Config(errs.iter().map(ToString::to_string).collect())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn tokenized(path: &Path) -> Result<Vec<Vec<String>>, Failure> {
    Ok(split_tokens(&read_lines(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?))
}

fn kb(path: &Path) -> Result<TripleSet, Failure> {
    load_kb(path).map_err(Failure::Runtime)
}

fn mode() -> ExecMode {
    ExecMode::from_env(ExecMode::Parallel)
}

/// Module settings from an optional config file plus `--set` overrides.
fn settings(s: &Settings) -> Result<PipelineConfig, Failure> {
    let mut values: BTreeMap<String, String> = BTreeMap::new();
    let mut bad = Vec::new();
    let file = match &s.config {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let lines = file.lines().map(|l| (l, false)).chain(s.sets.iter().map(|l| (l.as_str(), true)));
    for (line, from_flag) in lines {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                values.insert(k.trim().to_string(), v.trim().to_string());
            }
            None if from_flag => bad.push(format!("--set {line}: expected KEY=VALUE")),
            None => bad.push(format!("config line {line:?}: expected key = value")),
        }
    }
    if !bad.is_empty() {
        return Err(Failure::Config(bad));
    }
    let text: String = values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    PipelineConfig::parse_settings(&text).map_err(config_errors)
}

fn load_kge(vectors: &Path, subwords: Option<&Path>) -> Result<KgEmbedding, Failure> {
    let sw = subwords.map(read).transpose()?;
    KgEmbedding::from_word2vec(&read(vectors)?, sw.as_deref()).map_err(runtime)
}

fn load_vocab(path: &Path) -> Result<Vocabulary, Failure> {
    Vocabulary::from_text(&read(path)?).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Reads fused rows back into a matrix aligned with `vocab`.
fn load_fused(path: &Path, vocab: &Vocabulary, mode: FusionMode, model_dim: usize) -> Result<FusedEmbeddingMatrix, Failure> {
    let table = EmbeddingTable::parse_word2vec(&read(path)?).map_err(runtime)?;
    if table.tokens() != vocab.tokens() {
        return Err(Failure::Runtime(format!("{}: rows do not match the vocabulary", path.display())));
    }
    let dim = table.dim();
    let (_, data) = table.into_parts();
    let model_dim = if mode == FusionMode::Concat { model_dim } else { 0 };
    if mode == FusionMode::Concat && dim <= model_dim {
        return Err(Failure::Runtime(format!("{}: width {dim} leaves no KG block after {model_dim}", path.display())));
    }
    Ok(FusedEmbeddingMatrix { mode, rows: vocab.len(), dim, model_dim, data, coverage: Default::default() })
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Kb(KbCommand::Parse { input, out }) => {
            let k = kb(&input)?;
            println!("triples\t{}\nentities\t{}\nrelations\t{}", k.len(), k.entity_count(), k.relation_count());
            if let Some(out) = out {
                write(&out, &serialize_ntriples(&k))?;
            }
        }
        Command::Kb(KbCommand::Records { inputs, mode, max_bag, materialize_sameas: mat, out }) => {
            let mut all = TripleSet::default();
            for p in &inputs {
                all = all.merged(&kb(p)?);
            }
            if mat {
                all = materialize_sameas(&all, OWL_SAMEAS);
            }
            let r = triples_to_records(&all, mode, max_bag, &RecordOptions::default()).map_err(runtime)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            let mut buf = Vec::new();
            write_records(&r.records, &mut buf)?;
            std::fs::write(&out, buf)?;
            println!("records\t{}", r.records.len());
        }
        Command::Kb(KbCommand::Lexicon { src, tgt, out }) => {
            let (lex, report) = extract_bilingual_lexicon(&kb(&src)?, &kb(&tgt)?, OWL_SAMEAS, &label_relations());
            write(&out, &lex.to_tsv())?;
            for l in report.lines() {
                println!("{l}");
            }
        }
        Command::Kge(KgeCommand::Train { records, out, subwords_out, settings: s }) => {
            let cfg = settings(&s)?;
            let f = std::fs::File::open(&records).map_err(|e| Failure::Runtime(format!("{}: {e}", records.display())))?;
            let recs = kgnmt_core::kb::read_records(std::io::BufReader::new(f)).map_err(runtime)?;
            let mut kc = cfg.kge.clone();
            if cfg.is_deterministic() {
                kc.threads = 1;
            }
            let model = train_kge(&recs, &kc).map_err(runtime)?;
            let emb = model.embedding();
            write(&out, &emb.to_word2vec())?;
            if let (Some(p), Some(sw)) = (subwords_out, emb.subwords_to_text()) {
                write(&p, &sw)?;
            }
            println!("tokens\t{}\ndim\t{}", emb.len(), emb.dim());
        }
        Command::El(ElCommand::Annotate { kb: kb_path, prefix, max_span, input, out, report }) => {
            let mut linker = Linker::from_kb(&kb(&kb_path)?, &label_relations(), &prefix);
            linker.max_span = max_span;
            let (annotated, stats) = linker.annotate_all(&tokenized(&input)?, mode()).map_err(runtime)?;
            write(&out, &join_lines(&annotated))?;
            match report {
                Some(p) => write(&p, &stats.report())?,
                None => print!("{}", stats.report()),
            }
        }
        Command::Bpe(BpeCommand::Learn { merges, out, inputs }) => {
            let mut corpus = Vec::new();
            for p in &inputs {
                corpus.extend(tokenized(p)?);
            }
            let table = learn_bpe(corpus.iter().flatten().map(String::as_str), merges, is_annotation_token);
            write(&out, &table.to_text())?;
            println!("merges\t{}", table.len());
        }
        Command::Bpe(BpeCommand::Apply { codes, input, out }) => {
            let table = MergeTable::from_text(&read(&codes)?).map_err(runtime)?;
            let seg = Bpe::new(&table).apply_corpus(&tokenized(&input)?, is_annotation_token, mode());
            write(&out, &join_lines(&seg))?;
        }
        Command::Bpe(BpeCommand::Decode { input, out }) => {
            let words: Vec<Vec<String>> = tokenized(&input)?.iter().map(|l| de_bpe(l, is_annotation_token)).collect();
            write(&out, &join_lines(&words))?;
        }
        Command::Vocab(VocabCommand::Build { max_size, min_count, extra, out, inputs }) => {
            let mut corpus = Vec::new();
            for p in &inputs {
                corpus.extend(tokenized(p)?);
            }
            let extra: Vec<String> = match extra {
                Some(p) => read(&p)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect(),
                None => Vec::new(),
            };
            let v = kgnmt_cli::pipeline::build_vocabulary(&corpus, max_size, min_count, &extra).map_err(Failure::Runtime)?;
            write(&out, &v.to_text())?;
            println!("size\t{}", v.len());
        }
        Command::Fuse(FuseCommand::Concat { vocab, kge, kge_subwords, nmt_emb, model_dim, seed, out }) => {
            let v = load_vocab(&vocab)?;
            let k = load_kge(&kge, kge_subwords.as_deref())?;
            let table = match nmt_emb {
                Some(p) => EmbeddingTable::parse_word2vec(&read(&p)?).map_err(runtime)?,
                None => random_table(&v, model_dim, &mut ChaCha8Rng::seed_from_u64(seed)),
            };
            let m = fuse_concat(&table, &k, &v);
            write(&out, &fused_to_table(&m, &v).to_word2vec())?;
            print!("{}", m.coverage.report());
        }
        Command::Fuse(FuseCommand::Init { vocab, kge, kge_subwords, dim, seed, out }) => {
            let v = load_vocab(&vocab)?;
            let k = load_kge(&kge, kge_subwords.as_deref())?;
            let m = fuse_init(&k, &v, dim, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(|e| Failure::Config(vec![e.to_string()]))?;
            write(&out, &fused_to_table(&m, &v).to_word2vec())?;
            print!("{}", m.coverage.report());
        }
        Command::Nmt(NmtCommand::Train { src, tgt, src_vocab, tgt_vocab, src_fused, tgt_fused, fusion, freeze, out, settings: s }) => {
            let cfg = settings(&s)?;
            let (sv, tv) = (load_vocab(&src_vocab)?, load_vocab(&tgt_vocab)?);
            let n = &cfg.nmt;
            let init = |p: &Option<PathBuf>, v: &Vocabulary| -> Result<(EmbeddingInit, usize), Failure> {
                let Some(p) = p else {
                    return Ok((EmbeddingInit::Random, 0));
                };
                let m = load_fused(p, v, fusion, n.emb_dim)?;
                Ok(match fusion {
                    FusionMode::Concat => {
                        let kd = m.dim - m.model_dim;
                        (EmbeddingInit::Concat { matrix: m, freeze_kge: freeze }, kd)
                    }
                    FusionMode::Init => (EmbeddingInit::Init { matrix: m, freeze }, 0),
                })
            };
            let (si, sk) = init(&src_fused, &sv)?;
            let (ti, tk) = init(&tgt_fused, &tv)?;
            let mc = ModelConfig {
                arch: cfg.model,
                src_vocab: sv.len(),
                tgt_vocab: tv.len(),
                emb_dim: n.emb_dim,
                hidden: n.hidden,
                layers: n.layers,
                heads: n.heads,
                ff_dim: n.ff_dim,
                src_kge_dim: sk,
                tgt_kge_dim: tk,
                dropout: n.dropout,
                seed: cfg.seed,
                tie_output: n.tie_output,
            };
            let mut model = Model::new(&mc, &si, &ti).map_err(|e| Failure::Config(vec![e.to_string()]))?;
            let (s, t) = (tokenized(&src)?, tokenized(&tgt)?);
            if s.len() != t.len() {
                return Err(Failure::Runtime(format!("{} source and {} target lines", s.len(), t.len())));
            }
            let pairs: Vec<Pair> = s.iter().zip(&t).map(|(a, b)| (sv.numericalize(a), tv.numericalize(b))).collect();
            let exec = if cfg.is_deterministic() { ExecMode::Sequential } else { mode() };
            let log = train(&mut model, &pairs, &cfg.train_config(), exec).map_err(runtime)?;
            model.set_dropout(0.0);
            let hashes = VocabHashes { src: sha256_hex(sv.to_text().as_bytes()), tgt: sha256_hex(tv.to_text().as_bytes()) };
            checkpoint::save(&model, &hashes, &out).map_err(runtime)?;
            for (e, l) in log.epoch_losses.iter().enumerate() {
                println!("epoch\t{}\tloss\t{l:.6}", e + 1);
            }
            println!("skipped\t{}", log.skipped);
        }
        Command::Nmt(NmtCommand::Translate { model, src_vocab, tgt_vocab, input, out, raw_out, beam, max_len, unk, lexicon, bpe }) => {
            let (m, hashes) = checkpoint::load(&model).map_err(runtime)?;
            let (sv, tv) = (load_vocab(&src_vocab)?, load_vocab(&tgt_vocab)?);
            if hashes.src != sha256_hex(sv.to_text().as_bytes()) || hashes.tgt != sha256_hex(tv.to_text().as_bytes()) {
                return Err(Failure::Runtime("vocabularies differ from the ones the model was trained with".into()));
            }
            let lex = lexicon.map(|p| read(&p).map(|t| BilingualLexicon::from_tsv(&t))).transpose()?;
            let opts = DecodeOptions { beam, max_len, unk, lexicon: lex.as_ref(), bpe };
            let res = translate_corpus(&m, &sv, &tv, &tokenized(&input)?, &opts, mode());
            write(&out, &join_lines(&res.iter().map(|t| t.text.clone()).collect::<Vec<_>>()))?;
            if let Some(p) = raw_out {
                write(&p, &join_lines(&res.iter().map(|t| t.raw.clone()).collect::<Vec<_>>()))?;
            }
        }
        Command::Eval(a) => {
            let strip = |p: &Path| -> Result<Vec<String>, Failure> {
                Ok(tokenized(p)?.iter().map(|l| deannotate(l).join(" ")).collect())
            };
            let hyps = strip(&a.hyp)?;
            let refs = strip(&a.reference)?;
            let ents = a.entities.map(|p| read(&p).and_then(|t| parse_entity_testset(&t).map_err(Failure::Runtime))).transpose()?;
            let mut report = evaluate(&hyps, &refs, ents.as_deref(), a.smoothing, mode()).map_err(runtime)?;
            if let Some(raw) = a.raw {
                report.oov_count = oov_count(&read_lines(&raw)?);
            }
            if a.tsv {
                println!("{}", report.to_tsv_line());
            } else {
                print!("{}", report.to_key_values());
            }
        }
        Command::Pipeline(PipelineCommand::Validate { config }) => {
            let cfg = PipelineConfig::from_file(&config).map_err(config_errors)?;
            for (k, v) in cfg.echo() {
                println!("{k} = {v}");
            }
        }
        Command::Pipeline(PipelineCommand::Run { config }) => {
            let cfg = PipelineConfig::from_file(&config).map_err(config_errors)?;
            let outcome = run_pipeline(&cfg).map_err(|e| match &e.run_dir {
                Some(d) => Failure::Runtime(format!("{e} (partial manifest in {})", d.display())),
                None => Failure::Runtime(e.to_string()),
            })?;
            println!("run_dir\t{}", outcome.run_dir.display());
            print!("{}", outcome.report.to_key_values());
        }
        Command::Synth(a) => {
            let cfg = SynthConfig {
                seed: a.seed,
                train_pairs: a.train_pairs,
                test_pairs: a.test_pairs,
                held_out: a.held_out,
                ..SynthConfig::default()
            };
            let data = generate(&cfg);
            data.write_to(&a.out)?;
            println!(
                "entities\t{}\ntrain\t{}\ntest\t{}\nheld_out_mentions\t{}",
                data.entities.len(),
                data.train_src.len(),
                data.test_src.len(),
                data.entity_testset.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(errs)) => {
            for e in errs {
                eprintln!("config error: {e}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
