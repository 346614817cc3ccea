//! `zoner`: ingest, split, train, evaluate and annotate obituary corpora.
//!
//! Exit status is 0 on success, 1 on a domain error and 2 on a usage error.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use zoner_core::agreement::{agreement_report, AnnotationRecord};
use zoner_core::corpus::{
    corpus_stats, load_corpus, split_corpus, write_jsonl, Corpus, CorpusFormat, DatasetSplit, SplitConfig,
};
use zoner_core::eval::{confusion, error_export, metrics};
use zoner_core::models::gradcheck::gradient_suite;
use zoner_core::models::{train, ModelType, TrainConfig, ZoneModel};
use zoner_core::nn::gradcheck::DEFAULT_TOLERANCE;
use zoner_core::nn::RmsPropConfig;
use zoner_core::Zone;

const DEFAULT_SEED: u64 = 13;

#[derive(Parser)]
#[command(name = "zoner", version, about = "Sentence zoning for obituaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a JSONL corpus or a directory of .txt files and write normalized JSONL.
    Ingest(IngestArgs),
    /// Per-source zone counts and percentages of a labeled corpus.
    Stats(StatsArgs),
    /// Seeded document-level train/validation/test split.
    Split(SplitArgs),
    /// Train one of the four models.
    Train(TrainArgs),
    /// Score a checkpoint on labeled documents.
    Eval(EvalArgs),
    /// Label every sentence of every document.
    Predict(PredictArgs),
    /// Agreement report from an annotations log.
    Agree(AgreeArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Jsonl,
    Text,
}

#[derive(Args)]
struct IngestArgs {
    /// JSONL file or directory of .txt files.
    input: PathBuf,
    /// Defaults to text for directories, jsonl otherwise.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Source tag for plain-text documents.
    #[arg(long, default_value = "US")]
    source: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    corpus: PathBuf,
    /// Also write `source,zone,count,percent` CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    corpus: PathBuf,
    #[arg(long, env = "ZONER_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,
    #[arg(long, default_value_t = 0.3)]
    test_frac: f64,
    /// Fraction of the non-test documents held out for validation.
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
    #[arg(long)]
    stratify_by_source: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_model_type)]
    model: ModelType,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// Checkpoint path (.zmc).
    #[arg(long)]
    out: PathBuf,
    /// Loss history JSON; defaults to the checkpoint path with `.history.json`.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, env = "ZONER_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    /// word2vec text file (bilstm-w2v, bilstm-crf).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// BiLSTM units per direction.
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    #[arg(long, default_value_t = 128)]
    channels: usize,
    #[arg(long, default_value_t = 3)]
    kernel_width: usize,
    #[arg(long, default_value_t = 2)]
    pool_width: usize,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    conv_per_block: u8,
    #[arg(long, default_value_t = 350)]
    max_len: usize,
    #[arg(long, default_value_t = 2)]
    min_freq: usize,
    #[arg(long, default_value_t = 20_000)]
    max_vocab: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled JSONL corpus.
    #[arg(long)]
    test: PathBuf,
    /// Restrict to the test part of this split.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Report as `class,precision,recall,f1` CSV.
    #[arg(long)]
    report_csv: Option<PathBuf>,
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// Misclassified sentences as TSV.
    #[arg(long)]
    errors: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// JSONL corpus; labels, if any, are ignored.
    #[arg(long)]
    input: PathBuf,
    /// `{"id", "labels"}` lines; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AgreeArgs {
    /// Annotations JSONL.
    annotations: PathBuf,
    /// Corpus JSONL, for per-source grouping.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    markdown: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, env = "ZONER_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Annotation log; created when missing.
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Built web annotator, served under `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn parse_model_type(s: &str) -> Result<ModelType, String> {
    s.parse().map_err(|e: zoner_core::models::ModelError| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Stats(a) => stats(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Agree(a) => agree(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Serve(a) => serve(a),
    }
}

/// Write via a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    load_corpus(path, &CorpusFormat::Jsonl).with_context(|| format!("loading {}", path.display()))
}

fn read_checkpoint(path: &Path) -> Result<ZoneModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ZoneModel::from_checkpoint_json(&text).with_context(|| format!("loading {}", path.display()))
}

fn corpus_jsonl(corpus: &Corpus) -> Vec<u8> {
    let mut out = Vec::new();
    write_jsonl(corpus, &mut out).expect("writing to memory");
    out
}

fn ingest(a: IngestArgs) -> Result<()> {
    let format = match a.format {
        Some(InputFormat::Jsonl) => CorpusFormat::Jsonl,
        Some(InputFormat::Text) => CorpusFormat::TextDir { source: a.source },
        None if a.input.is_dir() => CorpusFormat::TextDir { source: a.source },
        None => CorpusFormat::Jsonl,
    };
    let corpus = load_corpus(&a.input, &format).with_context(|| format!("loading {}", a.input.display()))?;
    write_atomic(&a.out, &corpus_jsonl(&corpus))?;
    let labeled = corpus.sentence_count() - corpus.unlabeled().len();
    println!(
        "{} documents, {} sentences ({labeled} labeled) -> {}",
        corpus.len(),
        corpus.sentence_count(),
        a.out.display()
    );
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let report = corpus_stats(&read_corpus(&a.corpus)?)?;
    print!("{}", report.to_table());
    if let Some(path) = a.csv {
        write_atomic(&path, report.to_csv().as_bytes())?;
    }
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    eprintln!("zoner split: seed {}", a.seed);
    let corpus = read_corpus(&a.corpus)?;
    let config = SplitConfig {
        train_frac: a.train_frac,
        test_frac: a.test_frac,
        val_frac_of_train: a.val_frac,
        seed: a.seed,
        stratify_by_source: a.stratify_by_source,
    };
    let split = split_corpus(&corpus, &config)?;
    write_atomic(&a.out, (serde_json::to_string_pretty(&split)? + "\n").as_bytes())?;
    println!(
        "train {}, validation {}, test {} -> {}",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        a.out.display()
    );
    Ok(())
}

fn read_split(path: &Path) -> Result<DatasetSplit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    eprintln!(
        "zoner train: model {}, seed {}, epochs {}, batch {}",
        a.model, a.seed, a.epochs, a.batch
    );
    if a.model.needs_embeddings() && a.embeddings.is_none() {
        bail!("model {} needs --embeddings", a.model);
    }
    let corpus = read_corpus(&a.corpus)?;
    let split = read_split(&a.split)?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        optimizer: RmsPropConfig {
            learning_rate: a.lr,
            ..RmsPropConfig::default()
        },
        min_freq: a.min_freq,
        max_vocab: a.max_vocab,
        hidden: a.hidden,
        channels: a.channels,
        kernel_width: a.kernel_width,
        pool_width: a.pool_width,
        conv_per_block: a.conv_per_block as usize,
        max_len: a.max_len,
        embeddings: a.embeddings,
    };
    let (model, history) = train(a.model, &corpus, &split, &config)?;
    for e in &history.epochs {
        println!("epoch {:>3}  train {:.6}  val {:.6}", e.epoch, e.train_loss, e.val_loss);
    }
    println!("best epoch {}", history.best_epoch);
    let history_path = a.history.unwrap_or_else(|| a.out.with_extension("history.json"));
    write_atomic(&a.out, model.to_checkpoint_json().as_bytes())?;
    write_atomic(
        &history_path,
        (serde_json::to_string_pretty(&history)? + "\n").as_bytes(),
    )?;
    println!(
        "checkpoint -> {}\nhistory -> {}",
        a.out.display(),
        history_path.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = read_checkpoint(&a.model)?;
    let mut corpus = read_corpus(&a.test)?;
    if let Some(path) = &a.split {
        corpus = corpus.subset(&read_split(path)?.test)?;
    }
    corpus.require_labeled()?;
    let gold: Vec<Vec<Zone>> = corpus
        .obituaries()
        .iter()
        .map(|d| d.golds().expect("labeled"))
        .collect();
    let pred = model.predict_corpus(&corpus)?;
    let matrix = confusion(&gold.concat(), &pred.concat())?;
    let report = metrics(&matrix)?;
    print!("{}", report.to_csv());
    if let Some(p) = &a.report {
        write_atomic(p, report.to_json().as_bytes())?;
    }
    if let Some(p) = &a.report_csv {
        write_atomic(p, report.to_csv().as_bytes())?;
    }
    if let Some(p) = &a.confusion {
        write_atomic(p, matrix.to_csv().as_bytes())?;
    }
    if let Some(p) = &a.errors {
        write_atomic(p, error_export(&corpus, &gold, &pred)?.as_bytes())?;
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = read_checkpoint(&a.model)?;
    let corpus = read_corpus(&a.input)?;
    let mut out = String::new();
    for (doc, zones) in corpus.obituaries().iter().zip(model.predict_corpus(&corpus)?) {
        let labels: Vec<&str> = zones.iter().map(|z| z.code()).collect();
        out.push_str(&serde_json::json!({ "id": doc.id, "labels": labels }).to_string());
        out.push('\n');
    }
    match a.out {
        Some(path) => write_atomic(&path, out.as_bytes()),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn agree(a: AgreeArgs) -> Result<()> {
    let records = read_annotations(&a.annotations)?;
    let corpus = a.corpus.as_deref().map(read_corpus).transpose()?;
    let report = agreement_report(&records, corpus.as_ref())?;
    let markdown = report.to_markdown();
    print!("{markdown}");
    if let Some(p) = &a.markdown {
        write_atomic(p, markdown.as_bytes())?;
    }
    if let Some(p) = &a.csv {
        write_atomic(p, report.to_csv().as_bytes())?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    eprintln!("zoner gradcheck: seed {}, trials {}", a.seed, a.trials);
    let started = Instant::now();
    let rows = gradient_suite(a.trials, a.seed)?;
    let mut failed = Vec::new();
    for r in &rows {
        let ok = r.max_relative_error < a.tolerance;
        println!(
            "{:<24} {:>10.3e}  {}",
            r.name,
            r.max_relative_error,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(r.name);
        }
    }
    println!("{} checks in {:.1}s", rows.len(), started.elapsed().as_secs_f64());
    if !failed.is_empty() {
        bail!("gradient mismatch above {:e}: {}", a.tolerance, failed.join(", "));
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let store = zoner_service::AnnotationStore::open(&a.annotations)?;
    let state = zoner_service::AppState::new(corpus, store);
    let app = zoner_service::router(state, a.static_dir);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .with_context(|| format!("binding {}", a.addr))?;
        println!("listening on {}", listener.local_addr()?);
        std::io::stdout().flush()?;
        zoner_service::serve(listener, app).await?;
        Ok(())
    })
}
