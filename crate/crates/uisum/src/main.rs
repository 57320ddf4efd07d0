use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use uisum::config::{RunConfig, Source};
use uisum::core::analysis::{length_distribution, sfa_stats, word_agreement};
use uisum::core::baselines::{PixelAutoencoder, RetrievalMode, ScreenIndex};
use uisum::core::corpus::{Corpus, Screen, Split};
use uisum::core::features::ClassVocab;
use uisum::core::metrics::{evaluate_suite, BleuOptions};
use uisum::core::model::{Summarizer, Variant};
use uisum::core::train::fit;
use uisum::dataset::{load_corpus, read_split_lists, split_file_name, HierarchyFrame, LoadOptions};
use uisum::formats::{self, Checkpoint, FeatureCache};
use uisum::pipeline::{self, SnowballStem};
use uisum::reports;

#[derive(Debug, Parser)]
#[command(name = "uisum", version, about = "Summarize mobile UI screens from view hierarchies and screenshots")]
struct Cli {
    /// Key-value settings file (see README); command-line `--set` wins over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set train.lr=0.0005`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for featurization, decoding and retrieval (1 = deterministic single-threaded).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a dataset directory into a binary corpus file.
    Ingest(IngestArgs),
    /// Annotator agreement, SFA statistics and summary lengths.
    Analyze(AnalyzeArgs),
    /// Build the decoding vocabulary and class-name list from the training split.
    BuildVocab(BuildVocabArgs),
    /// Compute model input features for every screen.
    Featurize(FeaturizeArgs),
    /// Train a summarization model.
    Train(TrainArgs),
    /// Beam-decode summaries with a trained model.
    Predict(PredictArgs),
    /// Nearest-neighbour retrieval baseline.
    Baseline(BaselineArgs),
    /// Score predictions against reference summaries.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Dataset root with `hierarchies/` and `screenshots/`.
    #[arg(long)]
    corpus: PathBuf,
    /// CSV with header `screenId,summary`.
    #[arg(long)]
    summaries: PathBuf,
    /// CSV with header `appId,description` (default: `<corpus>/app_details.csv` if present).
    #[arg(long)]
    app_details: Option<PathBuf>,
    /// SFA CSV (default: `<corpus>/sfa.csv` if present).
    #[arg(long)]
    sfa: Option<PathBuf>,
    /// Directory with `train_apps.txt`, `val_apps.txt`, `test_apps.txt` (default: the corpus root if they exist there).
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Coordinate frame of hierarchy bounds: `auto`, `screenshot` or `WxH`.
    #[arg(long, default_value = "auto")]
    frame: String,
    /// Downscale screenshots so their longer side is at most this many pixels.
    #[arg(long)]
    max_side: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// `all`, `train`, `validation` or `test`.
    #[arg(long, default_value = "all")]
    split: String,
    /// Count every word occurrence instead of each distinct word once per summary.
    #[arg(long)]
    per_token: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BuildVocabArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for `vocab.txt` and `classes.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Directory written by `build-vocab`.
    #[arg(long)]
    vocab: PathBuf,
    /// Word vectors in whitespace text format.
    #[arg(long)]
    glove: PathBuf,
    /// Expected word-vector dimension (default: taken from the file).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Word vectors used to initialize the decoder embeddings.
    #[arg(long)]
    glove: Option<PathBuf>,
    /// `full`, `pixel-only`, `text-only` or `no-app-desc`.
    #[arg(long, default_value = "full")]
    variant: String,
    /// Output directory for `checkpoint.bin` and `loss.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Predictions CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long)]
    mode: String,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Reuse a previously written index instead of fitting one on the training split.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Output directory for `predictions.csv` and, when fitted, `index.bin`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Add-one smoothing of the higher-order BLEU precisions.
    #[arg(long)]
    smoothing: bool,
    /// Output directory for `report.csv`, `report.txt` and `per_screen.csv`.
    #[arg(long)]
    out: PathBuf,
}

/// Bad invocation: exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return (1, "usage");
        }
        if let Some(u) = cause.downcast_ref::<uisum::Error>() {
            if u.is_numeric() {
                return (3, "numeric");
            }
            if matches!(u.as_core(), Some(uisum::core::Error::Config(_))) {
                return (1, "usage");
            }
            return (2, "data");
        }
        if let Some(c) = cause.downcast_ref::<uisum::core::Error>() {
            return match c {
                uisum::core::Error::Numeric(_) => (3, "numeric"),
                uisum::core::Error::Config(_) => (1, "usage"),
                _ => (2, "data"),
            };
        }
    }
    (2, "data")
}

fn diagnostic(code: u8, kind: &str, message: &str) {
    let one_line = message.replace(['\n', '\r'], " ");
    eprintln!("uisum: status=error exit={code} kind={kind} message={one_line:?}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let first = e.to_string().lines().next().unwrap_or("").to_string();
            diagnostic(1, "usage", &first);
            return ExitCode::from(1);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = classify(&e);
            diagnostic(code, kind, &format!("{e:#}"));
            ExitCode::from(code)
        }
    }
}

fn settings(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &cli.config {
        require(p)?;
        cfg.apply_file(p)?;
    }
    cfg.apply_cli(&cli.set)?;
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string(), Source::Cli)?;
    }
    cfg.propagate_seed();
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let cfg = settings(&cli)?;
    info!("settings:\n{}", cfg.describe().trim_end());
    let started = Instant::now();
    match &cli.command {
        Command::Ingest(a) => ingest(a, &cfg),
        Command::Analyze(a) => analyze(a, &cfg),
        Command::BuildVocab(a) => build_vocab(a, &cfg),
        Command::Featurize(a) => featurize(a, &cfg),
        Command::Train(a) => train(a, &cfg),
        Command::Predict(a) => predict(a, &cfg),
        Command::Baseline(a) => baseline(a, &cfg),
        Command::Evaluate(a) => evaluate(a, &cfg),
    }?;
    info!("done in {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

/// Fails with a data error naming `path` if it does not exist.
fn require(path: &Path) -> uisum::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(uisum::Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ))
    }
}

/// An output directory that appears only once all its files are written.
/// An existing directory is written into in place.
struct OutDir {
    target: PathBuf,
    stage: PathBuf,
}

impl OutDir {
    fn create(target: &Path) -> anyhow::Result<Self> {
        if target.is_dir() {
            return Ok(OutDir {
                target: target.to_path_buf(),
                stage: target.to_path_buf(),
            });
        }
        if target.exists() {
            return Err(usage(format!("{} exists and is not a directory", target.display())));
        }
        let name = target
            .file_name()
            .ok_or_else(|| usage(format!("invalid output directory {}", target.display())))?
            .to_string_lossy();
        let stage = target.with_file_name(format!(".{name}.partial"));
        if stage.exists() {
            fs::remove_dir_all(&stage).map_err(|e| uisum::Error::io(&stage, e))?;
        }
        fs::create_dir_all(&stage).map_err(|e| uisum::Error::io(&stage, e))?;
        Ok(OutDir {
            target: target.to_path_buf(),
            stage,
        })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.stage.join(name)
    }

    fn commit(self) -> anyhow::Result<()> {
        if self.stage != self.target {
            fs::rename(&self.stage, &self.target).map_err(|e| uisum::Error::io(&self.target, e))?;
        }
        Ok(())
    }
}

fn parse_split(name: &str) -> anyhow::Result<Option<Split>> {
    if name == "all" {
        return Ok(None);
    }
    Split::parse(name)
        .map(Some)
        .ok_or_else(|| usage(format!("unknown split {name:?} (use all, train, validation or test)")))
}

fn load(path: &Path) -> anyhow::Result<Corpus> {
    require(path)?;
    let c = formats::read_corpus(path)?;
    info!("corpus {}: {} screens", path.display(), c.len());
    Ok(c)
}

fn split_screens<'a>(corpus: &'a Corpus, split: Option<Split>) -> anyhow::Result<Vec<&'a Screen>> {
    match split {
        None => Ok(corpus.screens().collect()),
        Some(s) => {
            if !corpus.has_splits() {
                bail!(uisum::Error::format(
                    Path::new("<corpus>"),
                    "corpus has no split assignment; re-run ingest with split lists"
                ));
            }
            Ok(corpus.view(s).screens().collect())
        }
    }
}

fn ingest(a: &IngestArgs, _cfg: &RunConfig) -> anyhow::Result<()> {
    require(&a.corpus)?;
    require(&a.summaries)?;
    let frame = HierarchyFrame::parse(&a.frame)
        .ok_or_else(|| usage(format!("invalid --frame {:?}", a.frame)))?;
    let app_details = a
        .app_details
        .clone()
        .or_else(|| Some(a.corpus.join("app_details.csv")).filter(|p| p.is_file()));
    if let Some(p) = &app_details {
        require(p)?;
    }
    if let Some(p) = &a.sfa {
        require(p)?;
    }
    let split_dir = match &a.splits {
        Some(d) => {
            require(d)?;
            Some(d.clone())
        }
        None => Some(a.corpus.clone()).filter(|d| d.join(split_file_name(Split::Train)).is_file()),
    };
    let options = LoadOptions {
        frame,
        max_side: a.max_side,
        sfa_file: a.sfa.clone(),
    };
    let (mut corpus, report) = load_corpus(&a.corpus, &a.summaries, app_details.as_deref(), &options)?;
    if let Some(dir) = &split_dir {
        let lists = read_split_lists(dir)?;
        corpus
            .assign_splits(&lists)
            .map_err(|e| uisum::Error::core(dir, e))?;
    } else {
        warn!("no split lists found; the corpus is written without a split assignment");
    }
    formats::write_corpus(&a.out, &corpus)?;
    let c = corpus.counts();
    println!("screens={} summaries={} apps={}", c.screens, c.summaries, c.apps);
    if corpus.has_splits() {
        for s in Split::ALL {
            let sc = corpus.split_counts(s);
            println!(
                "split={} apps={} screens={} summaries={}",
                s.name(),
                sc.apps,
                sc.screens,
                sc.summaries
            );
        }
    }
    println!(
        "skipped={} missing_hierarchy={} missing_screenshot={} unreadable={} dropped_summaries={} clipped_sfa={}",
        report.skipped(),
        report.missing_hierarchy.len(),
        report.missing_screenshot.len(),
        report.unreadable.len(),
        report.dropped_summaries,
        report.clipped_sfa_boxes
    );
    for id in report.skipped_ids() {
        println!("skipped_screen={id}");
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let split = parse_split(&a.split)?;
    let corpus = load(&a.corpus)?;
    let out = OutDir::create(&a.out)?;
    let screens = split_screens(&corpus, split)?;
    let agreement = word_agreement(screens.iter().copied(), &cfg.stop_phrases, a.per_token);
    let sfa = sfa_stats(screens.iter().copied());
    let lengths = length_distribution(screens.iter().copied(), &cfg.stop_phrases);
    reports::write_word_agreement(&out.file("word_agreement.csv"), &agreement)?;
    reports::write_sfa_stats(&out.file("sfa_stats.csv"), &sfa)?;
    reports::write_length_hist(&out.file("length_hist.csv"), &lengths)?;
    out.commit()?;
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.2}", 100.0 * x));
    println!(
        "screens={} mean_length={} sfa_coverage_pct={} sfa_iou_pct={} agreement_screens={} agreement_excluded={}",
        screens.len(),
        lengths.mean.map_or("n/a".into(), |m| format!("{m:.3}")),
        pct(sfa.mean_coverage),
        pct(sfa.mean_iou),
        agreement.screens_used,
        agreement.screens_excluded
    );
    Ok(())
}

fn build_vocab(a: &BuildVocabArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let corpus = load(&a.corpus)?;
    let train = split_screens(&corpus, Some(Split::Train))?;
    if train.is_empty() {
        bail!(uisum::Error::format(&a.corpus, "training split is empty"));
    }
    let out = OutDir::create(&a.out)?;
    let vocab = pipeline::build_vocab(train.iter().copied(), &cfg.stop_phrases, cfg.vocab_size)?;
    let classes = ClassVocab::build(train.iter().copied(), cfg.class_top_k);
    formats::write_vocab(&out.file("vocab.txt"), &vocab)?;
    formats::write_classes(&out.file("classes.txt"), &classes)?;
    out.commit()?;
    println!("vocab_size={} classes={}", vocab.len(), classes.len());
    Ok(())
}

fn vocab_files(dir: &Path) -> anyhow::Result<(PathBuf, PathBuf)> {
    let (v, c) = (dir.join("vocab.txt"), dir.join("classes.txt"));
    require(&v)?;
    require(&c)?;
    Ok((v, c))
}

fn featurize(a: &FeaturizeArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let (vpath, cpath) = vocab_files(&a.vocab)?;
    require(&a.glove)?;
    let corpus = load(&a.corpus)?;
    let vocab = formats::read_vocab(&vpath)?;
    let classes = formats::read_classes(&cpath)?;
    let keep = pipeline::needed_tokens(corpus.screens(), Some(&vocab));
    let table = formats::load_word_vectors(&a.glove, a.dim, Some(&keep))?;
    info!("word vectors: {} of {} needed tokens, dimension {}", table.len(), keep.len(), table.dim());
    let screens: Vec<&Screen> = corpus.screens().collect();
    let features = pipeline::featurize_all(&screens, &table, &classes, &cfg.features)?;
    let truncated = features.iter().filter(|f| f.truncated > 0).count();
    if truncated > 0 {
        warn!("{truncated} screens exceeded {} elements and were truncated", cfg.features.max_elements);
    }
    let cache = FeatureCache {
        key: formats::feature_cache_key(&cfg.features, &classes, &table),
        config: cfg.features.clone(),
        word_dim: table.dim(),
        features,
    };
    formats::write_features(&a.out, &cache)?;
    println!("screens={} config_hash={}", cache.features.len(), cache.key);
    Ok(())
}

/// Explicit `features.*` settings must agree with the cache being trained on.
fn check_feature_settings(cfg: &RunConfig, cache: &FeatureCache, path: &Path) -> anyhow::Result<()> {
    let (want, have) = (&cfg.features, &cache.config);
    let pairs = [
        ("features.num_buckets", want.num_buckets.to_string(), have.num_buckets.to_string()),
        ("features.max_position", want.max_position.to_string(), have.max_position.to_string()),
        ("features.max_elements", want.max_elements.to_string(), have.max_elements.to_string()),
        ("features.include_invisible", want.include_invisible.to_string(), have.include_invisible.to_string()),
    ];
    let diffs: Vec<String> = pairs
        .into_iter()
        .filter(|(k, w, h)| cfg.source_of(k) != Source::Default && w != h)
        .map(|(k, w, h)| format!("{k}: settings {w}, cache {h}"))
        .collect();
    if diffs.is_empty() {
        return Ok(());
    }
    bail!(uisum::Error::format(
        path,
        format!("feature cache is stale ({}); re-run featurize", diffs.join("; "))
    ))
}

fn train(a: &TrainArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let variant = Variant::parse(&a.variant)
        .ok_or_else(|| usage(format!("unknown --variant {:?}", a.variant)))?;
    let (vpath, cpath) = vocab_files(&a.vocab)?;
    require(&a.features)?;
    if let Some(g) = &a.glove {
        require(g)?;
    }
    let corpus = load(&a.corpus)?;
    let vocab = formats::read_vocab(&vpath)?;
    let classes = formats::read_classes(&cpath)?;
    let cache = formats::read_features(&a.features, None)?;
    check_feature_settings(cfg, &cache, &a.features)?;
    let mut mc = cfg.model.clone().with_variant(variant);
    mc.vocab_size = vocab.len();
    mc.num_classes = classes.len();
    mc.word_dim = cache.word_dim;
    mc.num_buckets = cache.config.num_buckets;
    mc.max_position = cache.config.max_position;
    mc.max_elements = cache.config.max_elements;
    mc.validate()?;
    let mut model = Summarizer::new(mc, cfg.seed)?;
    if let Some(g) = &a.glove {
        let keep: BTreeSet<String> = vocab.user_tokens().iter().cloned().collect();
        let table = formats::load_word_vectors(g, Some(cache.word_dim), Some(&keep))?;
        let n = model.init_word_embeddings(&vocab, &table)?;
        info!("initialized {n} decoder word embeddings from {}", g.display());
    }
    let view = |s: Split| -> anyhow::Result<Vec<_>> {
        let ids: BTreeSet<&str> = split_screens(&corpus, Some(s))?
            .into_iter()
            .map(|x| x.screen_id.as_str())
            .collect();
        Ok(pipeline::examples(
            cache.features.iter().filter(|f| ids.contains(f.screen_id.as_str())),
            |id| corpus.get(id),
            &cfg.stop_phrases,
        ))
    };
    let train_ex = view(Split::Train)?;
    let val_ex = view(Split::Validation)?;
    if train_ex.is_empty() || val_ex.is_empty() {
        bail!(uisum::Error::format(
            &a.features,
            format!(
                "need featurized training and validation screens (found {} and {})",
                train_ex.len(),
                val_ex.len()
            )
        ));
    }
    info!("training on {} screens, validating on {}", train_ex.len(), val_ex.len());
    let out = OutDir::create(&a.out)?;
    let ck_path = out.file("checkpoint.bin");
    let outcome = fit(model, &train_ex, &val_ex, &vocab, &cfg.train, |m, epoch, loss| {
        info!("epoch {epoch}: validation loss {loss:.4} (best so far)");
        let ck = Checkpoint {
            model: m.clone(),
            vocab: vocab.clone(),
            classes: classes.clone(),
            feature_key: cache.key.clone(),
        };
        formats::write_checkpoint(&ck_path, &ck).map_err(|e| {
            uisum::core::Error::Input(format!("writing checkpoint: {e}"))
        })
    })?;
    reports::write_loss_curve(&out.file("loss.csv"), &outcome.curve)?;
    out.commit()?;
    println!(
        "best_epoch={} best_val_loss={:.6} epochs={} steps={}",
        outcome.best_epoch,
        outcome.best_val_loss,
        outcome.epochs_run,
        outcome.curve.last().map_or(0, |p| p.step)
    );
    Ok(())
}

fn predict(a: &PredictArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let split = parse_split(&a.split)?;
    require(&a.checkpoint)?;
    require(&a.features)?;
    let corpus = load(&a.corpus)?;
    let ck = formats::read_checkpoint(&a.checkpoint, None)?;
    let cache = formats::read_features(&a.features, Some(&ck.feature_key))?;
    let ids: BTreeSet<&str> = split_screens(&corpus, split)?
        .into_iter()
        .map(|s| s.screen_id.as_str())
        .collect();
    let features: Vec<_> = cache
        .features
        .into_iter()
        .filter(|f| ids.contains(f.screen_id.as_str()))
        .collect();
    if features.len() < ids.len() {
        warn!("{} screens of the split have no features", ids.len() - features.len());
    }
    let preds = pipeline::predict_all(&ck.model, &features, &ck.vocab, cfg.decode.beam_size, cfg.decode.alpha)?;
    reports::write_predictions(&a.out, &preds)?;
    println!("screens={} predictions={}", features.len(), preds.len());
    Ok(())
}

fn baseline(a: &BaselineArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let mode = RetrievalMode::parse(&a.mode).ok_or_else(|| {
        let names: Vec<&str> = RetrievalMode::ALL.iter().map(|m| m.name()).collect();
        usage(format!("unknown --mode {:?} (one of {})", a.mode, names.join(", ")))
    })?;
    let split = parse_split(&a.split)?;
    if let Some(p) = &a.index {
        require(p)?;
    }
    let corpus = load(&a.corpus)?;
    let queries = split_screens(&corpus, split)?;
    let out = OutDir::create(&a.out)?;
    let index = match &a.index {
        Some(p) => formats::read_index(p)?,
        None => {
            let train = split_screens(&corpus, Some(Split::Train))?;
            let ae = if mode == RetrievalMode::PixelDl {
                let mut ae = PixelAutoencoder::new(cfg.autoencoder.clone())?;
                let imgs: Vec<_> = train.iter().map(|s| ae.prepare(&s.screenshot)).collect();
                let refs: Vec<_> = imgs.iter().collect();
                let history = ae.train(&refs)?;
                info!(
                    "autoencoder trained for {} epochs, final reconstruction MSE {:.5}",
                    history.len(),
                    history.last().copied().unwrap_or(f64::NAN)
                );
                Some(ae)
            } else {
                None
            };
            let index = ScreenIndex::fit(train.iter().copied(), ae)?;
            formats::write_index(&out.file("index.bin"), &index)?;
            index
        }
    };
    let preds = pipeline::baseline_predictions(&index, &queries, mode, cfg.seed)?;
    reports::write_predictions(&out.file("predictions.csv"), &preds)?;
    out.commit()?;
    println!("mode={} indexed={} predictions={}", mode.name(), index.entries.len(), preds.len());
    Ok(())
}

fn evaluate(a: &EvaluateArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let split = parse_split(&a.split)?;
    require(&a.predictions)?;
    require(&a.corpus)?;
    let preds = reports::read_predictions(&a.predictions)?;
    let corpus = formats::read_corpus(&a.corpus)?;
    let top = reports::top_predictions(&preds);
    let stem = SnowballStem::default();
    let options = BleuOptions {
        smoothing: a.smoothing,
    };
    let report = match split {
        Some(s) => {
            split_screens(&corpus, Some(s))?;
            evaluate_suite(&top, &corpus.view(s), &cfg.stop_phrases, options, &stem)
        }
        None => {
            // score every screen of every split together
            let mut all = Corpus::new();
            for s in corpus.screens() {
                all.insert(s.clone());
            }
            let apps: Vec<String> = all.app_ids().into_iter().map(str::to_string).collect();
            let lists = [(Split::Test, apps)].into_iter().collect();
            all.assign_splits(&lists)?;
            evaluate_suite(&top, &all.view(Split::Test), &cfg.stop_phrases, options, &stem)
        }
    }
    .map_err(|e| uisum::Error::core(&a.predictions, e))?;
    let out = OutDir::create(&a.out)?;
    let table = reports::metric_table(&report);
    reports::write_metric_report(&out.file("report.csv"), &report)?;
    reports::write_per_screen(&out.file("per_screen.csv"), &report)?;
    uisum::codec::write_atomic(&out.file("report.txt"), table.as_bytes())?;
    out.commit()?;
    print!("{table}");
    Ok(())
}
