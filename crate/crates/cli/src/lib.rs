//! Batch commands behind the `denseval` binary.
//!
//! Every command writes its report to `out`, diagnostics to `err`, and
//! returns an error whose [`exit_code`] the binary uses as process status.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use denseval::caption_metrics::{corpus_eval, BleuMode};
use denseval::classifier::{self, Hyperparams, LinearModel};
use denseval::corpus::{
    self, normalize_text, stratified_split, LabeledSummary, NormalizeRules, StopWords,
};
use denseval::detection::{self, map_report_weighted};
use denseval::tuner::{
    run_search, FitnessSource, GaConfig, PipelineFitness, SearchOutcome, SyntheticFitness,
    TableFitness,
};

pub mod manifest;
pub mod render;

use manifest::{sibling_path, RunManifest};
use render::ScoreRow;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_EMPTY: u8 = 3;
pub const EXIT_VERSION: u8 = 4;

/// An error carrying an explicit exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.code;
        }
        if let Some(e) = cause.downcast_ref::<denseval::Error>() {
            return match e {
                denseval::Error::ModelVersion(_) => EXIT_VERSION,
                denseval::Error::Empty(_) => EXIT_EMPTY,
                _ => EXIT_INPUT,
            };
        }
    }
    EXIT_INPUT
}

#[derive(Debug, Parser)]
#[command(name = "denseval", version, about = "Caption post-processing, metrics and tuning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Suppress overlapping caption events per video.
    Nms(NmsArgs),
    /// Score candidate summaries against references.
    Eval(EvalArgs),
    /// Search the NMS threshold with a genetic algorithm.
    Tune(TuneArgs),
    /// Train the bag-of-n-grams suspicious-text classifier.
    TrainClassifier(TrainArgs),
    /// Label summaries with a trained classifier.
    Classify(ClassifyArgs),
    /// Per-class average precision and mAP for temporal detections.
    Map(MapArgs),
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Nms(a) => cmd_nms(&a, out),
        Command::Eval(a) => cmd_eval(&a, out, err),
        Command::Tune(a) => cmd_tune(&a, out, err),
        Command::TrainClassifier(a) => cmd_train_classifier(&a, out),
        Command::Classify(a) => cmd_classify(&a, out),
        Command::Map(a) => cmd_map(&a, out),
    }
}

#[derive(Debug, Args)]
pub struct NmsArgs {
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_nms(args: &NmsArgs, out: &mut dyn Write) -> Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(Failure::new(
            EXIT_INPUT,
            format!("threshold {} outside [0, 1]", args.threshold),
        )
        .into());
    }
    let records = corpus::load_captions(&args.captions)?;
    let mut before = 0;
    let mut after = 0;
    let mut filtered = Vec::with_capacity(records.len());
    for mut rec in records {
        let segments: Vec<_> = rec.events.iter().map(|e| e.segment).collect();
        let mut kept = denseval::segments::nms_indices(&segments, args.threshold)?;
        kept.sort_unstable();
        before += rec.events.len();
        after += kept.len();
        let events = std::mem::take(&mut rec.events);
        rec.events = kept.into_iter().map(|i| events[i].clone()).collect();
        filtered.push(rec);
    }
    corpus::save_captions(&args.out, &filtered)?;
    RunManifest::new("nms")
        .param("threshold", args.threshold)
        .param("out", args.out.display().to_string())
        .input(&args.captions)?
        .write(&sibling_path(&args.out))?;
    writeln!(
        out,
        "kept {after} of {before} events across {} videos",
        filtered.len()
    )?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model outputs: caption `.json` files or `video_id,class,summary` `.csv` files.
    #[arg(long, num_args = 1.., required_unless_present = "scores", requires = "references")]
    pub candidates: Vec<PathBuf>,
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Render precomputed rows (`model,BLEU@1,...,METEOR`) instead of scoring.
    #[arg(long, conflicts_with_all = ["candidates", "references"])]
    pub scores: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long, default_value_t = BleuMode::Individual)]
    pub bleu_mode: BleuMode,
    #[arg(long, default_value_t = 3)]
    pub decimals: usize,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// `(video_id, text)` pairs from a caption `.json` or summary `.csv` file.
pub fn load_texts(path: &Path) -> Result<Vec<(String, String)>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(corpus::load_captions(path)?
            .into_iter()
            .map(|r| {
                let s = r.summary();
                (r.video_id, s)
            })
            .collect()),
        Some("csv") => Ok(corpus::load_ground_truth(path)?
            .into_iter()
            .map(|g| (g.video_id, g.text))
            .collect()),
        _ => Err(Failure::new(
            EXIT_INPUT,
            format!("{}: expected a .json or .csv file", path.display()),
        )
        .into()),
    }
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn parse_score_rows(text: &str, origin: &Path) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .with_context(|| format!("{}: reading header", origin.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected: Vec<&str> = std::iter::once("model").chain(render::SCORE_COLUMNS).collect();
    if header != expected {
        return Err(Failure::new(
            EXIT_INPUT,
            format!(
                "{}: line 1: expected header `{}`",
                origin.display(),
                expected.join(",")
            ),
        )
        .into());
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("{}: malformed row", origin.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut values = [0.0; 5];
        for (slot, field) in values.iter_mut().zip(rec.iter().skip(1)) {
            *slot = field.parse().map_err(|e| {
                Failure::new(
                    EXIT_INPUT,
                    format!("{}: line {line}: {field:?}: {e}", origin.display()),
                )
            })?;
        }
        rows.push(ScoreRow {
            model: rec[0].to_string(),
            values,
        });
    }
    if rows.is_empty() {
        return Err(Failure::new(EXIT_EMPTY, format!("{}: no score rows", origin.display())).into());
    }
    Ok(rows)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut manifest = RunManifest::new("eval")
        .param("format", format!("{:?}", args.format).to_lowercase())
        .param("bleu_mode", args.bleu_mode.to_string())
        .param("decimals", args.decimals);
    let rows = if let Some(scores) = &args.scores {
        let text = std::fs::read_to_string(scores)
            .map_err(|e| denseval::Error::Io { path: scores.clone(), source: e })?;
        manifest = manifest.input(scores)?;
        parse_score_rows(&text, scores)?
    } else {
        let ref_path = args.references.as_ref().expect("clap requires references");
        let references: BTreeMap<String, String> = load_texts(ref_path)?.into_iter().collect();
        manifest = manifest.input(ref_path)?;
        let mut rows = Vec::new();
        for cand_path in &args.candidates {
            let candidates = load_texts(cand_path)?;
            manifest = manifest.input(cand_path)?;
            let cand_ids: BTreeSet<&str> = candidates.iter().map(|(id, _)| id.as_str()).collect();
            let pairs: Vec<(&str, &str)> = candidates
                .iter()
                .filter_map(|(id, text)| references.get(id).map(|r| (text.as_str(), r.as_str())))
                .collect();
            let missing_ref: Vec<&str> = cand_ids
                .iter()
                .copied()
                .filter(|id| !references.contains_key(*id))
                .collect();
            let missing_cand: Vec<&str> = references
                .keys()
                .map(String::as_str)
                .filter(|id| !cand_ids.contains(id))
                .collect();
            if !missing_ref.is_empty() {
                writeln!(
                    err,
                    "{}: no reference for: {}",
                    cand_path.display(),
                    missing_ref.join(", ")
                )?;
            }
            if !missing_cand.is_empty() {
                writeln!(
                    err,
                    "{}: no candidate for: {}",
                    cand_path.display(),
                    missing_cand.join(", ")
                )?;
            }
            if pairs.is_empty() {
                return Err(Failure::new(
                    EXIT_EMPTY,
                    format!("{}: no video ids match the references", cand_path.display()),
                )
                .into());
            }
            let report = corpus_eval(&pairs, args.bleu_mode)?;
            let [b1, b2, b3, b4] = report.bleu;
            rows.push(ScoreRow {
                model: model_name(cand_path),
                values: [b1, b2, b3, b4, report.meteor],
            });
        }
        rows
    };
    let rows = render::with_mean(&rows);
    match args.format {
        Format::Table => write!(out, "{}", render::table(&rows, args.decimals))?,
        Format::Csv => write!(out, "{}", render::csv(&rows))?,
    }
    if let Some(path) = &args.manifest {
        manifest.write(path)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["fitness_fixture", "captions", "synthetic_peak"]))]
pub struct TuneArgs {
    /// Tab-separated `threshold<TAB>bleu1` table.
    #[arg(long)]
    pub fitness_fixture: Option<PathBuf>,
    /// Dense captions scored live against `--references`.
    #[arg(long, requires = "references")]
    pub captions: Option<PathBuf>,
    #[arg(long, requires = "captions")]
    pub references: Option<PathBuf>,
    /// Analytic fitness 100 - 500 (t - peak)^2.
    #[arg(long)]
    pub synthetic_peak: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub generations: usize,
    #[arg(long, default_value_t = 8)]
    pub population: usize,
    #[arg(long, default_value_t = 2)]
    pub elite: usize,
    #[arg(long, default_value_t = 47)]
    pub seed: u64,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn tune_config(args: &TuneArgs) -> GaConfig {
    GaConfig {
        generations: args.generations,
        population_size: args.population,
        elite_count: args.elite,
        rng_seed: args.seed,
        ..GaConfig::default()
    }
}

pub fn cmd_tune(args: &TuneArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let config = tune_config(args);
    let mut manifest = RunManifest::new("tune")
        .param("generations", config.generations)
        .param("population", config.population_size)
        .param("elite", config.elite_count)
        .param("mutation_magnitudes", &config.mutation_magnitudes)
        .seed("ga", config.rng_seed);

    let source: Box<dyn FitnessSource> = if let Some(path) = &args.fitness_fixture {
        manifest = manifest.input(path)?;
        Box::new(TableFitness::load(path)?)
    } else if let Some(peak) = args.synthetic_peak {
        manifest = manifest.param("synthetic_peak", peak);
        Box::new(SyntheticFitness::with_peak(peak))
    } else {
        let captions = args.captions.as_ref().expect("clap enforces a source");
        let references = args.references.as_ref().expect("clap requires references");
        manifest = manifest.input(captions)?.input(references)?;
        Box::new(PipelineFitness::new(
            corpus::load_captions(captions)?,
            load_texts(references)?.into_iter().collect(),
        )?)
    };

    let outcome = run_search(&config, source.as_ref())?;
    write_tune_report(&outcome, out)?;
    if outcome.is_flat() {
        writeln!(
            err,
            "warning: flat landscape, every evaluation returned {}",
            outcome.best_fitness
        )?;
    }
    if let Some(path) = &args.manifest {
        manifest.write(path)?;
    }
    Ok(())
}

fn write_tune_report(outcome: &SearchOutcome, out: &mut dyn Write) -> Result<()> {
    for g in &outcome.history {
        writeln!(
            out,
            "generation {}  best {:.4}  mean {:.4}  threshold {:.4}",
            g.generation, g.best, g.mean, g.best_threshold
        )?;
    }
    writeln!(
        out,
        "best threshold {} fitness {}",
        outcome.best_threshold, outcome.best_fitness
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `label,text` csv with labels 0 and 1.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 47)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 2)]
    pub epochs: usize,
    #[arg(long, default_value_t = 50)]
    pub steps_per_epoch: usize,
    #[arg(long, default_value_t = 0.0)]
    pub init_scale: f64,
    /// Fraction kept for training per label; 1 trains and reports on everything.
    #[arg(long, default_value_t = 0.7)]
    pub train_ratio: f64,
    /// One stop word per line; defaults to the built-in list.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

fn load_stopwords(path: Option<&Path>) -> Result<StopWords> {
    Ok(match path {
        Some(p) => StopWords::load(p)?,
        None => StopWords::default(),
    })
}

pub fn cmd_train_classifier(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let stopwords = load_stopwords(args.stopwords.as_deref())?;
    let data: Vec<LabeledSummary> = corpus::load_labeled(&args.data)?
        .into_iter()
        .map(|s| {
            LabeledSummary::new(
                normalize_text(&s.text, NormalizeRules::default(), &stopwords),
                s.label,
            )
        })
        .collect();
    if data.is_empty() {
        return Err(Failure::new(EXIT_EMPTY, format!("{}: no training rows", args.data.display())).into());
    }
    let (train, test) = if args.train_ratio == 1.0 {
        (data, Vec::new())
    } else {
        let split = stratified_split(&data, args.train_ratio, args.seed)?;
        (split.train, split.test)
    };
    let hyper = Hyperparams {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        steps_per_epoch: args.steps_per_epoch,
        init_scale: args.init_scale,
        seed: args.seed,
    };
    let model = classifier::train(&train, hyper)?;
    let train_eval = classifier::evaluate(&model, &train)?;

    model.save(&args.out)?;
    let mut loss = String::from("step\tloss\n");
    for (step, l) in model.loss_history.iter().enumerate() {
        loss.push_str(&format!("{step}\t{l}\n"));
    }
    let mut loss_path = args.out.as_os_str().to_owned();
    loss_path.push(".loss.tsv");
    std::fs::write(&loss_path, loss)
        .with_context(|| format!("writing {}", PathBuf::from(&loss_path).display()))?;
    let mut manifest = RunManifest::new("train-classifier")
        .param("hyperparams", hyper)
        .param("train_ratio", args.train_ratio)
        .param("out", args.out.display().to_string())
        .seed("split_and_init", args.seed)
        .input(&args.data)?;
    if let Some(p) = &args.stopwords {
        manifest = manifest.input(p)?;
    }
    manifest.write(&sibling_path(&args.out))?;

    writeln!(
        out,
        "vocabulary {}  final loss {}",
        model.vocab.len(),
        model.loss_history.last().copied().unwrap_or(f64::NAN)
    )?;
    writeln!(out, "train accuracy {} ({} samples)", train_eval.accuracy, train.len())?;
    if !test.is_empty() {
        let e = classifier::evaluate(&model, &test)?;
        writeln!(out, "test accuracy {} ({} samples)", e.accuracy, test.len())?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Caption `.json` or `video_id,class,summary` `.csv`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

pub fn cmd_classify(args: &ClassifyArgs, out: &mut dyn Write) -> Result<()> {
    let model = LinearModel::load(&args.model)?;
    let stopwords = load_stopwords(args.stopwords.as_deref())?;
    let texts = load_texts(&args.input)?;
    let mut report = String::from("video_id,label,probability\n");
    for (id, text) in texts {
        let (label, p) = model.predict(&normalize_text(&text, NormalizeRules::default(), &stopwords));
        report.push_str(&format!("{id},{},{p}\n", label.as_u8()));
    }
    out.write_all(report.as_bytes())?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// `video_id,class,start,end,score` csv.
    #[arg(long)]
    pub detections: PathBuf,
    /// `video_id,class,start,end` csv.
    #[arg(long)]
    pub groundtruth: PathBuf,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub iou_thresholds: Vec<f64>,
    /// One weight per threshold; uniform when omitted.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub weights: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long, default_value_t = 4)]
    pub decimals: usize,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn read_file(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path).map_err(|e| denseval::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?)
}

pub fn cmd_map(args: &MapArgs, out: &mut dyn Write) -> Result<()> {
    let dets = detection::parse_detections(&read_file(&args.detections)?, &args.detections)?;
    let gts =
        detection::parse_ground_truth_instances(&read_file(&args.groundtruth)?, &args.groundtruth)?;
    if gts.is_empty() {
        return Err(Failure::new(
            EXIT_EMPTY,
            format!("{}: no ground-truth instances", args.groundtruth.display()),
        )
        .into());
    }
    let weights = args
        .weights
        .clone()
        .unwrap_or_else(|| vec![1.0; args.iou_thresholds.len()]);
    let report = map_report_weighted(&dets, &gts, &args.iou_thresholds, &weights)?;

    let mut header = vec!["class".to_string()];
    header.extend(args.iou_thresholds.iter().map(|t| format!("AP@{t}")));
    header.push("AP".into());
    let fmt = |v: f64| match args.format {
        Format::Table => format!("{v:.prec$}", prec = args.decimals),
        Format::Csv => v.to_string(),
    };
    let mut rows: Vec<Vec<String>> = report
        .classes
        .iter()
        .map(|c| {
            let mut row = vec![c.class_label.clone()];
            row.extend(c.per_threshold.iter().map(|&v| fmt(v)));
            row.push(fmt(c.ap));
            row
        })
        .collect();
    let mut last = vec!["mAP".to_string()];
    last.extend(std::iter::repeat_n(String::new(), args.iou_thresholds.len()));
    last.push(fmt(report.map));
    match args.format {
        Format::Table => {
            rows.push(last);
            write!(out, "{}", render::grid(&header, &rows))?;
        }
        Format::Csv => {
            rows.push(last);
            for line in std::iter::once(&header).chain(&rows) {
                writeln!(out, "{}", line.join(","))?;
            }
        }
    }
    if let Some(path) = &args.manifest {
        RunManifest::new("map")
            .param("iou_thresholds", &args.iou_thresholds)
            .param("weights", &weights)
            .input(&args.detections)?
            .input(&args.groundtruth)?
            .write(path)?;
    }
    Ok(())
}
