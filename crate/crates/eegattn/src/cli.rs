//! Subcommands of the `eegattn` binary.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use eegattn_core::attnscore::{self, AttentionScoreSeq, Pooling, ScalarConfig};
use eegattn_core::corpus::{self, FrequencyBand, Sentence, SyntheticSpec, Task};
use eegattn_core::reduction::{self, LabelKind, ReductionConfig, PAPER_K};
use eegattn_core::seqlabel::{self, LabeledSentence, SeqModelConfig};
use eegattn_core::taskclf::{self, InputLayout, TaskClfConfig};
use eegattn_core::tasksets::{self, BinaryTaskSpec, SyntheticTaskSpec};
use eegattn_core::{stats, Error as CoreError};
use serde::Serialize;

use crate::corpus_io;
use crate::error::Error;
use crate::formats::{self, EvalRow, TaskClfRow};
use crate::manifest::ManifestBuilder;
use crate::{checkpoint, config};

/// A problem with the invocation rather than the data; exits with code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const GAMMA_WARNING: &str = "warning: gamma-band power mainly relates to emotionality rather than reading \
     effort, so it is excluded from the default embedding bands";

#[derive(Debug, Parser)]
#[command(name = "eegattn", version, about = "EEG-derived attention supervision pipeline")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic EEG corpus.
    GenCorpus(GenCorpusArgs),
    /// Select electrodes per band with random forests and emit word embeddings.
    Reduce(ReduceArgs),
    /// Per-electrode bootstrap t-tests of AR against NR.
    Stats(StatsArgs),
    /// Train the reading-task LSTM classifier on word embeddings.
    Taskclf(TaskclfArgs),
    /// Compute token-level attention supervision scores.
    Scores(ScoresArgs),
    /// Generate a synthetic keyword task or adapt an annotated corpus.
    GenTask(GenTaskArgs),
    /// Train the attention-supervised sentence classifier.
    Train(TrainArgs),
    /// Evaluate trained models on a labeled test set.
    Eval(EvalArgs),
    /// Aggregate evaluation results into mean/std tables.
    Report(ReportArgs),
}

fn parse_band(s: &str) -> Result<FrequencyBand, String> {
    FrequencyBand::parse(&s.to_lowercase())
        .ok_or_else(|| format!("unknown band {s:?} (expected theta, alpha, beta or gamma)"))
}

fn parse_shift(s: &str) -> Result<(FrequencyBand, f64), String> {
    let (b, v) = s.split_once('=').ok_or_else(|| format!("expected band=value, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if !v.is_finite() {
        return Err(format!("{s:?}: shift must be finite"));
    }
    Ok((parse_band(b)?, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelArg {
    Task,
    Session,
}

impl From<LabelArg> for LabelKind {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Task => LabelKind::Task,
            LabelArg::Session => LabelKind::Session,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenCorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub nr: usize,
    #[arg(long, default_value_t = 407)]
    pub ar: usize,
    #[arg(long, default_value_t = 5)]
    pub min_tokens: usize,
    #[arg(long, default_value_t = 20)]
    pub max_tokens: usize,
    #[arg(long, default_value_t = 12)]
    pub participants: usize,
    /// Electrode indices that carry the planted AR shift.
    #[arg(long, value_delimiter = ',', default_value = "10,11,12")]
    pub informative: Vec<usize>,
    /// AR-only power shift per band, e.g. `theta=1.0`.
    #[arg(long, value_delimiter = ',', value_parser = parse_shift, default_value = "theta=1.0")]
    #[serde(skip)]
    pub shift: Vec<(FrequencyBand, f64)>,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 500)]
    pub vocab: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ReduceArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Embeddings JSONL.
    #[arg(long)]
    pub out: PathBuf,
    /// Selection report JSON [default: <out>.selection.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_band, default_value = "theta,alpha,beta")]
    #[serde(skip)]
    pub bands: Vec<FrequencyBand>,
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,
    #[arg(long, value_enum, default_value_t = LabelArg::Task)]
    pub label: LabelArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Allow the gamma band.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// TSV, one row per band and electrode.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_band, default_value = "theta,alpha,beta,gamma")]
    #[serde(skip)]
    pub bands: Vec<FrequencyBand>,
    #[arg(long, default_value_t = stats::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = stats::DEFAULT_N_BOOT)]
    pub n_boot: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TaskclfArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Selection report holding the train/dev/test sentence split.
    #[arg(long)]
    pub report: PathBuf,
    /// Results CSV; per-seed training logs go to `<out>.seed<N>.log.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = LabelArg::Task)]
    pub label: LabelArg,
    /// `concat` or a single band name.
    #[arg(long, default_value = "concat")]
    pub layout: String,
    #[arg(long)]
    pub average_participants: bool,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreSource {
    Eeg,
    Freq,
    Fixation,
    Oracle,
    AntiOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskFilter {
    Both,
    Nr,
    Ar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingArg {
    Max,
    Mean,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoresArgs {
    #[arg(long, value_enum)]
    pub source: ScoreSource,
    #[arg(long)]
    pub out: PathBuf,
    /// EEG corpus; supplies the sentences when `--sentences` is absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Labeled sentence JSONL to score.
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_parser = parse_band, default_value = "theta")]
    #[serde(skip)]
    pub band: FrequencyBand,
    #[arg(long, value_enum, default_value_t = TaskFilter::Both)]
    pub task: TaskFilter,
    #[arg(long, value_enum, default_value_t = PoolingArg::Max)]
    pub pooling: PoolingArg,
    /// Token counts TSV for `freq`; counted from `--freq-from` or the scored
    /// sentences when absent.
    #[arg(long)]
    pub freq_table: Option<PathBuf>,
    #[arg(long)]
    pub freq_from: Option<PathBuf>,
    /// Also write the frequency table used.
    #[arg(long)]
    pub write_freq: Option<PathBuf>,
    #[arg(long)]
    pub fixations: Option<PathBuf>,
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long, default_value_t = attnscore::DEFAULT_E)]
    pub e: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GenTaskArgs {
    /// Output directory: train/dev/test JSONL, keywords and a summary.
    #[arg(long)]
    pub out: PathBuf,
    /// Adapt an annotated JSONL corpus instead of generating one.
    #[arg(long)]
    pub from: Option<PathBuf>,
    /// Labeling rule for `--from`: semeval, wikipedia or ontonotes.
    #[arg(long)]
    pub preset: Option<String>,
    /// Sentence ids to drop when adapting.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub vocab: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 500)]
    pub n_dev: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    /// Extra sentence pool written to aux.jsonl.
    #[arg(long, default_value_t = 0)]
    pub n_aux: usize,
    #[arg(long, default_value_t = 0.2)]
    pub positive_rate: f64,
    #[arg(long, default_value_t = 20)]
    pub keywords: usize,
    #[arg(long, default_value_t = 100)]
    pub keyword_min_rank: usize,
    #[arg(long, default_value_t = 5)]
    pub min_len: usize,
    #[arg(long, default_value_t = 15)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// `none` or a score JSONL.
    #[arg(long, default_value = "none")]
    pub aux: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub seeds: Vec<u64>,
    /// Output directory, one `seed-<N>` checkpoint per seed.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    #[arg(long, default_value_t = 50)]
    pub attn_hidden: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1)]
    pub aux_ratio: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Output directory of `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Name of the supervision source, written to every row.
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Evaluation CSVs from `eval`.
    #[arg(long, value_delimiter = ',')]
    pub eval: Vec<PathBuf>,
    /// Result CSVs from `taskclf`.
    #[arg(long, value_delimiter = ',')]
    pub taskclf: Vec<PathBuf>,
    /// Output directory for table1.csv / table2.csv.
    #[arg(long)]
    pub out: PathBuf,
}

/// Flattens parsed arguments into text for the manifest.
fn resolved<T: Serialize>(args: &T, extra: &[(&str, String)]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            let text = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Null => continue,
                other => other.to_string(),
            };
            out.insert(k.replace('_', "-"), text);
        }
    }
    for (k, v) in extra {
        out.insert((*k).to_string(), v.clone());
    }
    out
}

fn bands_text(bands: &[FrequencyBand]) -> String {
    bands.iter().map(|b| b.name()).collect::<Vec<_>>().join(",")
}

fn require(path: &Path, producer: &'static str) -> Result<(), Error> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer,
        })
    }
}

/// Parses the process arguments (after config expansion) and runs the
/// subcommand.
pub fn run(argv: Vec<String>) -> anyhow::Result<()> {
    let argv = config::expand(argv).map_err(|e| UsageError(e.to_string()))?;
    let cli = Cli::try_parse_from(argv)?;
    match cli.command {
        Command::GenCorpus(a) => gen_corpus(&a),
        Command::Reduce(a) => reduce(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Taskclf(a) => cmd_taskclf(&a),
        Command::Scores(a) => scores(&a),
        Command::GenTask(a) => gen_task(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Report(a) => report(&a),
    }
}

pub fn gen_corpus(a: &GenCorpusArgs) -> anyhow::Result<()> {
    let spec = SyntheticSpec {
        n_sentences_nr: a.nr,
        n_sentences_ar: a.ar,
        tokens_per_sentence: (a.min_tokens, a.max_tokens),
        n_participants: a.participants,
        informative_electrodes: a.informative.clone(),
        band_shift: a.shift.iter().copied().collect(),
        noise_sigma: a.sigma,
        vocab_size: a.vocab,
        seed: a.seed,
    };
    let shift_text = a.shift.iter().map(|(b, v)| format!("{}={v}", b.name())).collect::<Vec<_>>().join(",");
    let mut m = ManifestBuilder::new("gen-corpus", resolved(a, &[("shift", shift_text)]), vec![a.seed]);
    let corpus = corpus::generate_synthetic(&spec)?;
    corpus_io::save_corpus(&corpus, &a.out)?;
    m.output(&a.out)?;
    m.finish(&a.out)?;
    eprintln!(
        "wrote {} sentences, {} word records to {}",
        corpus.sentences().len(),
        corpus.records().len(),
        a.out.display()
    );
    Ok(())
}

pub fn reduce(a: &ReduceArgs) -> anyhow::Result<()> {
    if a.bands.contains(&FrequencyBand::Gamma) {
        eprintln!("{GAMMA_WARNING}");
        if !a.force {
            return Err(UsageError("refusing to embed the gamma band without --force".into()).into());
        }
    }
    if !PAPER_K.contains(&a.k) {
        eprintln!("warning: k = {} is outside the studied values {:?}; running anyway", a.k, PAPER_K);
    }
    require(&a.corpus, "gen-corpus")?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".selection.json");
        PathBuf::from(s)
    });
    let mut m = ManifestBuilder::new(
        "reduce",
        resolved(
            a,
            &[
                ("bands", bands_text(&a.bands)),
                ("report", report_path.display().to_string()),
            ],
        ),
        vec![a.seed],
    );
    m.input(&a.corpus)?;
    let corpus = corpus_io::load_corpus(&a.corpus)?;
    let config = ReductionConfig {
        k: a.k,
        bands: a.bands.clone(),
        n_trees: a.n_trees,
        label: a.label.into(),
        seed: a.seed,
    };
    let (report, embeddings) = reduction::reduce(&corpus, &config)?;
    for b in &report.bands {
        let labels: Vec<&str> = b
            .indices
            .iter()
            .map(|&j| corpus.electrode_labels()[j].as_str())
            .collect();
        println!(
            "{}\t{}{}",
            b.band.name(),
            labels.join(","),
            if b.low_signal { "\t(low signal)" } else { "" }
        );
    }
    formats::write_embeddings(&a.out, &embeddings)?;
    formats::write_report(&report_path, &report)?;
    m.output(&a.out)?;
    m.output(&report_path)?;
    m.finish(&a.out)?;
    Ok(())
}

pub fn cmd_stats(a: &StatsArgs) -> anyhow::Result<()> {
    require(&a.corpus, "gen-corpus")?;
    let mut m = ManifestBuilder::new("stats", resolved(a, &[("bands", bands_text(&a.bands))]), vec![a.seed]);
    m.input(&a.corpus)?;
    let corpus = corpus_io::load_corpus(&a.corpus)?;
    let mut results = Vec::new();
    for &band in &a.bands {
        let r = stats::electrode_map(&corpus, band, a.alpha, a.n_boot, a.seed)?;
        let flagged: Vec<usize> = r
            .iter()
            .filter(|x| x.direction != stats::Direction::None)
            .map(|x| x.electrode_index)
            .collect();
        println!("{}\t{} significant\t{:?}", band.name(), flagged.len(), flagged);
        results.extend(r);
    }
    formats::write_stats(&a.out, &results, corpus.electrode_labels())?;
    m.output(&a.out)?;
    m.finish(&a.out)?;
    Ok(())
}

fn parse_layout(s: &str) -> anyhow::Result<InputLayout> {
    if s == "concat" {
        return Ok(InputLayout::Concat);
    }
    parse_band(s)
        .map(InputLayout::Single)
        .map_err(|e| UsageError(format!("--layout: {e}")).into())
}

pub fn cmd_taskclf(a: &TaskclfArgs) -> anyhow::Result<()> {
    let layout = parse_layout(&a.layout)?;
    require(&a.corpus, "gen-corpus")?;
    require(&a.embeddings, "reduce")?;
    require(&a.report, "reduce")?;
    let mut m = ManifestBuilder::new("taskclf", resolved(a, &[]), a.seeds.clone());
    for p in [&a.corpus, &a.embeddings, &a.report] {
        m.input(p)?;
    }
    let corpus = corpus_io::load_corpus(&a.corpus)?;
    let embeddings = formats::read_embeddings(&a.embeddings)?;
    let report = formats::read_report(&a.report)?;
    let splits = report
        .splits
        .as_ref()
        .context("selection report has no train/dev/test split")?;
    let data = taskclf::assemble_dataset(
        &embeddings,
        corpus.sentences(),
        a.label.into(),
        layout,
        a.average_participants,
    )?;
    let part = |ids: &[String]| -> Vec<taskclf::EmbeddedSentence> {
        let ids: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        data.iter().filter(|s| ids.contains(s.sentence_id.as_str())).cloned().collect()
    };
    let (train_set, dev_set, test_set) = (part(&splits.train), part(&splits.dev), part(&splits.test));
    let label_name = match a.label {
        LabelArg::Task => "NR-AR",
        LabelArg::Session => "Ses1-Ses2",
    };
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for &seed in &a.seeds {
        let config = TaskClfConfig {
            hidden: a.hidden,
            dropout: a.dropout,
            lr: a.lr,
            batch: a.batch,
            epochs: a.epochs,
            label_kind: a.label.into(),
            seed,
        };
        let (clf, log) = taskclf::train(&config, &train_set, &dev_set)?;
        let test = taskclf::evaluate(&clf, &test_set)?;
        println!(
            "seed {seed}: dev {:.4} (epoch {}), test {:.4}",
            log.best_dev_acc, log.best_epoch, test.accuracy
        );
        rows.push(TaskClfRow {
            label: label_name.into(),
            layout: a.layout.clone(),
            input_dim: clf.input_dim,
            average_participants: a.average_participants,
            seed,
            best_epoch: log.best_epoch,
            dev_acc: log.best_dev_acc,
            test_acc: test.accuracy,
        });
        let mut p = a.out.as_os_str().to_owned();
        p.push(format!(".seed{seed}.log.csv"));
        let p = PathBuf::from(p);
        formats::write_taskclf_log(&p, &log)?;
        logs.push(p);
    }
    formats::write_taskclf_results(&a.out, &rows)?;
    m.output(&a.out)?;
    for p in &logs {
        m.output(p)?;
    }
    m.finish(&a.out)?;
    Ok(())
}

enum ScoreInput {
    Labeled(Vec<LabeledSentence>),
    Corpus(Vec<Sentence>),
}

fn score_sentences(a: &ScoresArgs, m: &mut ManifestBuilder) -> anyhow::Result<ScoreInput> {
    if let Some(p) = &a.sentences {
        require(p, "gen-task")?;
        m.input(p)?;
        return Ok(ScoreInput::Labeled(formats::read_labeled(p)?));
    }
    if let Some(p) = &a.corpus {
        require(p, "gen-corpus")?;
        m.input(p)?;
        return Ok(ScoreInput::Corpus(corpus_io::load_corpus(p)?.sentences().to_vec()));
    }
    Err(UsageError("--sentences or --corpus is required".into()).into())
}

pub fn scores(a: &ScoresArgs) -> anyhow::Result<()> {
    let mut m = ManifestBuilder::new("scores", resolved(a, &[("band", a.band.name().into())]), vec![]);
    let out: Vec<AttentionScoreSeq> = match a.source {
        ScoreSource::Eeg => {
            let (Some(cp), Some(ep)) = (&a.corpus, &a.embeddings) else {
                return Err(UsageError("--source eeg needs --corpus and --embeddings".into()).into());
            };
            require(cp, "gen-corpus")?;
            require(ep, "reduce")?;
            m.input(cp)?;
            m.input(ep)?;
            let corpus = corpus_io::load_corpus(cp)?;
            let embeddings = formats::read_embeddings(ep)?;
            let task = match a.task {
                TaskFilter::Both => None,
                TaskFilter::Nr => Some(Task::NR),
                TaskFilter::Ar => Some(Task::AR),
            };
            let config = ScalarConfig {
                e: a.e,
                pooling: match a.pooling {
                    PoolingArg::Max => Pooling::Max,
                    PoolingArg::Mean => Pooling::Mean,
                },
                ..ScalarConfig::default()
            };
            let sentences: Vec<Sentence> = corpus
                .sentences()
                .iter()
                .filter(|s| task.is_none_or(|t| s.task == t))
                .cloned()
                .collect();
            attnscore::eeg_scores(&sentences, &embeddings, a.band, task, &config)?
        }
        ScoreSource::Freq => {
            let input = score_sentences(a, &mut m)?;
            let table = if let Some(p) = &a.freq_table {
                require(p, "scores --write-freq")?;
                m.input(p)?;
                formats::read_frequencies(p)?
            } else if let Some(p) = &a.freq_from {
                require(p, "gen-task")?;
                m.input(p)?;
                attnscore::count_frequencies(&formats::read_labeled(p)?)
            } else {
                match &input {
                    ScoreInput::Labeled(s) => attnscore::count_frequencies(s),
                    ScoreInput::Corpus(s) => attnscore::count_frequencies(s),
                }
            };
            if let Some(p) = &a.write_freq {
                formats::write_frequencies(p, &table)?;
                m.output(p)?;
            }
            match &input {
                ScoreInput::Labeled(s) => attnscore::freq_inverse_scores(s, &table, a.e)?,
                ScoreInput::Corpus(s) => attnscore::freq_inverse_scores(s, &table, a.e)?,
            }
        }
        ScoreSource::Fixation => {
            let Some(fp) = &a.fixations else {
                return Err(UsageError("--source fixation needs --fixations".into()).into());
            };
            let input = score_sentences(a, &mut m)?;
            m.input(fp)?;
            let table = formats::read_fixations(fp)?;
            match &input {
                ScoreInput::Labeled(s) => attnscore::fixation_scores(s, &table, a.e)?,
                ScoreInput::Corpus(s) => attnscore::fixation_scores(s, &table, a.e)?,
            }
        }
        ScoreSource::Oracle | ScoreSource::AntiOracle => {
            let Some(kp) = &a.keywords else {
                return Err(UsageError("oracle sources need --keywords".into()).into());
            };
            require(kp, "gen-task")?;
            let input = score_sentences(a, &mut m)?;
            m.input(kp)?;
            let kw = formats::read_keywords(kp)?;
            let inverted = a.source == ScoreSource::AntiOracle;
            match (&input, inverted) {
                (ScoreInput::Labeled(s), false) => attnscore::oracle_scores(s, &kw, a.e)?,
                (ScoreInput::Labeled(s), true) => attnscore::anti_oracle_scores(s, &kw, a.e)?,
                (ScoreInput::Corpus(s), false) => attnscore::oracle_scores(s, &kw, a.e)?,
                (ScoreInput::Corpus(s), true) => attnscore::anti_oracle_scores(s, &kw, a.e)?,
            }
        }
    };
    formats::write_scores(&a.out, &out)?;
    m.output(&a.out)?;
    m.finish(&a.out)?;
    eprintln!("wrote scores for {} sentences to {}", out.len(), a.out.display());
    Ok(())
}

pub fn gen_task(a: &GenTaskArgs) -> anyhow::Result<()> {
    let mut m = ManifestBuilder::new("gen-task", resolved(a, &[]), vec![a.seed]);
    let (splits, name, keywords, aux) = if let Some(src) = &a.from {
        let preset = a
            .preset
            .as_deref()
            .ok_or_else(|| UsageError("--from needs --preset".into()))?;
        let spec = BinaryTaskSpec::preset(preset)
            .ok_or_else(|| UsageError(format!("unknown preset {preset:?} (semeval, wikipedia, ontonotes)")))?;
        m.input(src)?;
        let exclude = match &a.exclude {
            Some(p) => {
                m.input(p)?;
                formats::read_id_list(p)?
            }
            None => BTreeSet::new(),
        };
        let splits = tasksets::adapt_generic(&formats::read_annotated(src)?, &spec, &exclude)?;
        (splits, spec.name, None, Vec::new())
    } else {
        let spec = SyntheticTaskSpec {
            vocab_size: a.vocab,
            n_train: a.n_train,
            n_dev: a.n_dev,
            n_test: a.n_test,
            n_aux: a.n_aux,
            positive_rate: a.positive_rate,
            n_keywords: a.keywords,
            keyword_min_rank: a.keyword_min_rank,
            length: (a.min_len, a.max_len),
            label_noise: a.label_noise,
            seed: a.seed,
        };
        let task = tasksets::generate_task(&spec)?;
        (task.splits, "synthetic".to_string(), Some(task.keywords), task.aux)
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for (file, part) in [
        ("train.jsonl", &splits.train),
        ("dev.jsonl", &splits.dev),
        ("test.jsonl", &splits.test),
    ] {
        formats::write_labeled(&a.out.join(file), part)?;
    }
    if !aux.is_empty() {
        formats::write_labeled(&a.out.join("aux.jsonl"), &aux)?;
    }
    if let Some(kw) = &keywords {
        formats::write_keywords(&a.out.join("keywords.txt"), kw)?;
    }
    let summary = tasksets::summarize(&name, &splits);
    formats::write_summary(&a.out.join("summary.tsv"), std::slice::from_ref(&summary))?;
    println!(
        "{}: train {} ({:.1}% positive), dev {}, test {}",
        summary.name, summary.n_train, summary.pct_positive_train, summary.n_dev, summary.n_test
    );
    m.output(&a.out)?;
    m.finish(&a.out)?;
    Ok(())
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    require(&a.train, "gen-task")?;
    require(&a.dev, "gen-task")?;
    let mut m = ManifestBuilder::new("train", resolved(a, &[]), a.seeds.clone());
    m.input(&a.train)?;
    m.input(&a.dev)?;
    let main_train = formats::read_labeled(&a.train)?;
    let main_dev = formats::read_labeled(&a.dev)?;
    let aux = if a.aux == "none" {
        Vec::new()
    } else {
        let p = Path::new(&a.aux);
        require(p, "scores")?;
        m.input(p)?;
        formats::read_scores(p)?
    };
    let aux_ratio = if aux.is_empty() { 0 } else { a.aux_ratio };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for &seed in &a.seeds {
        let config = SeqModelConfig {
            embed_dim: a.embed_dim,
            hidden: a.hidden,
            attn_hidden: a.attn_hidden,
            dropout: a.dropout,
            lr: a.lr,
            batch: a.batch,
            epochs: a.epochs,
            aux_ratio,
            e: attnscore::DEFAULT_E,
            seed,
        };
        let (model, log) = seqlabel::train_multitask(&config, &main_train, &main_dev, &aux)?;
        let main_batches = main_train.len().div_ceil(a.batch) as u64;
        let step: u64 = log
            .epochs
            .iter()
            .take(log.best_epoch)
            .map(|e| main_batches + e.aux_steps as u64)
            .sum();
        let dir = a.out.join(format!("seed-{seed}"));
        checkpoint::save(&dir, &model, step)?;
        formats::write_train_log(&dir.join("log.csv"), &log)?;
        println!("seed {seed}: best dev F1 {:.4} at epoch {}", log.best_dev_f1, log.best_epoch);
    }
    m.output(&a.out)?;
    m.finish(&a.out)?;
    Ok(())
}

/// Checkpoint directories `seed-<N>` below `dir`, ordered by seed.
fn seed_dirs(dir: &Path) -> Result<Vec<(u64, PathBuf)>, Error> {
    require(dir, "train")?;
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let seed = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("seed-"))
            .and_then(|n| n.parse::<u64>().ok());
        if let (Some(seed), true) = (seed, path.is_dir()) {
            out.push((seed, path));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::MissingArtifact {
            path: dir.join("seed-<N>"),
            producer: "train",
        });
    }
    Ok(out)
}

pub fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    if a.source.contains(',') {
        return Err(UsageError("--source must not contain commas".into()).into());
    }
    require(&a.test, "gen-task")?;
    let mut m = ManifestBuilder::new("eval", resolved(a, &[]), vec![]);
    m.input(&a.test)?;
    let test = formats::read_labeled(&a.test)?;
    let mut rows = Vec::new();
    for (seed, dir) in seed_dirs(&a.model)? {
        m.input(&dir)?;
        let (model, _) = checkpoint::load(&dir)?;
        let prf = seqlabel::evaluate(&model, &test, a.threshold)?;
        println!(
            "{} seed {seed}: P {:.4} R {:.4} F1 {:.4}",
            a.source, prf.precision, prf.recall, prf.f1
        );
        rows.push(EvalRow {
            source: a.source.clone(),
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            seed,
        });
    }
    formats::write_eval(&a.out, &rows)?;
    m.output(&a.out)?;
    m.finish(&a.out)?;
    Ok(())
}

pub fn report(a: &ReportArgs) -> anyhow::Result<()> {
    if a.eval.is_empty() && a.taskclf.is_empty() {
        return Err(UsageError("report needs --eval and/or --taskclf inputs".into()).into());
    }
    let mut m = ManifestBuilder::new("report", resolved(a, &[]), vec![]);
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    if !a.eval.is_empty() {
        let mut rows = Vec::new();
        for p in &a.eval {
            require(p, "eval")?;
            m.input(p)?;
            rows.extend(formats::read_eval(p)?);
        }
        let table = formats::table2(&rows);
        print!("{table}");
        crate::jsonl::write_text(&a.out.join("table2.csv"), &table)?;
    }
    if !a.taskclf.is_empty() {
        let mut rows = Vec::new();
        for p in &a.taskclf {
            require(p, "taskclf")?;
            m.input(p)?;
            rows.extend(formats::read_taskclf_results(p)?);
        }
        let table = formats::table1(&rows);
        print!("{table}");
        crate::jsonl::write_text(&a.out.join("table1.csv"), &table)?;
    }
    m.output(&a.out)?;
    m.finish(&a.out)?;
    Ok(())
}

/// Exit code for an error returned by [`run`]: 2 for usage problems, 1 for
/// everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if let Some(e) = err.downcast_ref::<clap::Error>() {
        return e.exit_code();
    }
    if let Some(CoreError::InvalidParameter(_)) = err.downcast_ref::<CoreError>() {
        return 2;
    }
    1
}
