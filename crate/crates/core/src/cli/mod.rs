//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage or input errors, 2 when `bench`
//! misses its latency bound.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{ConfigFile, KNOWN_KEYS};

use crate::chroma::PitchClass;
use crate::dataset::{build_dataset, collect_midi_files, load_dataset, save_dataset, BuildConfig, DEFAULT_OVERLAP_THRESHOLD};
use crate::harmonizer::{generate, measure_latency, GenerationConfig, DEFAULT_VOICING_THRESHOLD, MIN_LATENCY_TRIALS};
use crate::key::{load_key_model, save_key_model, split_holdout, train_key_model, KeyExample, KeyTrainConfig};
use crate::lstm::{load_checkpoint, save_checkpoint, train, LstmModel, ModelConfig};
use crate::midi::{parse_midi, write_midi};
use crate::synth::synthetic_key_examples;

/// Mean per-prediction latency `bench` must stay under.
pub const LATENCY_BOUND_MS: f64 = 80.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("mean latency {mean_ms:.3} ms is not below {LATENCY_BOUND_MS} ms")]
    BoundMissed { mean_ms: f64, report: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Failed(_) => 1,
            CliError::BoundMissed { .. } => 2,
        }
    }
}

fn failed(context: &str) -> impl Fn(String) -> CliError + '_ {
    move |e| CliError::Failed(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "chromachord", version, about = "Chord accompaniment from melodies via chroma-histogram prediction")]
pub struct Cli {
    /// Flat key=value file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a MIDI corpus into a chord training dataset.
    BuildDataset(BuildDatasetArgs),
    /// Train the key classifier.
    TrainKey(TrainKeyArgs),
    /// Train the chord model.
    Train(TrainArgs),
    /// Harmonize a melody file.
    Generate(GenerateArgs),
    /// Measure per-prediction latency.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Directory searched recursively for .mid/.midi files.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output dataset file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Key model used for files without usable key metadata.
    #[arg(long)]
    pub key_model: Option<PathBuf>,
    /// Maximum overlap proportion for a melody candidate track.
    #[arg(long)]
    pub overlap_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainKeyArgs {
    /// Generate a labelled diatonic corpus instead of reading MIDI files.
    #[arg(long)]
    pub synthetic: bool,
    /// Synthetic examples per key.
    #[arg(long)]
    pub per_key: Option<usize>,
    /// Labelled MIDI corpus (key-signature metadata).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output key model file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fraction of examples held out for evaluation.
    #[arg(long)]
    pub held_out_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file from build-dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<u32>,
    /// Output checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss log, one `epoch,mean_msle` line per epoch [default: checkpoint path with .log].
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub num_layers: Option<usize>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Melody MIDI file.
    #[arg(long)]
    pub melody: Option<PathBuf>,
    /// Key of the melody: 0-11 or a note name such as G or Eb.
    #[arg(long)]
    pub tonic: Option<String>,
    /// Model checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output MIDI file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Minimum histogram value for a pitch class to be voiced.
    #[arg(long)]
    pub voicing_threshold: Option<f64>,
    /// Overlap threshold for picking the melody in multi-track input.
    #[arg(long)]
    pub overlap_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model checkpoint [default: a freshly initialized default model].
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Timed predictions (at least 30).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses `args` (including the program name) and runs the command,
/// writing reports to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let _ = write!(out, "{report}");
            0
        }
        Err(e) => {
            if let CliError::BoundMissed { report, .. } = &e {
                let _ = write!(out, "{report}");
            }
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command and returns its report text.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::BuildDataset(a) => cmd_build_dataset(a, &config),
        Command::TrainKey(a) => cmd_train_key(a, &config),
        Command::Train(a) => cmd_train(a, &config),
        Command::Generate(a) => cmd_generate(a, &config),
        Command::Bench(a) => cmd_bench(a, &config),
    }
}

fn threshold(value: f64, name: &str) -> Result<f64, CliError> {
    if value > 0.0 && value < 1.0 || (name == "overlap threshold" && value == 0.0) {
        Ok(value)
    } else {
        Err(CliError::Usage(format!("{name} must lie in (0, 1), got {value}")))
    }
}

fn existing(path: PathBuf, what: &str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

pub fn parse_tonic(raw: &str) -> Result<PitchClass, CliError> {
    let parsed = match raw.trim().parse::<u8>() {
        Ok(n) => PitchClass::new(n),
        Err(_) => PitchClass::from_name(raw),
    };
    parsed.ok_or_else(|| CliError::Usage(format!("invalid tonic {raw:?}: expected 0-11 or a note name C..B with optional # or b")))
}

fn cmd_build_dataset(a: &BuildDatasetArgs, cfg: &ConfigFile) -> Result<String, CliError> {
    let corpus = existing(cfg.require_path(a.corpus.clone(), "corpus_dir", "corpus")?, "corpus directory")?;
    let out = cfg.require_path(a.out.clone(), "dataset_path", "out")?;
    let overlap_threshold = threshold(cfg.resolve(a.overlap_threshold, "overlap_threshold", DEFAULT_OVERLAP_THRESHOLD)?, "overlap threshold")?;
    let key_model = match a.key_model.clone().map(Some).unwrap_or(cfg.get("key_model_path")?) {
        Some(path) => Some(load_key_model(&existing(path, "key model")?).map_err(|e| failed("key model")(e.to_string()))?),
        None => None,
    };
    let (dataset, stats) =
        build_dataset(&corpus, key_model.as_ref(), &BuildConfig { overlap_threshold }).map_err(|e| CliError::Failed(e.to_string()))?;
    save_dataset(&dataset, &out).map_err(|e| failed("writing dataset")(e.to_string()))?;
    Ok(format!("{stats}\nwrote={}\n", out.display()))
}

fn corpus_key_examples(dir: &Path) -> Result<Vec<KeyExample>, CliError> {
    let files = collect_midi_files(dir).map_err(|e| CliError::Failed(e.to_string()))?;
    let mut examples = Vec::new();
    for path in files {
        let bytes = fs::read(&path).map_err(|e| failed("reading corpus")(e.to_string()))?;
        if let Some(example) = parse_midi(&bytes).ok().as_ref().and_then(KeyExample::from_song) {
            examples.push(example);
        }
    }
    Ok(examples)
}

fn cmd_train_key(a: &TrainKeyArgs, cfg: &ConfigFile) -> Result<String, CliError> {
    let out = cfg.require_path(a.out.clone(), "key_model_path", "out")?;
    let seed = cfg.resolve(a.seed, "seed", 0)?;
    let held_out_fraction = cfg.resolve(a.held_out_fraction, "held_out_fraction", 0.2)?;
    if !(0.0..1.0).contains(&held_out_fraction) {
        return Err(CliError::Usage(format!("held-out fraction must lie in [0, 1), got {held_out_fraction}")));
    }
    let examples = if a.synthetic {
        let per_key = cfg.resolve(a.per_key, "per_key", 100)?;
        if per_key == 0 {
            return Err(CliError::Usage("--per-key must be at least 1".into()));
        }
        synthetic_key_examples(per_key, seed)
    } else {
        let dir = existing(cfg.require_path(a.corpus.clone(), "corpus_dir", "corpus")?, "corpus directory")?;
        corpus_key_examples(&dir)?
    };
    let (train_set, held_out) = split_holdout(&examples, held_out_fraction, seed);
    let model = train_key_model(&train_set, &KeyTrainConfig { seed, ..Default::default() }).map_err(|e| failed("training key model")(e.to_string()))?;
    save_key_model(&model, &out).map_err(|e| failed("writing key model")(e.to_string()))?;
    let mut report = String::new();
    let _ = writeln!(report, "examples={}", examples.len());
    let _ = writeln!(report, "train_accuracy={:.6}", model.accuracy(&train_set));
    if !held_out.is_empty() {
        let _ = writeln!(report, "held_out_accuracy={:.6}", model.accuracy(&held_out));
    }
    let _ = writeln!(report, "wrote={}", out.display());
    Ok(report)
}

fn cmd_train(a: &TrainArgs, cfg: &ConfigFile) -> Result<String, CliError> {
    let dataset_path = existing(cfg.require_path(a.dataset.clone(), "dataset_path", "dataset")?, "dataset")?;
    let out = cfg.require_path(a.out.clone(), "model_path", "out")?;
    let log = match a.log.clone().map(Some).unwrap_or(cfg.get("log_path")?) {
        Some(p) => p,
        None => out.with_extension("log"),
    };
    let d = ModelConfig::default();
    let model_config = ModelConfig {
        seq_len: cfg.resolve(a.seq_len, "seq_len", d.seq_len)?,
        hidden_dim: cfg.resolve(a.hidden_dim, "hidden_dim", d.hidden_dim)?,
        num_layers: cfg.resolve(a.num_layers, "num_layers", d.num_layers)?,
        dropout_rate: cfg.resolve(a.dropout_rate, "dropout_rate", d.dropout_rate)?,
        learning_rate: cfg.resolve(a.learning_rate, "learning_rate", d.learning_rate)?,
        batch_size: cfg.resolve(a.batch_size, "batch_size", d.batch_size)?,
        seed: cfg.resolve(a.seed, "seed", d.seed)?,
        ..d
    };
    model_config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let epochs = cfg.resolve(a.epochs, "epochs", 10)?;
    let dataset = load_dataset(&dataset_path).map_err(|e| failed("reading dataset")(e.to_string()))?;
    let (model, history) = train(&dataset, &model_config, epochs).map_err(|e| failed("training")(e.to_string()))?;
    save_checkpoint(&model, &out).map_err(|e| failed("writing checkpoint")(e.to_string()))?;
    let mut text = String::new();
    for (epoch, loss) in history.iter().enumerate() {
        let _ = writeln!(text, "{},{loss}", epoch + 1);
    }
    crate::write_atomic(&log, text.as_bytes()).map_err(|e| failed("writing loss log")(e.to_string()))?;
    let mut report = format!("examples={}\nparameters={}\nepochs={epochs}\n", dataset.len(), model.parameter_count());
    if let Some(last) = history.last() {
        let _ = writeln!(report, "final_mean_msle={last}");
    }
    let _ = writeln!(report, "wrote={}\nlog={}", out.display(), log.display());
    Ok(report)
}

fn cmd_generate(a: &GenerateArgs, cfg: &ConfigFile) -> Result<String, CliError> {
    let tonic = parse_tonic(a.tonic.as_deref().ok_or_else(|| CliError::Usage("missing --tonic".into()))?)?;
    let melody_path = existing(a.melody.clone().ok_or_else(|| CliError::Usage("missing --melody".into()))?, "melody file")?;
    let model_path = existing(cfg.require_path(a.model.clone(), "model_path", "model")?, "model checkpoint")?;
    let out = cfg.require_path(a.out.clone(), "output_path", "out")?;
    let gen = GenerationConfig {
        tonic,
        voicing_threshold: threshold(cfg.resolve(a.voicing_threshold, "voicing_threshold", DEFAULT_VOICING_THRESHOLD)?, "voicing threshold")?,
        overlap_threshold: threshold(cfg.resolve(a.overlap_threshold, "overlap_threshold", DEFAULT_OVERLAP_THRESHOLD)?, "overlap threshold")?,
    };
    let model = load_checkpoint(&model_path).map_err(|e| failed("loading model")(e.to_string()))?;
    let bytes = fs::read(&melody_path).map_err(|e| failed("reading melody")(e.to_string()))?;
    let song = parse_midi(&bytes).map_err(|e| failed("parsing melody")(e.to_string()))?;
    let result = generate(&song, &gen, &model).map_err(|e| CliError::Failed(e.to_string()))?;
    let encoded = write_midi(&result.song).map_err(|e| failed("encoding output")(e.to_string()))?;
    crate::write_atomic(&out, &encoded).map_err(|e| failed("writing output")(e.to_string()))?;
    let voiced = result.chords.iter().flatten().count();
    let mean = if result.latencies_ms.is_empty() { 0.0 } else { result.latencies_ms.iter().sum::<f64>() / result.latencies_ms.len() as f64 };
    Ok(format!(
        "melody_notes={}\nchords={voiced}\nsilent={}\nmean_prediction_ms={mean:.6}\nwrote={}\n",
        result.chords.len(),
        result.chords.len() - voiced,
        out.display()
    ))
}

fn cmd_bench(a: &BenchArgs, cfg: &ConfigFile) -> Result<String, CliError> {
    let trials = cfg.resolve(a.trials, "trials", 200)?;
    if trials < MIN_LATENCY_TRIALS {
        return Err(CliError::Usage(format!("--trials must be at least {MIN_LATENCY_TRIALS}, got {trials}")));
    }
    let seed = cfg.resolve(a.seed, "seed", 0)?;
    let model = match a.model.clone().map(Some).unwrap_or(cfg.get("model_path")?) {
        Some(path) => load_checkpoint(&existing(path, "model checkpoint")?).map_err(|e| failed("loading model")(e.to_string()))?,
        None => LstmModel::new(ModelConfig { seed, ..Default::default() }).map_err(|e| CliError::Failed(e.to_string()))?,
    };
    let report = measure_latency(&model, trials, seed).map_err(|e| CliError::Failed(e.to_string()))?;
    let pass = report.mean_ms < LATENCY_BOUND_MS;
    let text = format!("{report}\nbound_ms={LATENCY_BOUND_MS}\npass={pass}\n");
    if !pass {
        return Err(CliError::BoundMissed { mean_ms: report.mean_ms, report: text });
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("chromachord").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn tonic_names_and_numbers() {
        assert_eq!(parse_tonic("G").unwrap().value(), 7);
        assert_eq!(parse_tonic("eb").unwrap().value(), 3);
        assert_eq!(parse_tonic("C#").unwrap().value(), 1);
        assert_eq!(parse_tonic("11").unwrap().value(), 11);
        assert!(parse_tonic("H").is_err());
        assert!(parse_tonic("12").is_err());
    }

    #[test]
    fn help_exits_zero_for_every_command() {
        for cmd in ["build-dataset", "train-key", "train", "generate", "bench"] {
            let (code, out, _) = run_args(&[cmd, "--help"]);
            assert_eq!(code, 0, "{cmd}");
            assert!(out.contains("--config"), "{cmd}");
        }
        assert_eq!(run_args(&["--help"]).0, 0);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&[]).0, 1);
        assert_eq!(run_args(&["frobnicate"]).0, 1);
        assert_eq!(run_args(&["bench", "--trials", "10"]).0, 1);
        let (code, _, err) = run_args(&["build-dataset", "--corpus", "/no/such/dir", "--out", "x.chrd"]);
        assert_eq!(code, 1);
        assert!(err.contains("/no/such/dir"));
    }

    #[test]
    fn bench_reports_machine_readable_lines() {
        let (code, out, _) = run_args(&["bench", "--trials", "30"]);
        assert_eq!(code, 0);
        for key in ["mean_ms=", "p95_ms=", "max_ms="] {
            assert!(out.lines().any(|l| l.starts_with(key)), "{out}");
        }
    }
}
