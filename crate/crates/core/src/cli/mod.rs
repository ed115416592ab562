//! Command-line driver.
//!
//! Every command resolves its flags, the optional config file and the
//! built-in defaults (in that order of precedence) into an [`Invocation`],
//! executes it into an output directory and records a [`Manifest`] there.
//! `replay` re-executes a manifest and checks that every artifact comes out
//! byte-identical.

pub mod config;
pub mod dataset;
pub mod manifest;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::{fingerprint, normalize, Condition, NormStats, SignalWindow};
use crate::error::{Error, Result};
use crate::eval::{
    compare_methods, evaluate, health_chart_svg, metric_rows, metrics_chart_svg, metrics_csv, noise_sweep, sweep_chart_svg,
    sweep_csv, CompareConfig, LatentScorer, MetricRow, SweepRow,
};
use crate::health::{health_csv, score_run_to_failure, Aggregation, HealthModel, LatentEmbedding, Metric, ScoreOptions};
use crate::vae::{train, VaeArch, VaeParams};

pub use config::{Config, DATA_ENV};
pub use dataset::{build_dataset, Dataset, Source};
pub use manifest::{FileHash, Invocation, Manifest, MANIFEST_FILE};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HEALTH_FILE: &str = "health_model.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const SPLIT_FILE: &str = "split.json";
pub const HISTORY_FILE: &str = "history.csv";

/// Files scored per batch when walking a whole run.
const SCORE_CHUNK: usize = 32;

#[derive(Debug, Parser)]
#[command(name = "latent-health", version, about = "Latent-distance health monitoring for vibration data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and fit health-index thresholds.
    Train(TrainArgs),
    /// Health index of every file (or window) of a run.
    Score(ScoreArgs),
    /// Classification metrics on the held-out split, one row set per distance.
    Evaluate(EvaluateArgs),
    /// Classification metrics under additive white Gaussian noise.
    Sweep(SweepArgs),
    /// Train and evaluate the model and the three baselines on one split.
    Compare(CompareArgs),
    /// Write a synthetic run-to-failure dataset as ASCII recordings.
    Synth(SynthArgs),
    /// Re-execute a manifest and check that all artifacts are identical.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SourceArgs {
    /// Directory of ASCII recordings [default: $LATENT_HEALTH_DATA].
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Use the built-in synthetic run instead of recordings on disk.
    #[arg(long)]
    pub synthetic: bool,
    /// Columns per recording.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Column to analyse.
    #[arg(long)]
    pub channel: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainingArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// euclidean, manhattan or minkowski3.
    #[arg(long)]
    pub metric: Option<Metric>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub metric: Option<Metric>,
    /// One row per window instead of per file.
    #[arg(long)]
    pub per_window: bool,
    /// Per-file aggregation: mean or median.
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
    /// [default: RUN/score]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Comma-separated distances [default: all three].
    #[arg(long, value_delimiter = ',')]
    pub metric: Vec<Metric>,
    /// [default: RUN/evaluate]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Comma-separated SNR levels in dB [default: -2,1,4,7,10].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr: Vec<f64>,
    #[arg(long)]
    pub metric: Option<Metric>,
    /// [default: RUN/sweep]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub kmeans_k: Option<usize>,
    #[arg(long, default_value = "compare")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub files: usize,
    #[arg(long, default_value_t = 20)]
    pub windows_per_file: usize,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// manifest.json of the run to reproduce.
    pub manifest: PathBuf,
    /// [default: next to the manifest, in `replay/`]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 for argument or configuration errors, 3 for data errors and 4 for
/// model errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let recorded: Vec<String> = argv.iter().skip(1).map(|s| s.to_string_lossy().into_owned()).collect();
    match run(cli.command, recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(command: Command, argv: Vec<String>) -> Result<()> {
    if let Command::Replay(args) = command {
        return replay(&args, argv);
    }
    let (invocation, out) = resolve(command, std::env::var_os(DATA_ENV).map(PathBuf::from))?;
    execute(&invocation, &out, argv)?;
    Ok(())
}

fn apply_source(config: &mut Config, source: &SourceArgs, env_dir: Option<PathBuf>) -> Result<()> {
    if let Some(dir) = &source.data {
        config.data.dir = Some(dir.clone());
        config.data.synthetic = false;
    }
    if source.synthetic {
        config.data.synthetic = true;
    }
    if let Some(c) = source.channels {
        config.data.channels = c;
    }
    if let Some(c) = source.channel {
        config.labels.channel = c;
    }
    config.resolve_source(env_dir)
}

fn training_config(args: &TrainingArgs, env_dir: Option<PathBuf>) -> Result<Config> {
    let mut c = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(v) = args.seed {
        c.train.seed = v;
    }
    if let Some(v) = args.epochs {
        c.train.epochs = v as usize;
    }
    if let Some(v) = args.learning_rate {
        c.train.learning_rate = v;
    }
    if let Some(v) = args.beta {
        c.train.beta = v;
    }
    if let Some(v) = args.batch_size {
        c.train.batch_size = v;
    }
    if let Some(v) = args.train_fraction {
        c.data.train_fraction = v;
    }
    if let Some(v) = args.metric {
        c.health.metric = v;
    }
    apply_source(&mut c, &args.source, env_dir)?;
    c.validate()?;
    Ok(c)
}

/// Config of an existing run with data-source overrides applied.
fn run_config(run: &Path, source: &SourceArgs, env_dir: Option<PathBuf>) -> Result<Config> {
    let mut c = Config::load(&run.join(CONFIG_FILE))?;
    if source.data.is_some() || source.synthetic || source.channels.is_some() || source.channel.is_some() {
        apply_source(&mut c, source, env_dir)?;
    }
    c.validate()?;
    Ok(c)
}

/// Turns parsed arguments into an invocation and its output directory.
pub fn resolve(command: Command, env_dir: Option<PathBuf>) -> Result<(Invocation, PathBuf)> {
    Ok(match command {
        Command::Train(a) => (
            Invocation::Train {
                config: training_config(&a.training, env_dir)?,
            },
            a.out,
        ),
        Command::Score(a) => {
            let mut config = run_config(&a.run, &a.source, env_dir)?;
            if let Some(m) = a.metric {
                config.health.metric = m;
            }
            if let Some(g) = a.aggregation {
                config.health.aggregation = g;
            }
            let out = a.out.unwrap_or_else(|| a.run.join("score"));
            (
                Invocation::Score {
                    run: a.run,
                    config,
                    per_window: a.per_window,
                },
                out,
            )
        }
        Command::Evaluate(a) => {
            let config = run_config(&a.run, &a.source, env_dir)?;
            let metrics = if a.metric.is_empty() {
                Metric::ALL.to_vec()
            } else {
                a.metric
            };
            let out = a.out.unwrap_or_else(|| a.run.join("evaluate"));
            (
                Invocation::Evaluate {
                    run: a.run,
                    config,
                    metrics,
                },
                out,
            )
        }
        Command::Sweep(a) => {
            let mut config = run_config(&a.run, &a.source, env_dir)?;
            if !a.snr.is_empty() {
                config.sweep.snr_db = a.snr;
            }
            if let Some(m) = a.metric {
                config.health.metric = m;
            }
            config.validate()?;
            let out = a.out.unwrap_or_else(|| a.run.join("sweep"));
            (Invocation::Sweep { run: a.run, config }, out)
        }
        Command::Compare(a) => {
            let mut config = training_config(&a.training, env_dir)?;
            if let Some(k) = a.knn_k {
                config.baselines.knn_k = k;
            }
            if let Some(k) = a.kmeans_k {
                config.baselines.kmeans_k = k;
            }
            config.validate()?;
            (Invocation::Compare { config }, a.out)
        }
        Command::Synth(a) => {
            let run = crate::data::synth::SyntheticRun {
                files: a.files,
                windows_per_file: a.windows_per_file,
                seed: a.seed,
            };
            run.validate()?;
            (Invocation::Synth { run }, a.out)
        }
        Command::Replay(_) => return Err(Error::InvalidConfig("replay cannot be nested".into())),
    })
}

/// Reference points and thresholds of a trained model for each distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthModels {
    pub default_metric: Metric,
    pub models: Vec<HealthModel>,
}

impl HealthModels {
    /// Fits every distance. Only a failure for `default_metric` is fatal;
    /// the others are skipped with a warning.
    pub fn fit<E: LatentEmbedding + ?Sized>(model: &E, train: &[SignalWindow], default_metric: Metric) -> Result<Self> {
        let mut models = Vec::new();
        for metric in Metric::ALL {
            match HealthModel::fit(model, train, metric) {
                Ok(h) => models.push(h),
                Err(e) if metric == default_metric => return Err(e),
                Err(e) => eprintln!("warning: no {metric} thresholds: {e}"),
            }
        }
        Ok(Self {
            default_metric,
            models,
        })
    }

    pub fn get(&self, metric: Metric) -> Result<&HealthModel> {
        self.models
            .iter()
            .find(|m| m.metric() == metric)
            .ok_or_else(|| Error::InvalidConfig(format!("run has no {metric} thresholds")))
    }
}

/// Split identity recorded at training time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub training_files: Vec<usize>,
    pub severe_files: Vec<usize>,
}

impl SplitInfo {
    pub fn of(ds: &Dataset) -> Self {
        Self {
            train_fingerprint: fingerprint(&[&ds.train]),
            test_fingerprint: fingerprint(&[&ds.test]),
            training_files: ds.training_files.clone(),
            severe_files: ds.severe_files.clone(),
        }
    }

    pub fn check(&self, ds: &Dataset) -> Result<()> {
        let now = Self::of(ds);
        for (expected, actual) in [
            (&self.train_fingerprint, now.train_fingerprint),
            (&self.test_fingerprint, now.test_fingerprint),
        ] {
            if *expected != actual {
                return Err(Error::FingerprintMismatch {
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }
}

/// Everything `train` leaves in a run directory.
pub struct TrainedRun {
    pub checkpoint: Checkpoint,
    pub health: HealthModels,
    pub split: SplitInfo,
}

impl TrainedRun {
    pub fn load(dir: &Path, inputs: &mut Vec<FileHash>) -> Result<Self> {
        let read = |name: &str, inputs: &mut Vec<FileHash>| -> Result<Vec<u8>> {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            inputs.push(FileHash {
                sha256: manifest::sha256_hex(&bytes),
                path,
            });
            Ok(bytes)
        };
        let checkpoint = Checkpoint::from_bytes(&read(CHECKPOINT_FILE, inputs)?, &VaeArch::default())?;
        let health = serde_json::from_slice(&read(HEALTH_FILE, inputs)?)?;
        let split = serde_json::from_slice(&read(SPLIT_FILE, inputs)?)?;
        read(CONFIG_FILE, inputs)?;
        Ok(Self {
            checkpoint,
            health,
            split,
        })
    }

    pub fn params(&self) -> &VaeParams {
        &self.checkpoint.params
    }

    pub fn norm(&self) -> &NormStats {
        &self.checkpoint.norm
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn write(&mut self, name: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> Result<()> {
        let rel = name.as_ref().to_path_buf();
        let path = self.dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push(rel);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }
}

fn record_source_inputs(source: &Source, files: &[usize], inputs: &mut Vec<FileHash>) -> Result<()> {
    for &i in files {
        if let Some(p) = source.path(i) {
            inputs.push(FileHash::of(p)?);
        }
    }
    Ok(())
}

/// Runs an invocation, writing its artifacts and manifest under `out`.
pub fn execute(invocation: &Invocation, out: &Path, argv: Vec<String>) -> Result<Manifest> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut outputs = Outputs {
        dir: out,
        written: Vec::new(),
    };
    let mut inputs = Vec::new();
    match invocation {
        Invocation::Train { config } => cmd_train(config, &mut outputs, &mut inputs)?,
        Invocation::Score {
            run,
            config,
            per_window,
        } => cmd_score(run, config, *per_window, &mut outputs, &mut inputs)?,
        Invocation::Evaluate { run, config, metrics } => cmd_evaluate(run, config, metrics, &mut outputs, &mut inputs)?,
        Invocation::Sweep { run, config } => cmd_sweep(run, config, &mut outputs, &mut inputs)?,
        Invocation::Compare { config } => cmd_compare(config, &mut outputs, &mut inputs)?,
        Invocation::Synth { run } => cmd_synth(run, &mut outputs)?,
    }
    let artifacts = outputs
        .written
        .iter()
        .map(|rel| {
            Ok(FileHash {
                path: rel.clone(),
                sha256: manifest::sha256_file(&out.join(rel))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv,
        invocation: invocation.clone(),
        inputs,
        artifacts,
    };
    manifest.save(out)?;
    Ok(manifest)
}

fn cmd_train(config: &Config, out: &mut Outputs, inputs: &mut Vec<FileHash>) -> Result<()> {
    let source = Source::from_config(config)?;
    let ds = build_dataset(&source, config)?;
    record_source_inputs(&source, &ds.files_used(), inputs)?;
    let norm = NormStats::fit(&ds.train)?;
    let ntrain = normalize(&ds.train, &norm);
    let (params, history) = train(&ntrain, &config.train)?;
    let health = HealthModels::fit(&params, &ntrain, config.health.metric)?;
    let checkpoint = Checkpoint {
        params,
        config: config.train,
        norm,
    };
    out.write(CHECKPOINT_FILE, checkpoint.to_bytes()?)?;
    out.json(HEALTH_FILE, &health)?;
    out.json(SPLIT_FILE, &SplitInfo::of(&ds))?;
    out.write(HISTORY_FILE, history.to_csv())?;
    out.write(CONFIG_FILE, config.to_toml()?)?;

    if let Some(last) = history.last() {
        println!(
            "trained {} epochs on {} windows: loss {:.6} (recon {:.6}, kl {:.6})",
            history.epochs.len(),
            ds.train.len(),
            last.total,
            last.recon,
            last.kl
        );
    }
    let t = &health.get(config.health.metric)?.thresholds;
    println!(
        "thresholds ({}): t_normal {:.6}, t_degraded {:.6}",
        t.metric, t.t_normal, t.t_degraded
    );
    println!("run written to {}", out.dir.display());
    Ok(())
}

fn cmd_score(
    run_dir: &Path,
    config: &Config,
    per_window: bool,
    out: &mut Outputs,
    inputs: &mut Vec<FileHash>,
) -> Result<()> {
    let run = TrainedRun::load(run_dir, inputs)?;
    let health = run.health.get(config.health.metric)?;
    let source = Source::from_config(config)?;
    let options = ScoreOptions {
        channel: config.labels.channel,
        window: config.data.window,
        aggregation: config.health.aggregation,
        per_window,
    };
    let mut records = Vec::new();
    let all: Vec<usize> = (0..source.len()).collect();
    for chunk in all.chunks(SCORE_CHUNK) {
        let files: Vec<_> = chunk.iter().map(|&i| source.load(i)).collect();
        let scored = score_run_to_failure(run.params(), health, &files, run.norm(), Some(&config.labels), &options);
        for (i, reason) in &scored.gaps {
            eprintln!("warning: file {i} skipped: {reason}");
        }
        records.extend(scored.records);
        record_source_inputs(&source, chunk, inputs)?;
    }
    if records.is_empty() {
        return Err(Error::Data("no file could be scored".into()));
    }
    out.write("health.csv", health_csv(&records))?;
    out.write("health.svg", health_chart_svg(&records, Some(&health.thresholds))?)?;
    let severe = records.iter().filter(|r| r.predicted == Condition::Severe).count();
    println!(
        "scored {} {} with {}: {severe} predicted severe",
        records.len(),
        if per_window { "windows" } else { "files" },
        health.metric()
    );
    Ok(())
}

/// Rebuilds the run's split and insists it is the one trained on.
fn held_out(run: &TrainedRun, config: &Config, inputs: &mut Vec<FileHash>) -> Result<Dataset> {
    let source = Source::from_config(config)?;
    let ds = build_dataset(&source, config)?;
    run.split.check(&ds)?;
    record_source_inputs(&source, &ds.files_used(), inputs)?;
    Ok(ds)
}

fn print_rows(rows: &[MetricRow]) {
    for r in rows {
        if ["accuracy", "precision", "recall", "f1", "unseen_class_accuracy"].contains(&r.metric_name.as_str()) {
            println!("{:<12} {:<22} {:.4}", r.method, r.metric_name, r.value);
        }
    }
}

fn cmd_evaluate(
    run_dir: &Path,
    config: &Config,
    metrics: &[Metric],
    out: &mut Outputs,
    inputs: &mut Vec<FileHash>,
) -> Result<()> {
    let run = TrainedRun::load(run_dir, inputs)?;
    let ds = held_out(&run, config, inputs)?;
    let mut rows = Vec::new();
    for &metric in metrics {
        let scorer = LatentScorer {
            model: run.params(),
            health: run.health.get(metric)?,
        };
        rows.extend(metric_rows(metric.as_str(), &evaluate(&scorer, &ds.test, run.norm())?));
    }
    out.write("evaluate.csv", metrics_csv(&rows))?;
    out.write("evaluate.svg", metrics_chart_svg("Distance metrics", &rows)?)?;
    print_rows(&rows);
    Ok(())
}

fn cmd_sweep(run_dir: &Path, config: &Config, out: &mut Outputs, inputs: &mut Vec<FileHash>) -> Result<()> {
    let run = TrainedRun::load(run_dir, inputs)?;
    let ds = held_out(&run, config, inputs)?;
    let scorer = LatentScorer {
        model: run.params(),
        health: run.health.get(config.health.metric)?,
    };
    let entries = noise_sweep(&scorer, &ds.test, run.norm(), &config.sweep.snr_db, config.train.seed)?;
    let rows: Vec<SweepRow> = entries.iter().map(SweepRow::from).collect();
    out.write("sweep.csv", sweep_csv(&rows))?;
    out.write("sweep.svg", sweep_chart_svg(&rows)?)?;
    for r in &rows {
        println!("snr {:>6} dB  accuracy {:.4}  f1 {:.4}", r.snr_db, r.accuracy, r.f1);
    }
    Ok(())
}

fn cmd_compare(config: &Config, out: &mut Outputs, inputs: &mut Vec<FileHash>) -> Result<()> {
    let source = Source::from_config(config)?;
    let ds = build_dataset(&source, config)?;
    record_source_inputs(&source, &ds.files_used(), inputs)?;
    let cc = CompareConfig {
        train: config.train,
        arch: VaeArch::default(),
        metric: config.health.metric,
        knn_k: config.baselines.knn_k,
        kmeans_k: config.baselines.kmeans_k,
        kmeans_max_iters: config.baselines.kmeans_max_iters,
    };
    let results = compare_methods(&ds.train, &ds.test, &cc)?;
    let mut rows = Vec::new();
    for r in &results {
        rows.extend(metric_rows(r.method.as_str(), &r.report));
        out.write(format!("predictions_{}.csv", r.method), health_csv(&r.records))?;
    }
    out.write("compare.csv", metrics_csv(&rows))?;
    out.write("compare.svg", metrics_chart_svg("Method comparison", &rows)?)?;
    print_rows(&rows);
    if let Some(first) = results.first() {
        println!("split fingerprint {}", first.split_fingerprint);
    }
    Ok(())
}

fn cmd_synth(run: &crate::data::synth::SyntheticRun, out: &mut Outputs) -> Result<()> {
    for i in 0..run.files {
        out.write(format!("files/{i:04}.txt"), run.recording(i)?.to_ascii())?;
    }
    let mut config = Config::default();
    config.data.channels = 1;
    config.data.synthetic_files = run.files;
    config.data.synthetic_windows_per_file = run.windows_per_file;
    config.labels = run.label_plan()?;
    config.train.seed = run.seed;
    out.write(CONFIG_FILE, config.to_toml()?)?;
    println!(
        "wrote {} files; train with: train --data {} --config {}",
        run.files,
        out.dir.join("files").display(),
        out.dir.join(CONFIG_FILE).display()
    );
    Ok(())
}

fn replay(args: &ReplayArgs, argv: Vec<String>) -> Result<()> {
    let recorded = Manifest::load(&args.manifest)?;
    recorded.verify_inputs()?;
    let out = match &args.out {
        Some(o) => o.clone(),
        None => args
            .manifest
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("replay"),
    };
    execute(&recorded.invocation, &out, argv)?;
    recorded.verify_artifacts(&out)?;
    println!(
        "replayed {}: {} artifacts identical in {}",
        recorded.invocation.name(),
        recorded.artifacts.len(),
        out.display()
    );
    Ok(())
}
