//! Command-line surface: `synth`, `label`, `featurize`, `train`, `evaluate`,
//! `sweep` and `stats`.
//!
//! Every subcommand accepts `--config FILE`, a flat text file of
//! `key = value` lines where each key is a long flag name without the
//! leading dashes (`horizon-s = 1,2,3`). Blank lines and lines starting with
//! `#` are ignored. Flags given on the command line win over the file.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on runtime
//! failures.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use thiserror::Error;

use crate::artifact::Artifact;
use crate::bilstm::{Pooling, TrainConfig};
use crate::features::{fit_neighbor_stats, FeatureParams, NeighborStats};
use crate::gbdt::GbdtConfig;
use crate::imbalance::ResampleConfig;
use crate::ingest::{load_recording, synthesize_corpus, write_recording, DatasetKind, SynthConfig};
use crate::labeling::{
    consistency_filter, detect_events, label_windows, read_events, write_events, LabelError, LabelingParams,
    WindowSpec,
};
use crate::metrics::MetricsReport;
use crate::pipeline::{
    build_datasets, evaluate, results_csv, results_text, sweep, train_models, ExperimentConfig, HybridModel,
    LabeledRecording, ModelKind, PipelineConfig, SearchSpace, SplitSpec,
};
use crate::stats::emit_distribution_stats;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (artifact format 1)");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "lane-intent", version = VERSION, about = "Lane-change intention prediction toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus of recordings with ground-truth events.
    Synth(SynthArgs),
    /// Detect lane changes and emit labeled windows.
    Label(LabelArgs),
    /// Compute the physics feature matrix of every labeled window.
    Featurize(FeaturizeArgs),
    /// Train one model on a corpus and write its artifact.
    Train(TrainArgs),
    /// Score a model artifact on a corpus.
    Evaluate(EvaluateArgs),
    /// Train and score every (model, history, horizon) cell on a location split.
    Sweep(SweepArgs),
    /// Distance and speed-difference distributions around lane changes.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Flat `key = value` file of default flag values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub locations: usize,
    #[arg(long, default_value_t = 200)]
    pub tracks_per_location: usize,
    #[arg(long, default_value_t = 3)]
    pub lane_count: usize,
    #[arg(long, default_value_t = 0.1)]
    pub maneuver_rate: f64,
    /// No-LC, Left-LC and Right-LC window ratio.
    #[arg(long, value_delimiter = ',', default_values_t = [27.0, 1.0, 1.0])]
    pub class_skew: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub ramp_fraction: f64,
    #[arg(long, default_value_t = 0.03)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cue_lead_s: f64,
    #[arg(long, default_value_t = 0.0)]
    pub confuser_rate: f64,
    #[arg(long, default_value_t = 25.0)]
    pub sampling_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory of `<stem>_tracks.csv` + `<stem>_recordingMeta.csv` pairs.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Directory of `<stem>_events.csv` files; events are detected when absent.
    #[arg(long, value_name = "DIR")]
    pub events: Option<PathBuf>,
    #[arg(long, default_value = "straight", value_parser = parse_kind)]
    pub dataset_kind: DatasetKind,
    /// Restrict to these location ids.
    #[arg(long, value_delimiter = ',')]
    pub locations: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long, default_value_t = 1.0)]
    pub history_s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon_s: f64,
    /// Anchor spacing in frames.
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub crossing_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    pub drift_duration: f64,
    #[arg(long, default_value_t = 1.0)]
    pub settle_duration: f64,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Neighbor statistics to use instead of fitting them on `--data`.
    #[arg(long, value_name = "FILE")]
    pub neighbor_stats: Option<PathBuf>,
    /// Also write the neighbor statistics used.
    #[arg(long, value_name = "FILE")]
    pub stats_out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 50)]
    pub rounds: usize,
    #[arg(long, default_value_t = 31)]
    pub max_leaves: usize,
    #[arg(long, default_value_t = 8)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 255)]
    pub max_bins: usize,
    #[arg(long, default_value_t = 20)]
    pub min_samples_leaf: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub encoder_lr: f64,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Majority-class windows per epoch, as a multiple of the largest minority
    /// class; 0 disables the cap.
    #[arg(long, default_value_t = 3.0)]
    pub majority_cap: f64,
    #[arg(long, default_value = "mean", value_parser = parse_pooling)]
    pub pooling: Pooling,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Keep every n-th history frame as encoder input.
    #[arg(long, default_value_t = 5)]
    pub sequence_step: usize,
    /// SMOTE + Tomek resampling and class weights.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub imbalance: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            gbdt: GbdtConfig {
                n_rounds: self.rounds,
                max_leaves: self.max_leaves,
                max_depth: self.max_depth,
                max_bins: self.max_bins,
                min_samples_leaf: self.min_samples_leaf,
                learning_rate: self.learning_rate,
                lambda: self.lambda,
                seed: self.seed,
                ..GbdtConfig::default()
            },
            encoder: TrainConfig {
                hidden: self.hidden,
                epochs: self.epochs,
                batch_size: self.batch_size,
                learning_rate: self.encoder_lr,
                patience: self.patience,
                majority_cap: (self.majority_cap > 0.0).then_some(self.majority_cap),
                pooling: self.pooling,
                seed: self.seed,
                ..TrainConfig::default()
            },
            imbalance: self.imbalance,
            resample: ResampleConfig {
                seed: self.seed,
                ..ResampleConfig::default()
            },
            cv_folds: self.folds,
            sequence_step: self.sequence_step,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "model-kind", default_value = "hybrid", value_parser = parse_model)]
    pub kind: ModelKind,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub data: DataArgs,
    /// Model artifact written by `train` or `sweep`.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Also write the report here.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Corpus directory; the bundled tiny synthetic corpus is used when absent.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub events: Option<PathBuf>,
    #[arg(long, default_value = "straight", value_parser = parse_kind)]
    pub dataset_kind: DatasetKind,
    #[arg(long, value_delimiter = ',')]
    pub train_locations: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub test_locations: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    pub history_s: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0])]
    pub horizon_s: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_model, default_value = "gbdt_only,bilstm_only,hybrid")]
    pub models: Vec<ModelKind>,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Tree-ensemble configurations tried per cell; 1 trains the flags as given.
    #[arg(long, default_value_t = 1)]
    pub search_budget: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn parse_kind(s: &str) -> Result<DatasetKind, String> {
    DatasetKind::parse(s).ok_or_else(|| format!("unknown dataset kind `{s}` (straight, ramp)"))
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| format!("unknown model `{s}` (gbdt_only, bilstm_only, hybrid)"))
}

fn parse_pooling(s: &str) -> Result<Pooling, String> {
    Pooling::parse(s).ok_or_else(|| format!("unknown pooling `{s}` (mean, max, last)"))
}

/// The corpus behind `sweep` when no `--data` is given: four small
/// locations, three for training and one held out.
pub fn tiny_corpus() -> Result<Vec<LabeledRecording>, crate::ingest::IngestError> {
    let cfg = SynthConfig {
        n_locations: 4,
        tracks_per_location: 80,
        maneuver_rate: 0.2,
        class_skew: [30.0, 1.0, 1.0],
        cue_lead_s: 2.0,
        seed: 11,
        ..SynthConfig::default()
    };
    synthesize_corpus(&cfg)
}

/// Parse `key = value` lines into `--key value` pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("config line {}: expected `key = value`", n + 1)))?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() || k == "config" {
            return Err(invalid(format!("config line {}: bad key `{k}`", n + 1)));
        }
        out.push((k.to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

/// Splice the `--config` file's entries in after the subcommand, dropping
/// keys that the command line sets itself.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path: Option<(usize, usize, String)> = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            let p = strs.get(i + 1).ok_or_else(|| invalid("--config needs a file"))?;
            path = Some((i, 2, p.clone()));
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some((i, 1, p.to_owned()));
        }
    }
    let Some((at, len, path)) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| invalid(format!("{path}: {e}")))?;
    let entries = parse_config_text(&text)?;
    let mut rest: Vec<OsString> = args;
    rest.drain(at..at + len);
    let given: Vec<String> = strs
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_owned())
        .collect();
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(rest.len());
    let mut extra = Vec::new();
    for (k, v) in entries {
        if !given.contains(&k) {
            extra.push(OsString::from(format!("--{k}")));
            extra.push(OsString::from(v));
        }
    }
    rest.splice(sub..sub, extra);
    Ok(rest)
}

/// Parse `args` (program name first), run the subcommand and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if args.len() <= 1 {
        let mut cmd = <Cli as clap::CommandFactory>::command();
        eprintln!("{}", cmd.render_usage());
        eprintln!("Run `lane-intent --help` for the list of subcommands.");
        return 1;
    }
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Synth(a) => cmd_synth(&a),
        Command::Label(a) => cmd_label(&a),
        Command::Featurize(a) => cmd_featurize(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Stats(a) => cmd_stats(&a),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    if a.class_skew.len() != 3 {
        return Err(invalid("--class-skew takes three comma-separated ratios"));
    }
    let cfg = SynthConfig {
        n_locations: a.locations,
        tracks_per_location: a.tracks_per_location,
        lane_count: a.lane_count,
        maneuver_rate: a.maneuver_rate,
        class_skew: [a.class_skew[0], a.class_skew[1], a.class_skew[2]],
        ramp_fraction: a.ramp_fraction,
        noise_std: a.noise_std,
        cue_lead_s: a.cue_lead_s,
        confuser_rate: a.confuser_rate,
        sampling_rate: a.sampling_rate,
        seed: a.seed,
        ..SynthConfig::default()
    };
    cfg.validate().map_err(invalid)?;
    let corpus = synthesize_corpus(&cfg).map_err(runtime)?;
    create_dir(&a.out)?;
    for (rec, events) in &corpus {
        let stem = format!("rec_{:02}", rec.recording_id);
        let tracks = a.out.join(format!("{stem}_tracks.csv"));
        write_recording(rec, &tracks).map_err(|e| io_err(&tracks, e))?;
        let truth = a.out.join(format!("{stem}_truth.csv"));
        write_events(events, create_file(&truth)?).map_err(|e| io_err(&truth, e))?;
    }
    println!("wrote {} recordings to {}", corpus.len(), a.out.display());
    Ok(())
}

/// `(stem, tracks path)` of every recording in `dir`, sorted by name.
fn recording_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if let Some(stem) = name.strip_suffix("_tracks.csv") {
            out.push((stem.to_owned(), path));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(invalid(format!("{}: no *_tracks.csv files", dir.display())));
    }
    Ok(out)
}

fn detect_all(rec: &crate::ingest::Recording, params: &LabelingParams) -> Result<Vec<crate::labeling::LaneChangeEvent>, LabelError> {
    let mut events = Vec::new();
    for t in &rec.tracks {
        events.extend(detect_events(t, params, rec.dataset_kind, rec.sampling_rate)?);
    }
    Ok(events)
}

/// Recordings of `dir` with their events, filtered to `locations` when nonempty.
fn load_corpus(
    dir: &Path,
    events_dir: Option<&Path>,
    kind: DatasetKind,
    locations: &[u32],
) -> Result<Vec<LabeledRecording>, CliError> {
    let mut corpus = Vec::new();
    for (stem, path) in recording_files(dir)? {
        let rec = load_recording(&path, kind).map_err(|e| io_err(&path, e))?;
        if !locations.is_empty() && !locations.contains(&rec.location_id) {
            continue;
        }
        let events = match events_dir {
            Some(ed) => {
                let p = ed.join(format!("{stem}_events.csv"));
                read_events(File::open(&p).map_err(|e| io_err(&p, e))?).map_err(|e| io_err(&p, e))?
            }
            None => detect_all(&rec, &LabelingParams::default()).map_err(|e| io_err(&path, e))?,
        };
        corpus.push((rec, events));
    }
    if corpus.is_empty() {
        return Err(invalid("no recordings match the requested locations"));
    }
    Ok(corpus)
}

fn load_data(d: &DataArgs) -> Result<Vec<LabeledRecording>, CliError> {
    load_corpus(&d.data, d.events.as_deref(), d.dataset_kind, &d.locations)
}

fn cmd_label(a: &LabelArgs) -> Result<(), CliError> {
    let params = LabelingParams {
        crossing_threshold: a.crossing_threshold,
        drift_duration: a.drift_duration,
        settle_duration: a.settle_duration,
        ..LabelingParams::default()
    };
    params.validate().map_err(invalid)?;
    let spec = WindowSpec {
        history_s: a.window.history_s,
        horizon_s: a.window.horizon_s,
        stride: a.window.stride,
    };
    if !(spec.history_s > 0.0 && spec.horizon_s > 0.0 && spec.stride > 0) {
        return Err(invalid("history, horizon and stride must be positive"));
    }
    create_dir(&a.out)?;
    let (mut n_events, mut n_windows) = (0, 0);
    for (stem, path) in recording_files(&a.data.data)? {
        let rec = load_recording(&path, a.data.dataset_kind).map_err(|e| io_err(&path, e))?;
        if !a.data.locations.is_empty() && !a.data.locations.contains(&rec.location_id) {
            continue;
        }
        let events = detect_all(&rec, &params).map_err(|e| io_err(&path, e))?;
        let ep = a.out.join(format!("{stem}_events.csv"));
        write_events(&events, create_file(&ep)?).map_err(|e| io_err(&ep, e))?;

        let wp = a.out.join(format!("{stem}_windows.csv"));
        let mut w = csv::Writer::from_writer(create_file(&wp)?);
        let csv_err = |e: csv::Error| io_err(&wp, e);
        w.write_record(["recording_id", "track_id", "anchor_frame", "history_s", "horizon_s", "label"])
            .map_err(csv_err)?;
        for t in &rec.tracks {
            let te: Vec<_> = events.iter().filter(|e| e.track_id == t.track_id).copied().collect();
            let windows = match label_windows(t, &te, &spec, rec.sampling_rate) {
                Ok(w) => w,
                Err(LabelError::TrackTooShort { .. }) => continue,
                Err(e) => return Err(io_err(&path, e)),
            };
            for win in consistency_filter(windows, &te, rec.sampling_rate) {
                w.write_record([
                    rec.recording_id.to_string(),
                    win.track_id.to_string(),
                    win.anchor_frame.to_string(),
                    spec.history_s.to_string(),
                    spec.horizon_s.to_string(),
                    win.label.index().to_string(),
                ])
                .map_err(csv_err)?;
                n_windows += 1;
            }
        }
        w.flush().map_err(|e| io_err(&wp, e))?;
        n_events += events.len();
    }
    println!("{n_events} events, {n_windows} windows written to {}", a.out.display());
    Ok(())
}

fn cmd_featurize(a: &FeaturizeArgs) -> Result<(), CliError> {
    let w = &a.window;
    if !(w.history_s > 0.0 && w.horizon_s > 0.0 && w.stride > 0) {
        return Err(invalid("history, horizon and stride must be positive"));
    }
    let corpus = load_data(&a.data)?;
    let refs: Vec<&LabeledRecording> = corpus.iter().collect();
    let stats = match &a.neighbor_stats {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            NeighborStats::from_text(&text).map_err(|e| io_err(p, e))?
        }
        None => fit_neighbor_stats(corpus.iter().map(|e| (&e.0, e.1.as_slice()))),
    };
    if let Some(p) = &a.stats_out {
        write_file(p, stats.to_text().as_bytes())?;
    }
    let ds = build_datasets(&refs, w.history_s, &[w.horizon_s], w.stride, &stats, FeatureParams::default(), 1)
        .map_err(runtime)?
        .remove(0);
    let mut out = csv::Writer::from_writer(create_file(&a.out)?);
    let csv_err = |e: csv::Error| io_err(&a.out, e);
    let mut header = vec!["recording_id".to_owned(), "track_id".to_owned(), "anchor_frame".to_owned()];
    header.extend(ds.feature_names().iter().cloned());
    header.push("label".to_owned());
    out.write_record(&header).map_err(csv_err)?;
    for s in &ds.samples {
        let mut rec = vec![s.recording_id.to_string(), s.track_id.to_string(), s.anchor_frame.to_string()];
        rec.extend(s.features.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        rec.push(s.label.index().to_string());
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| io_err(&a.out, e))?;
    println!("{} windows x {} features written to {}", ds.samples.len(), ds.feature_names().len(), a.out.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = a.model.pipeline_config();
    cfg.validate().map_err(invalid)?;
    let w = &a.window;
    if !(w.history_s > 0.0 && w.horizon_s > 0.0 && w.stride > 0) {
        return Err(invalid("history, horizon and stride must be positive"));
    }
    let corpus = load_data(&a.data)?;
    let refs: Vec<&LabeledRecording> = corpus.iter().collect();
    let stats = fit_neighbor_stats(corpus.iter().map(|e| (&e.0, e.1.as_slice())));
    let ds = build_datasets(&refs, w.history_s, &[w.horizon_s], w.stride, &stats, FeatureParams::default(), cfg.sequence_step)
        .map_err(runtime)?
        .remove(0);
    let (model, report) = train_models(&ds, &[(a.kind, cfg.gbdt.clone())], &stats, &cfg)
        .map_err(runtime)?
        .remove(0);
    write_file(&a.out, &model.to_bytes())?;
    println!(
        "{} on {} windows (class counts {:?}): cv macro-F1 {:.4}, thresholds left {:.4} right {:.4}",
        a.kind.as_str(),
        ds.samples.len(),
        ds.class_counts(),
        report.mean_macro_f1,
        model.thresholds.left,
        model.thresholds.right
    );
    println!("model written to {}", a.out.display());
    Ok(())
}

/// Plain-text rendering of a metrics report.
pub fn format_report(m: &MetricsReport) -> String {
    let mut s = format!(
        "samples {}\naccuracy {:.4}\nmacro-F1 {:.4}\n\n{:<10}{:>10}{:>10}{:>10}\n",
        m.total(),
        m.accuracy,
        m.macro_f1,
        "class",
        "precision",
        "recall",
        "F1"
    );
    for (c, name) in ["NO-LC", "Left-LC", "Right-LC"].iter().enumerate() {
        s += &format!("{name:<10}{:>10.4}{:>10.4}{:>10.4}\n", m.precision[c], m.recall[c], m.f1[c]);
    }
    s += "\nconfusion (rows true, columns predicted)\n";
    for row in &m.confusion {
        s += &format!("{:>8}{:>8}{:>8}\n", row[0], row[1], row[2]);
    }
    s
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    if a.stride == 0 {
        return Err(invalid("stride must be positive"));
    }
    let bytes = fs::read(&a.model).map_err(|e| io_err(&a.model, e))?;
    let model = HybridModel::from_bytes(&bytes).map_err(|e| invalid(format!("{}: {e}", a.model.display())))?;
    if model.dataset_kind != a.data.dataset_kind {
        return Err(invalid(format!(
            "model was trained on {} data, --dataset-kind is {}",
            model.dataset_kind.as_str(),
            a.data.dataset_kind.as_str()
        )));
    }
    let corpus = load_data(&a.data)?;
    let refs: Vec<&LabeledRecording> = corpus.iter().collect();
    let ds = build_datasets(
        &refs,
        model.history_s,
        &[model.horizon_s],
        a.stride,
        &model.neighbor_stats,
        FeatureParams::default(),
        model.sequence_step,
    )
    .map_err(runtime)?
    .remove(0);
    if ds.sampling_rate != model.sampling_rate {
        return Err(invalid("corpus sampling rate differs from the model's"));
    }
    let report = evaluate(&model, &ds).map_err(runtime)?;
    let text = format!(
        "model {} (W={}s T={}s)\n{}",
        model.kind.as_str(),
        model.history_s,
        model.horizon_s,
        format_report(&report)
    );
    print!("{text}");
    if let Some(p) = &a.out {
        write_file(p, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let (corpus, split) = match &a.data {
        Some(dir) => {
            if a.train_locations.is_empty() || a.test_locations.is_empty() {
                return Err(invalid("--train-locations and --test-locations are required with --data"));
            }
            let split = SplitSpec {
                train_locations: a.train_locations.clone(),
                test_locations: a.test_locations.clone(),
            };
            (load_corpus(dir, a.events.as_deref(), a.dataset_kind, &[])?, split)
        }
        None => {
            let pick = |v: &[u32], d: &[u32]| if v.is_empty() { d.to_vec() } else { v.to_vec() };
            let split = SplitSpec {
                train_locations: pick(&a.train_locations, &[0, 1, 2]),
                test_locations: pick(&a.test_locations, &[3]),
            };
            (tiny_corpus().map_err(runtime)?, split)
        }
    };
    let cfg = ExperimentConfig {
        history_s: a.history_s.clone(),
        horizon_s: a.horizon_s.clone(),
        models: a.models.clone(),
        stride: a.stride,
        search_budget: a.search_budget,
        search_space: SearchSpace::default(),
        split,
        features: FeatureParams::default(),
        pipeline: a.model.pipeline_config(),
    };
    cfg.validate().map_err(invalid)?;
    let out = sweep(&corpus, &cfg).map_err(|e| match e {
        crate::pipeline::PipelineError::UnassignedLocation(_) => invalid(e),
        e => runtime(e),
    })?;
    create_dir(&a.out)?;
    let models_dir = a.out.join("models");
    create_dir(&models_dir)?;
    write_file(&a.out.join("results.csv"), results_csv(&out.rows).as_bytes())?;
    let text = results_text(&out.rows);
    write_file(&a.out.join("results.txt"), text.as_bytes())?;
    for m in &out.models {
        let name = format!("{}_W{}_T{}.bin", m.kind.as_str(), m.history_s, m.horizon_s);
        write_file(&models_dir.join(name), &m.to_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_stats(a: &StatsArgs) -> Result<(), CliError> {
    let corpus = load_data(&a.data)?;
    let tables = emit_distribution_stats(corpus.iter().map(|e| (&e.0, e.1.as_slice())));
    create_dir(&a.out)?;
    let bands = a.out.join("bands.csv");
    tables.write_bands_csv(create_file(&bands)?).map_err(|e| io_err(&bands, e))?;
    let hist = a.out.join("histogram.csv");
    tables.write_histogram_csv(create_file(&hist)?).map_err(|e| io_err(&hist, e))?;
    println!("{} band rows written to {}", tables.bands.len(), a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn cli_definition_is_consistent() {
        <Cli as clap::CommandFactory>::command().debug_assert();
    }

    #[test]
    fn version_names_artifact_format() {
        assert!(VERSION.ends_with(&format!("(artifact format {})", crate::artifact::FORMAT_VERSION)));
    }

    #[test]
    fn config_text_parsing() {
        let kv = parse_config_text("# comment\n\nseed = 7\n--stride=5\n").unwrap();
        assert_eq!(kv, vec![("seed".into(), "7".into()), ("stride".into(), "5".into())]);
        assert!(parse_config_text("seed 7").is_err());
        assert!(parse_config_text("config = x").is_err());
    }

    #[test]
    fn config_entries_yield_to_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        fs::write(&p, "seed = 3\nstride = 4\n").unwrap();
        let args = os(&["lane-intent", "sweep", "--config", p.to_str().unwrap(), "--seed=9", "--out", "x"]);
        let got: Vec<String> = expand_config(args).unwrap().iter().map(|a| a.to_string_lossy().into()).collect();
        assert_eq!(got, vec!["lane-intent", "sweep", "--stride", "4", "--seed=9", "--out", "x"]);
        let cli = Cli::try_parse_from(got).unwrap();
        let Command::Sweep(s) = cli.command else { panic!() };
        assert_eq!((s.model.seed, s.stride), (9, 4));
    }
}
