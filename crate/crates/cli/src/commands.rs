use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use rayon::prelude::*;
use railcomfort::index::{self, compare_lines, discomfort_index, IndexDocument};
use railcomfort::ingest::{self, build_labels, EventLog, LabeledDataset, Trip};
use railcomfort::logit::{self, builtin_model, LineModel};
use railcomfort::report::{self, evaluate, MetricsDocument, TimeAxis};
use railcomfort::signal::{self, FeatureSet};
use railcomfort::synth::{self, TripProfile};

use crate::config::RunConfig;
use crate::CliError;

/// Prefix that selects one of the built-in line models instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a labelled dataset archive from device logs and event files.
    Ingest(IngestArgs),
    /// Fit a line model on a dataset archive.
    Train(TrainArgs),
    /// Per-sample discomfort probabilities for a device log.
    Predict(PredictArgs),
    /// Discomfort index per line, ranked.
    Index(IndexArgs),
    /// Generate a synthetic trip with known ground truth.
    Simulate(SimulateArgs),
    /// Plot acceleration, jerk and discomfort pulses for a device log.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Device log CSV; repeat together with --events to pool trips.
    #[arg(long = "log", required = true, value_name = "PATH")]
    pub logs: Vec<PathBuf>,
    /// Event file, paired with the --log at the same position.
    #[arg(long = "events", required = true, value_name = "PATH")]
    pub events: Vec<PathBuf>,
    #[arg(long, default_value = "dataset.rcd")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    pub dataset: PathBuf,
    #[arg(long, default_value = "line")]
    pub line_id: String,
    #[arg(long, default_value = "model.json")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file, or `builtin:<line>`.
    #[arg(long, value_name = "MODEL")]
    pub model: String,
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    /// Reference events; adds the actual column and a metrics file.
    #[arg(long, value_name = "PATH")]
    pub events: Option<PathBuf>,
    #[arg(long, default_value = "prediction")]
    pub prefix: String,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Model file or `builtin:<line>`; repeat with --dataset.
    #[arg(long = "model", required = true, value_name = "MODEL")]
    pub models: Vec<String>,
    /// Dataset archive whose mean features feed the model at the same position.
    #[arg(long = "dataset", required = true, value_name = "PATH")]
    pub datasets: Vec<PathBuf>,
    #[arg(long, default_value = "index")]
    pub prefix: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Trip profile (TOML).
    #[arg(long, value_name = "PATH")]
    pub profile: PathBuf,
    /// Generating model file, or `builtin:<line>`.
    #[arg(long, value_name = "MODEL")]
    pub truth: String,
    /// Replace the truth model's normalization with the max-abs scales of
    /// the generated trip.
    #[arg(long)]
    pub refit_normalization: bool,
    #[arg(long, default_value = "trip")]
    pub prefix: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub events: Option<PathBuf>,
    #[arg(long, default_value = "trip.svg")]
    pub output: String,
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|_| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "not valid UTF-8".into(),
    })
}

fn write_output(cfg: &RunConfig, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out_dir).map_err(|source| CliError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;
    let path = cfg.out_dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Attaches the offending file to a library error.
fn at<T>(path: &Path, r: railcomfort::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn source_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn load_model(arg: &str) -> Result<LineModel, CliError> {
    match arg.strip_prefix(BUILTIN_PREFIX) {
        Some(line) => Ok(builtin_model(line)?),
        None => {
            let path = Path::new(arg);
            at(path, LineModel::from_json(&read_bytes(path)?))
        }
    }
}

fn load_log(path: &Path) -> Result<ingest::RawLog, CliError> {
    Ok(at(path, ingest::parse_accel_log(&read_bytes(path)?))?.with_device_id(source_name(path)))
}

fn load_events(path: &Path) -> Result<EventLog, CliError> {
    at(path, ingest::parse_events(&read_bytes(path)?))
}

fn load_dataset(path: &Path) -> Result<LabeledDataset, CliError> {
    at(path, LabeledDataset::from_archive(&read_bytes(path)?))
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cfg.jobs)))
}

fn paired<A, B>(a: &[A], b: &[B], what: &str) -> Result<(), CliError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{what}: got {} and {} values, they must pair up",
            a.len(),
            b.len()
        )))
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => ingest(a, cfg),
        Command::Train(a) => train(a, cfg),
        Command::Predict(a) => predict(a, cfg),
        Command::Index(a) => index(a, cfg),
        Command::Simulate(a) => simulate(a, cfg),
        Command::Report(a) => report(a, cfg),
    }
}

fn ingest(args: IngestArgs, cfg: &RunConfig) -> Result<(), CliError> {
    paired(&args.logs, &args.events, "--log/--events")?;
    let trips = pool(cfg)?.install(|| {
        args.logs
            .par_iter()
            .zip(args.events.par_iter())
            .map(|(log, events)| {
                Ok(Trip {
                    source: source_name(log),
                    log: load_log(log)?,
                    events: load_events(events)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let ds = match ingest::build_pooled_dataset(&trips, &cfg.dataset()) {
        // Pin range errors to the events file that caused them.
        Err(e @ railcomfort::Error::EventOutOfRange(_)) if trips.len() == 1 => {
            return Err(CliError::Input {
                path: args.events[0].clone(),
                source: e,
            })
        }
        other => other?,
    };
    let path = write_output(cfg, &args.output, &ds.to_archive())?;
    println!(
        "{}: {} rows, {} positive, {} trip(s)",
        path.display(),
        ds.len(),
        ds.n_positive(),
        ds.segments.len()
    );
    Ok(())
}

fn train(args: TrainArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let ds = load_dataset(&args.dataset)?;
    let model = logit::fit(&ds, &cfg.fit(), &args.line_id)?;
    let path = write_output(cfg, &args.output, &model.to_json())?;
    let meta = model.train_meta.as_ref().expect("fitted models carry metadata");
    let c = model.coefficients;
    println!(
        "{}: converged={} iterations={} log_likelihood={:.6} b=({:.4}, {:.4}, {:.4}, {:.4})",
        path.display(),
        meta.converged,
        meta.iterations,
        meta.final_log_likelihood,
        c.b1,
        c.b2,
        c.b3,
        c.b4
    );
    Ok(())
}

/// Resampled log in the requested physical unit.
fn prepare_for(model_features: FeatureSet, log: &ingest::RawLog, cfg: &RunConfig) -> railcomfort::Result<signal::UniformSeries> {
    let dataset_cfg = ingest::DatasetConfig {
        feature_set: model_features,
        // The model applies its own mean subtraction.
        mean_subtract: false,
        ..cfg.dataset()
    };
    ingest::preprocess(log, &dataset_cfg)
}

fn predict(args: PredictArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let log = load_log(&args.log)?;
    let series = at(&args.log, prepare_for(model.feature_set, &log, cfg))?;
    let prediction = logit::predict(&model, &series)?;
    let actual = match &args.events {
        Some(path) => {
            let events = load_events(path)?.shifted(cfg.clock_offset_s);
            Some(at(path, build_labels(&events, &series, cfg.pulse_width_s))?)
        }
        None => None,
    };
    let axis = TimeAxis::of(&series);
    let csv = report::probability_csv(axis, &prediction.probabilities, &prediction.labels, actual.as_deref())?;
    let svg = report::render_prediction_figure(
        axis,
        &prediction.probabilities,
        &prediction.labels,
        actual.as_deref(),
        cfg.smoothing_window,
        model.threshold,
        &format!("{}: predicted discomfort", model.line_id),
    )?;
    let csv_path = write_output(cfg, &format!("{}.csv", args.prefix), &csv)?;
    write_output(cfg, &format!("{}.svg", args.prefix), &svg)?;
    let positives = prediction.labels.iter().filter(|l| **l == 1).count();
    print!("{}: {} samples, {} predicted positive", csv_path.display(), series.len(), positives);
    if let Some(actual) = &actual {
        let m = evaluate(&prediction.labels, actual)?;
        let doc = MetricsDocument::new(&m, cfg.provenance());
        write_output(cfg, &format!("{}.metrics.json", args.prefix), &doc.to_json())?;
        print!(", accuracy {:.4}", m.accuracy);
    }
    println!();
    Ok(())
}

fn index(args: IndexArgs, cfg: &RunConfig) -> Result<(), CliError> {
    paired(&args.models, &args.datasets, "--model/--dataset")?;
    let reports = pool(cfg)?.install(|| {
        args.models
            .par_iter()
            .zip(args.datasets.par_iter())
            .map(|(m, d)| {
                let model = load_model(m)?;
                let ds = load_dataset(d)?;
                if ds.feature_set != model.feature_set {
                    return Err(railcomfort::Error::UnitMismatch {
                        expected: model.feature_set.unit(),
                        found: ds.feature_set.unit(),
                    }
                    .into());
                }
                let a = index::mean_of_rows(ds.features.iter().copied(), cfg.mean_rule)?;
                Ok(discomfort_index(&model, &a)?)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let ranked = compare_lines(&reports)?;
    let doc = IndexDocument::new(cfg.provenance(), ranked.clone());
    let json_path = write_output(cfg, &format!("{}.json", args.prefix), &doc.to_json())?;
    let svg = report::render_index_figure(&ranked, "Discomfort index by line")?;
    write_output(cfg, &format!("{}.svg", args.prefix), &svg)?;
    println!("{}:", json_path.display());
    for (rank, r) in ranked.iter().enumerate() {
        println!("  {}. {} D={:.4}", rank + 1, r.line_id, r.d);
    }
    Ok(())
}

fn simulate(args: SimulateArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let mut profile = at(&args.profile, TripProfile::from_toml(&read_text(&args.profile)?))?;
    if let Some(seed) = cfg.seed {
        profile.seed = seed;
    }
    let mut truth = load_model(&args.truth)?;
    let accel = synth::generate_trip(&profile, cfg.rate_hz)?;
    let features = match truth.feature_set {
        FeatureSet::Acceleration => accel.clone(),
        FeatureSet::Jerk => signal::jerk(&accel)?,
    };
    if args.refit_normalization {
        truth.normalization = signal::fit_normalization(&features)?;
    }
    let gt = synth::label_with_truth(&features, &truth, cfg.label_rule, profile.seed)?;
    let events = synth::events_from_labels(&gt.labels, &accel)?;
    let log = synth::series_to_log(&accel, &args.prefix)?;

    let log_path = write_output(cfg, &format!("{}.csv", args.prefix), &log.to_csv())?;
    write_output(cfg, &format!("{}.events", args.prefix), &events.to_text())?;
    write_output(cfg, &format!("{}.labels.csv", args.prefix), &synth::labels_to_csv(&gt.labels, &accel))?;
    let mean_p = gt.probabilities.iter().sum::<f64>() / gt.probabilities.len() as f64;
    println!(
        "{}: {} samples, seed {}, {} positive ({:.4}), mean probability {:.4}; ingest with --pulse-width-s {}",
        log_path.display(),
        accel.len(),
        profile.seed,
        events.len(),
        gt.positive_fraction(),
        mean_p,
        1.0 / cfg.rate_hz
    );
    Ok(())
}

fn report(args: ReportArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let log = load_log(&args.log)?;
    let accel = at(&args.log, prepare_for(FeatureSet::Acceleration, &log, cfg))?;
    let accel = if cfg.mean_subtract {
        signal::subtract_mean(&accel)
    } else {
        accel
    };
    let jerk = at(&args.log, signal::jerk(&accel))?;
    let labels = match &args.events {
        Some(path) => {
            let events = load_events(path)?.shifted(cfg.clock_offset_s);
            at(path, build_labels(&events, &accel, cfg.pulse_width_s))?
        }
        None => vec![0; accel.len()],
    };
    let svg = report::render_trip_figure(&accel, &jerk, &labels, &source_name(&args.log))?;
    let path = write_output(cfg, &args.output, &svg)?;
    println!("{}: {} samples", path.display(), accel.len());
    Ok(())
}
