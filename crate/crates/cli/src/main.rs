use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use egosocial_core::characterization::{
    characterize, render_table, CharacterizationParams, Scope, DEFAULT_FRAME_PERIOD,
};
use egosocial_core::clustering::{cluster_prototypes, DEFAULT_CLUSTER_THRESHOLD};
use egosocial_core::features::{DEFAULT_TOP_K, DEFAULT_VARIANCE_THRESHOLD};
use egosocial_core::generator::{generate_dataset, GeneratorConfig};
use egosocial_core::io::{
    load_dataset, load_labels, read_json, save_dataset, save_labels, Artifact, ClusterArtifact,
    InteractionsArtifact, ReportArtifact, FORMAT_VERSION,
};
use egosocial_core::lstm::TrainConfig;
use egosocial_core::model::distinct_days;
use egosocial_core::selection::DEFAULT_MIN_FACE_DENSITY;
use egosocial_core::training::{categorization_samples, detection_samples, fit_features};
use egosocial_core::{
    run_pipeline, validate_dataset, Classifier, EventRecord, FeatureMask, Features, Model, PipelineConfig, Report,
    Series, Task,
};

#[derive(Parser)]
#[command(name = "egosocial", version, about = "Detect, categorize and characterize social interactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset for schema and invariant violations.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write a seeded synthetic dataset and its label file.
    Generate(GenerateArgs),
    /// Fit the scene vocabulary, PCA and feature standardizers.
    FitFeatures {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        #[arg(long, default_value_t = DEFAULT_VARIANCE_THRESHOLD)]
        variance: f64,
    },
    /// Train an interaction detector on labeled prototypes.
    TrainDetector {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 4)]
        sid: u8,
    },
    /// Train a formal/informal categorizer on labeled events.
    TrainCategorizer {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 3)]
        sic: u8,
    },
    /// Select social events, detect interactions and categorize them.
    Run(RunArgs),
    /// Group interacting prototypes into identity clusters.
    Cluster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        interactions: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CLUSTER_THRESHOLD)]
        cluster_threshold: f64,
    },
    /// Characterize all interactions, or those with one person.
    Characterize {
        #[command(flatten)]
        report: ReportArgs,
        /// Cluster index of the person; the generic scope when absent.
        #[arg(long)]
        person: Option<usize>,
    },
    /// Characterize the generic scope and every person; print the table.
    Report {
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// JSON file overriding generator defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    events_per_day: Option<usize>,
    #[arg(long)]
    people: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    detector: PathBuf,
    #[arg(long)]
    categorizer: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 4)]
    sid: u8,
    #[arg(long, default_value_t = 3)]
    sic: u8,
    /// Detection probability threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    categorization_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_FACE_DENSITY)]
    min_face_density: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    interactions: PathBuf,
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FRAME_PERIOD)]
    frame_period: f64,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Validate { input } => validate(&input),
        Command::Generate(args) => generate(args),
        Command::FitFeatures { input, output, top_k, variance } => {
            let events = load(&input)?;
            let features = fit_features::<f64>(&events, top_k, variance)?;
            features.save(&output).with_context(|| format!("writing {}", output.display()))?;
            println!("environment: {} components", features.environment.dim());
            Ok(())
        }
        Command::TrainDetector { train, sid } => train_model(train, FeatureMask::detection(sid)?),
        Command::TrainCategorizer { train, sic } => train_model(train, FeatureMask::categorization(sic)?),
        Command::Run(args) => run(args),
        Command::Cluster { input, interactions, output, cluster_threshold } => {
            cluster(&input, &interactions, &output, cluster_threshold)
        }
        Command::Characterize { report, person } => {
            let scope = person.map_or(Scope::Generic, Scope::Person);
            write_reports(&report, &[scope])
        }
        Command::Report { report } => {
            let mut scopes = vec![Scope::Generic];
            if let Some(path) = &report.clusters {
                let clusters = ClusterArtifact::load(path)?;
                scopes.extend((0..clusters.clusters.len()).map(Scope::Person));
            }
            write_reports(&report, &scopes)
        }
    }
}

fn load(path: &Path) -> Result<Vec<EventRecord>> {
    load_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn validate(input: &Path) -> Result<()> {
    let events = load(input)?;
    let report = validate_dataset(&events);
    for v in &report.violations {
        println!("{v}");
    }
    if !report.is_ok() {
        bail!("{} violations in {}", report.violations.len(), input.display());
    }
    let frames: usize = events.iter().map(|e| e.frames.len()).sum();
    println!("ok: {} events, {frames} frames, {} days", events.len(), distinct_days(&events));
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut cfg: GeneratorConfig = match &args.config {
        Some(path) => read_json(path).with_context(|| format!("reading {}", path.display()))?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(days) = args.days {
        cfg.days = days;
    }
    if let Some(n) = args.events_per_day {
        cfg.events_per_day = n;
    }
    if let Some(people) = args.people {
        cfg.people = people;
    }
    let (events, truth) = generate_dataset(&cfg)?;
    save_dataset(&events, &args.output)?;
    save_labels(&truth, &args.labels)?;
    println!("{} events, {} labeled prototypes", events.len(), truth.prototypes.len());
    Ok(())
}

fn train_model(args: TrainArgs, mask: FeatureMask) -> Result<()> {
    let events = load(&args.input)?;
    let truth = load_labels(&args.labels).with_context(|| format!("reading labels {}", args.labels.display()))?;
    let features = Features::load(&args.features)?;
    let samples: Vec<(Series, u8)> = match mask.task() {
        Task::Detection => {
            detection_samples(&events, &truth, mask)?.into_iter().map(|(_, s, y)| (s, y)).collect()
        }
        Task::Categorization => categorization_samples(&events, &truth, &features.environment, mask)?
            .into_iter()
            .map(|(_, s, y)| (s, y))
            .collect(),
    };
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        seed: args.seed,
        epochs: args.epochs.unwrap_or(defaults.epochs),
        hidden_dim: args.hidden_dim.unwrap_or(defaults.hidden_dim),
        ..defaults
    };
    let (classifier, log) = Classifier::fit(&samples, mask, Some(features.standardizer_for(mask)?), &cfg)?;
    let best = &log.epochs[log.best_epoch - 1];
    println!(
        "{mask}: {} train / {} validation samples, best epoch {} (train acc {:.3}, validation acc {})",
        log.n_train,
        log.n_validation,
        log.best_epoch,
        best.train_accuracy,
        best.validation_accuracy.map_or("n/a".into(), |a| format!("{a:.3}"))
    );
    let artifact =
        Model { format_version: FORMAT_VERSION, task: mask.task(), mask, classifier, training_log: log };
    artifact.save(&args.output)?;
    Ok(())
}

fn load_model(path: &Path, task: Task) -> Result<Model> {
    let model = Model::load(path).with_context(|| format!("reading model {}", path.display()))?;
    if model.task != task {
        bail!("{} holds a {:?} model, expected {task:?}", path.display(), model.task);
    }
    Ok(model)
}

fn run(args: RunArgs) -> Result<()> {
    let config = PipelineConfig {
        detection_mask: FeatureMask::detection(args.sid)?,
        categorization_mask: FeatureMask::categorization(args.sic)?,
        min_face_density: args.min_face_density,
        detection_threshold: args.threshold,
        categorization_threshold: args.categorization_threshold,
    };
    let detector = load_model(&args.detector, Task::Detection)?;
    let categorizer = load_model(&args.categorizer, Task::Categorization)?;
    detector.classifier.ensure_mask(config.detection_mask)?;
    categorizer.classifier.ensure_mask(config.categorization_mask)?;
    let features = Features::load(&args.features)?;
    let events = load(&args.input)?;
    let records =
        run_pipeline(&events, &detector.classifier, &categorizer.classifier, &features.environment, &config)?;
    let events_with = records.iter().map(|r| r.event_id).collect::<BTreeSet<_>>().len();
    println!("{} interactions in {events_with} events", records.len());
    InteractionsArtifact {
        format_version: FORMAT_VERSION,
        detection_mask: config.detection_mask,
        categorization_mask: config.categorization_mask,
        dataset_days: distinct_days(&events),
        records,
    }
    .save(&args.output)?;
    Ok(())
}

fn cluster(input: &Path, interactions: &Path, output: &Path, threshold: f64) -> Result<()> {
    let events = load(input)?;
    let found = InteractionsArtifact::load(interactions)?;
    let wanted: BTreeSet<_> = found.records.iter().map(|r| r.prototype_id).collect();
    let prototypes: Vec<_> =
        events.iter().flat_map(|e| e.prototypes()).filter(|p| wanted.contains(&p.id)).collect();
    if prototypes.len() != wanted.len() {
        bail!("{} interacting prototypes are missing from {}", wanted.len() - prototypes.len(), input.display());
    }
    let clusters = cluster_prototypes::<f64>(&prototypes, threshold)?;
    let largest = clusters.largest().map_or(0, |j| clusters.cardinality(j));
    println!("{} prototypes in {} clusters (largest {largest})", prototypes.len(), clusters.len());
    ClusterArtifact {
        format_version: FORMAT_VERSION,
        detection_mask: found.detection_mask,
        categorization_mask: found.categorization_mask,
        distance_threshold: threshold,
        clusters,
    }
    .save(output)?;
    Ok(())
}

fn write_reports(args: &ReportArgs, scopes: &[Scope]) -> Result<()> {
    let found = InteractionsArtifact::load(&args.interactions)?;
    let clusters = args.clusters.as_deref().map(ClusterArtifact::load).transpose()?;
    if let Some(c) = &clusters {
        if (c.detection_mask, c.categorization_mask) != (found.detection_mask, found.categorization_mask) {
            bail!(
                "clusters built with {}/{} but interactions with {}/{}",
                c.detection_mask,
                c.categorization_mask,
                found.detection_mask,
                found.categorization_mask
            );
        }
    }
    let params = CharacterizationParams { dataset_days: found.dataset_days, frame_period: args.frame_period };
    let reports = scopes
        .iter()
        .map(|&scope| {
            characterize(&found.records, clusters.as_ref().map(|c| &c.clusters), scope, &params)
                .with_context(|| format!("characterizing {scope:?}"))
        })
        .collect::<Result<Vec<Report>>>()?;
    print!("{}", render_table(&reports));
    ReportArtifact {
        format_version: FORMAT_VERSION,
        detection_mask: found.detection_mask,
        categorization_mask: found.categorization_mask,
        reports,
    }
    .save(&args.output)?;
    Ok(())
}
