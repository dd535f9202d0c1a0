//! The disruption experiment pipeline: generate, build, delay, repair, report.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use crew_core::disruption::{
    build_all, evaluate_delays, DelayScenario, Method, SkipReason, TrialContext, TrialResult,
};
use crew_core::env::RewardVariant;
use crew_core::extract::ExtractionMethod;
use crew_core::generator::{generate_instance, DatasetProfile, GeneratorConfig};
use crew_core::io::{config_hash, read_artifact, FORMAT_VERSION};
use crew_core::policy::{PolicyWeights, RolloutMode};
use crew_core::ppo::{train_ppo, TrainConfig};
use crew_core::report::{summarize, DisruptionReport};
use crew_core::seeds::SeedSplitter;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::{load_profile, save, write_csv, CliError};

pub const TRIALS_CSV: &str = "trials.csv";
pub const BUILDS_CSV: &str = "builds.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const WEIGHTS_JSON: &str = "weights.json";

/// One line of `trials.csv`: a method's outcome on one trial at one delay
/// fraction. Wall-clock times live in `builds.csv` so that this file is a
/// pure function of the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub method: Method,
    pub fraction_delayed: f64,
    pub disruptions: Option<usize>,
    pub skipped: bool,
    pub skip_reason: Option<SkipReason>,
    pub timed_out: bool,
}

/// One line of `builds.csv`: schedule construction for a method and trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildRow {
    pub trial: usize,
    pub method: Method,
    pub build_time_ms: f64,
    pub model_size: Option<usize>,
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Configuration as run, with the weights path filled in when training happened.
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub weights_hash: Option<String>,
    pub master_seed: u64,
    pub seed_streams: Vec<String>,
    pub crate_version: String,
    pub format_version: u32,
    pub files: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: DisruptionReport,
    pub trials: Vec<TrialRow>,
    pub builds: Vec<BuildRow>,
    pub manifest: Manifest,
    pub out_dir: PathBuf,
}

/// Hash of everything that influences results; output location and the
/// worker count do not.
pub fn experiment_hash(cfg: &ExperimentConfig, weights_hash: Option<&str>) -> String {
    let mut keyed = cfg.clone();
    keyed.out = PathBuf::new();
    keyed.jobs = 1;
    keyed.weights = None;
    config_hash(&(keyed, weights_hash))
}

fn resolve_weights(
    cfg: &mut ExperimentConfig,
    profile: &DatasetProfile,
) -> Result<Option<PolicyWeights>, CliError> {
    if !cfg.needs_weights() {
        return Ok(None);
    }
    if let Some(path) = &cfg.weights {
        let w: PolicyWeights = read_artifact(path, "weights")?.payload;
        w.check().map_err(crew_core::Error::from)?;
        return Ok(Some(w));
    }
    let train = TrainConfig {
        seed: SeedSplitter::new(cfg.seed).seed("training", 0),
        ..cfg.train.clone()
    };
    let trained = train_ppo(profile, &train).map_err(crew_core::Error::from)?;
    let path = cfg.out.join(WEIGHTS_JSON);
    save(&path, "weights", &config_hash(&train), &trained.weights)?;
    cfg.weights = Some(path);
    Ok(Some(trained.weights))
}

struct TrialOutcome {
    builds: Vec<BuildRow>,
    /// Indexed like `cfg.fraction_delayed`.
    per_fraction: Vec<Vec<TrialResult>>,
}

fn run_one(
    trial: usize,
    cfg: &ExperimentConfig,
    profile: &DatasetProfile,
    weights: Option<&PolicyWeights>,
    seeds: &SeedSplitter,
) -> Result<TrialOutcome, CliError> {
    let t = trial as u64;
    let gen = GeneratorConfig::new(cfg.density, cfg.weeks, seeds.seed("instance", t));
    let inst = generate_instance(profile, &gen).map_err(crew_core::Error::from)?;
    let ctx = TrialContext {
        t_buffer: cfg.t_buffer,
        t_move: cfg.t_move,
        extraction: ExtractionMethod::from_n(cfg.n),
        extraction_mode: cfg.extraction_mode,
        rl_mode: RolloutMode::Greedy,
        on_timeout: cfg.on_timeout,
        seed: seeds.seed("rollouts", t),
        ..TrialContext::new(cfg.time_limit(), weights)
    };
    let built = build_all(&cfg.methods, &inst, &ctx)?;
    let builds = built
        .iter()
        .map(|b| BuildRow {
            trial,
            method: b.method,
            build_time_ms: b.build_time.as_secs_f64() * 1e3,
            model_size: b.model_size,
            timed_out: b.timed_out,
        })
        .collect();
    let mut per_fraction = Vec::with_capacity(cfg.fraction_delayed.len());
    for &f in &cfg.fraction_delayed {
        let scn = DelayScenario::new(f, seeds.seed("delays", t));
        per_fraction.push(evaluate_delays(trial, &built, &inst, &scn, &ctx)?);
    }
    Ok(TrialOutcome {
        builds,
        per_fraction,
    })
}

/// Runs every trial on up to `cfg.jobs` threads; `progress` sees the number
/// of finished trials.
fn run_trials(
    cfg: &ExperimentConfig,
    profile: &DatasetProfile,
    weights: Option<&PolicyWeights>,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<Vec<TrialOutcome>, CliError> {
    let seeds = SeedSplitter::new(cfg.seed);
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<TrialOutcome, CliError>>>> =
        Mutex::new((0..cfg.trials).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..cfg.jobs.min(cfg.trials) {
            scope.spawn(|| loop {
                let trial = next.fetch_add(1, Ordering::Relaxed);
                if trial >= cfg.trials || abort.load(Ordering::Relaxed) {
                    break;
                }
                let out = run_one(trial, cfg, profile, weights, &seeds);
                if out.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                slots.lock().expect("no worker panicked")[trial] = Some(out);
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, cfg.trials);
            });
        }
    });
    let mut outcomes = Vec::with_capacity(cfg.trials);
    for r in slots.into_inner().expect("no worker panicked").into_iter().flatten() {
        outcomes.push(r?);
    }
    Ok(outcomes)
}

fn report_notes(cfg: &ExperimentConfig, builds: &[BuildRow]) -> Vec<String> {
    let mut notes = Vec::new();
    for &m in &cfg.methods {
        let mine: Vec<&BuildRow> = builds.iter().filter(|b| b.method == m).collect();
        if !mine.is_empty() && mine.iter().all(|b| b.timed_out) {
            notes.push(format!(
                "{m}: construction reached the {}s limit in every trial",
                cfg.time_limit_secs
            ));
        }
    }
    if cfg.reward() == RewardVariant::Moveup && cfg.needs_weights() {
        notes.push("nice/rl: policy trained with the move-up reward".into());
    }
    if cfg.methods.contains(&Method::Nice) {
        notes.push(match ExtractionMethod::from_n(cfg.n) {
            ExtractionMethod::BlankSlate => "nice: blank-slate coefficients".into(),
            ExtractionMethod::MonteCarlo { n } => format!("nice: Monte Carlo coefficients, n = {n}"),
        });
    }
    notes
}

/// Runs the pipeline and writes `trials.csv`, `builds.csv`, `report.txt`,
/// `report.json` and `manifest.json` into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    run_experiment_with(cfg, &|_, _| {})
}

pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<ExperimentOutput, CliError> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    let profile = load_profile(&cfg.profile)?;
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Output(format!("{}: {e}", cfg.out.display())))?;
    let weights = resolve_weights(&mut cfg, &profile)?;
    let weights_hash = weights.as_ref().map(config_hash);
    let hash = experiment_hash(&cfg, weights_hash.as_deref());

    let outcomes = run_trials(&cfg, &profile, weights.as_ref(), progress)?;

    let builds: Vec<BuildRow> = outcomes.iter().flat_map(|o| o.builds.iter().cloned()).collect();
    let mut trials = Vec::new();
    let mut rows = Vec::new();
    for (k, &f) in cfg.fraction_delayed.iter().enumerate() {
        let results: Vec<TrialResult> =
            outcomes.iter().flat_map(|o| o.per_fraction[k].iter().cloned()).collect();
        trials.extend(results.iter().map(|r| TrialRow {
            trial: r.trial,
            method: r.method,
            fraction_delayed: f,
            disruptions: r.disruptions,
            skipped: r.skipped(),
            skip_reason: r.skip,
            timed_out: r.timed_out,
        }));
        rows.push(summarize(f, &cfg.methods, &results));
    }
    let report = DisruptionReport {
        density: cfg.density,
        rows,
        notes: report_notes(&cfg, &builds),
    };

    let out = cfg.out.clone();
    write_csv(&out.join(TRIALS_CSV), &hash, &trials)?;
    write_csv(&out.join(BUILDS_CSV), &hash, &builds)?;
    let text = format!(
        "# format_version={FORMAT_VERSION} config_hash={hash}\n{}",
        report.render()
    );
    fs::write(out.join(REPORT_TXT), text)
        .map_err(|e| CliError::Output(format!("{}: {e}", out.join(REPORT_TXT).display())))?;
    save(&out.join(REPORT_JSON), "report", &hash, &report)?;

    let mut files = vec![TRIALS_CSV, BUILDS_CSV, REPORT_TXT, REPORT_JSON];
    if cfg.weights.as_deref() == Some(out.join(WEIGHTS_JSON).as_path()) {
        files.push(WEIGHTS_JSON);
    }
    let manifest = Manifest {
        master_seed: cfg.seed,
        config: cfg,
        config_hash: hash.clone(),
        weights_hash,
        seed_streams: ["instance", "rollouts", "delays", "training"].map(String::from).to_vec(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        format_version: FORMAT_VERSION,
        files: files.into_iter().map(String::from).collect(),
    };
    save(&out.join(MANIFEST_JSON), "manifest", &hash, &manifest)?;
    Ok(ExperimentOutput {
        report,
        trials,
        builds,
        manifest,
        out_dir: out,
    })
}

/// Configuration stored in a manifest, redirected to `out` when given.
pub fn config_from_manifest(path: &Path, out: Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    let manifest: Manifest = read_artifact(path, "manifest")?.payload;
    let mut cfg = manifest.config;
    if let Some(out) = out {
        cfg.out = out;
    }
    Ok(cfg)
}
