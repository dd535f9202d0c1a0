//! `crew`: instance generation, training, extraction, scheduling, disruption
//! analysis and the canned experiments, all over versioned artifact files.
//!
//! Exit codes: 0 on success, 1 when the inputs are well formed but the work
//! fails (infeasible instance, solver error, failed self-test), 2 for usage
//! errors and missing or malformed files.

pub mod config;
pub mod experiment;
pub mod selftest;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use crew_core::disruption::{
    apply_delays, build_schedule, count_disruptions, repair, DelayScenario, Method, TrialContext,
};
use crew_core::domain::{validate_schedule, Day, FlightId, Schedule, ScheduleInstance, SlotId};
use crew_core::env::RewardVariant;
use crew_core::extract::{extract_blank_slate, extract_montecarlo, CoefficientMatrix, ExtractionMethod};
use crew_core::generator::{default_desk_profile, generate_instance, DatasetProfile, GeneratorConfig};
use crew_core::io::{config_hash, read_artifact, write_artifact, IoError, FORMAT_VERSION};
use crew_core::policy::{PolicyWeights, RolloutMode};
use crew_core::ppo::{train_ppo, TrainConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{desk_train_config, ExperimentConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Missing, unreadable or malformed input file.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Output(String),
    #[error(transparent)]
    Domain(#[from] crew_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Output(_) | CliError::Domain(_) | CliError::Failed(_) => 1,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<crew_core::domain::DomainError> for CliError {
    fn from(e: crew_core::domain::DomainError) -> Self {
        CliError::Domain(e.into())
    }
}

/// `desk` selects the bundled profile; anything else is a profile file.
pub fn load_profile(spec: &str) -> Result<DatasetProfile, CliError> {
    let profile = if spec == "desk" {
        default_desk_profile()
    } else {
        read_artifact::<DatasetProfile>(Path::new(spec), "profile")?.payload
    };
    profile.validate().map_err(crew_core::Error::from)?;
    Ok(profile)
}

/// Writes an artifact; failures here are not the caller's input's fault.
pub fn save<T: Serialize>(path: &Path, kind: &str, hash: &str, payload: &T) -> Result<(), CliError> {
    write_artifact(path, kind, hash, payload).map_err(|e| CliError::Output(e.to_string()))
}

pub fn load_instance(path: &Path) -> Result<ScheduleInstance, CliError> {
    let inst: ScheduleInstance = read_artifact(path, "instance")?.payload;
    inst.validate()?;
    Ok(inst)
}

pub fn load_weights(path: &Path) -> Result<PolicyWeights, CliError> {
    let w: PolicyWeights = read_artifact(path, "weights")?.payload;
    w.check().map_err(crew_core::Error::from)?;
    Ok(w)
}

/// CSV with a leading `# format_version=.. config_hash=..` comment line.
pub fn write_csv<T: Serialize>(path: &Path, hash: &str, rows: &[T]) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Output(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| fail(&e))?;
    }
    let mut file = std::fs::File::create(path).map_err(|e| fail(&e))?;
    writeln!(file, "# format_version={FORMAT_VERSION} config_hash={hash}").map_err(|e| fail(&e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| fail(&e))?;
    }
    w.flush().map_err(|e| fail(&e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Input(format!("{}: {e}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| fail(&e))?;
    r.deserialize().map(|row| row.map_err(|e| fail(&e))).collect()
}

#[derive(Debug, Parser)]
#[command(name = "crew", version, about = "Crew scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random instance from a dataset profile.
    Gen(GenArgs),
    /// Train a policy with PPO.
    Train(TrainArgs),
    /// Extract NICE coefficients from a policy for one instance.
    Extract(ExtractArgs),
    /// Build a schedule with one method.
    Schedule(ScheduleArgs),
    /// Delay flights in a schedule and repair it with minimum change.
    Disrupt(DisruptArgs),
    /// Run the multi-trial disruption experiment.
    Experiment(ExperimentArgs),
    /// Run the solver, reward and gradient oracle suites.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// `desk` or a profile file.
    #[arg(long, default_value = "desk")]
    profile: String,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 1)]
    weeks: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the resolved profile here.
    #[arg(long)]
    profile_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value = "desk")]
    profile: String,
    /// TOML file of training settings; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// `buffer` or `moveup`.
    #[arg(long, value_parser = parse_reward)]
    reward: Option<RewardVariant>,
    #[arg(long)]
    out: PathBuf,
    /// Per-update training curve as CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    instance: PathBuf,
    /// Monte Carlo rollouts; 0 for blank-slate extraction.
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Let rollouts follow the most likely pilot instead of sampling.
    #[arg(long)]
    greedy: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Policy for `nice` and `rl`.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60.0)]
    time_limit_secs: f64,
    #[arg(long, default_value_t = 4)]
    t_buffer: Day,
    #[arg(long, default_value_t = 2)]
    t_move: Day,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DisruptArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    fraction_delayed: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60.0)]
    time_limit_secs: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// TOML experiment configuration; flags override its keys.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run the configuration recorded in a previous run's manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    method: Option<Vec<Method>>,
    /// Comma-separated fractions in (0, 1].
    #[arg(long, value_delimiter = ',')]
    fraction_delayed: Option<Vec<f64>>,
    #[arg(long)]
    time_limit_secs: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_reward(s: &str) -> Result<RewardVariant, String> {
    match s {
        "buffer" => Ok(RewardVariant::Buffer),
        "moveup" => Ok(RewardVariant::Moveup),
        _ => Err(format!("unknown reward `{s}` (expected buffer or moveup)")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub method: Method,
    pub instance_hash: String,
    /// The solver stopped at the time limit; the schedule is its incumbent.
    pub timed_out: bool,
    pub model_size: Option<usize>,
    pub schedule: Schedule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisruptionFile {
    pub scenario: DelayScenario,
    pub shifts: Vec<(FlightId, Day)>,
    pub disruptions: usize,
    pub changed_slots: Vec<SlotId>,
    pub repaired: Schedule,
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 2 {
                eprintln!("run `crew --help` for usage");
            }
            e.exit_code()
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Extract(a) => extract_cmd(a),
        Command::Schedule(a) => schedule(a),
        Command::Disrupt(a) => disrupt(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::Selftest(a) => selftest_cmd(a),
    }
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    let profile = load_profile(&a.profile)?;
    let cfg = GeneratorConfig::new(a.density, a.weeks, a.seed);
    let inst = generate_instance(&profile, &cfg).map_err(crew_core::Error::from)?;
    let hash = config_hash(&(&profile, &cfg));
    save(&a.out, "instance", &hash, &inst)?;
    if let Some(p) = &a.profile_out {
        save(p, "profile", &config_hash(&profile), &profile)?;
    }
    println!(
        "{}: {} flights, {} slots, {} pilots",
        a.out.display(),
        inst.flights.len(),
        inst.slots.len(),
        inst.pilots.len()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let profile = load_profile(&a.profile)?;
    let mut cfg = match &a.config {
        Some(path) => {
            #[derive(Deserialize)]
            struct File {
                #[serde(default = "desk_train_config", deserialize_with = "config::train_overlay")]
                train: TrainConfig,
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            toml::from_str::<File>(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
                .train
        }
        None => desk_train_config(),
    };
    cfg.density = a.density.unwrap_or(cfg.density);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.total_episodes = a.episodes.unwrap_or(cfg.total_episodes);
    cfg.reward = a.reward.unwrap_or(cfg.reward);
    let out = train_ppo(&profile, &cfg).map_err(crew_core::Error::from)?;
    let hash = config_hash(&(&profile, &cfg));
    save(&a.out, "weights", &hash, &out.weights)?;
    if let Some(log) = &a.log {
        write_csv(log, &hash, &out.log)?;
    }
    if let Some(last) = out.log.last() {
        println!(
            "{} episodes, final mean return {:.2}, completion {:.2}",
            last.episode, last.mean_return, last.completion_rate
        );
    }
    Ok(())
}

fn extract_cmd(a: ExtractArgs) -> Result<(), CliError> {
    let w = load_weights(&a.weights)?;
    let inst = load_instance(&a.instance)?;
    let mode = if a.greedy { RolloutMode::Greedy } else { RolloutMode::Sample };
    let coeffs: CoefficientMatrix = match ExtractionMethod::from_n(a.n) {
        ExtractionMethod::BlankSlate => extract_blank_slate(&w, &inst),
        ExtractionMethod::MonteCarlo { n } => extract_montecarlo(&w, &inst, n, a.seed, mode),
    }
    .map_err(crew_core::Error::from)?;
    let hash = config_hash(&(config_hash(&w), config_hash(&inst), a.n, a.seed, a.greedy));
    save(&a.out, "coefficients", &hash, &coeffs)?;
    println!("{}: {} x {} coefficients", a.out.display(), coeffs.values.len(), inst.slots.len());
    Ok(())
}

fn secs(v: f64) -> Result<Duration, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(Duration::from_secs_f64(v))
    } else {
        Err(CliError::Usage(format!("time limit {v} must be positive")))
    }
}

fn schedule(a: ScheduleArgs) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let weights = match (&a.weights, a.method.needs_weights()) {
        (Some(p), true) => Some(load_weights(p)?),
        (None, true) => return Err(CliError::Usage(format!("--method {} needs --weights", a.method))),
        (_, false) => None,
    };
    let ctx = TrialContext {
        t_buffer: a.t_buffer,
        t_move: a.t_move,
        extraction: ExtractionMethod::from_n(a.n),
        seed: a.seed,
        ..TrialContext::new(secs(a.time_limit_secs)?, weights.as_ref())
    };
    let built = build_schedule(a.method, &inst, &ctx)?;
    let Some(sched) = built.schedule else {
        let why = built.skip.map_or("no schedule".to_string(), |s| format!("{s:?}"));
        return Err(CliError::Failed(format!("{}: no complete schedule ({why})", a.method)));
    };
    let violations = validate_schedule(&inst, &sched);
    if let Some(v) = violations.first() {
        return Err(CliError::Failed(format!("{} produced an invalid schedule: {v}", a.method)));
    }
    let file = ScheduleFile {
        method: a.method,
        instance_hash: config_hash(&inst),
        timed_out: built.timed_out,
        model_size: built.model_size,
        schedule: sched,
    };
    let hash = config_hash(&(&file.instance_hash, a.method, a.n, a.seed, a.t_buffer, a.t_move));
    save(&a.out, "schedule", &hash, &file)?;
    println!(
        "{}: {} slots assigned by {}{}",
        a.out.display(),
        file.schedule.assignment.len(),
        a.method,
        if built.timed_out { " (time limit reached, incumbent kept)" } else { "" }
    );
    Ok(())
}

fn disrupt(a: DisruptArgs) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let file: ScheduleFile = read_artifact(&a.schedule, "schedule")?.payload;
    if file.instance_hash != config_hash(&inst) {
        return Err(CliError::Usage(format!(
            "{} was built for a different instance",
            a.schedule.display()
        )));
    }
    let scn = DelayScenario::new(a.fraction_delayed, a.seed);
    scn.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (delayed, shifts) = apply_delays(&inst, &scn).map_err(crew_core::Error::from)?;
    let repaired = repair(&delayed, &file.schedule, scn.decision_day, secs(a.time_limit_secs)?)?
        .map_err(|why| CliError::Failed(format!("no repaired schedule ({why:?})")))?;
    let disruptions = count_disruptions(&file.schedule, &repaired).map_err(crew_core::Error::from)?;
    let changed_slots = file
        .schedule
        .assignment
        .iter()
        .filter(|(s, p)| repaired.assignment.get(s) != Some(p))
        .map(|(s, _)| *s)
        .collect();
    let out = DisruptionFile {
        scenario: scn,
        shifts,
        disruptions,
        changed_slots,
        repaired,
    };
    let hash = config_hash(&(config_hash(&inst), config_hash(&file), a.fraction_delayed, a.seed));
    save(&a.out, "disruption", &hash, &out)?;
    println!(
        "{} of {} flights delayed, {} disruptions",
        out.shifts.len(),
        inst.flights.len(),
        disruptions
    );
    Ok(())
}

fn experiment_cmd(a: ExperimentArgs) -> Result<(), CliError> {
    let mut cfg = match (&a.config, &a.manifest) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(m)) => experiment::config_from_manifest(m, None)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(v) = a.profile {
        cfg.profile = v;
    }
    if let Some(v) = a.density {
        cfg.density = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = a.method {
        cfg.methods = v;
    }
    if let Some(v) = a.fraction_delayed {
        cfg.fraction_delayed = v;
    }
    if let Some(v) = a.time_limit_secs {
        cfg.time_limit_secs = v;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = a.weights {
        cfg.weights = Some(v);
    }
    if let Some(v) = a.out {
        cfg.out = v;
    }
    let progress = |done: usize, total: usize| {
        if done == total || done % 10 == 0 {
            eprintln!("trial {done}/{total}");
        }
    };
    let out = experiment::run_experiment_with(&cfg, &progress)?;
    print!("{}", out.report.render());
    println!("results in {}", out.out_dir.display());
    Ok(())
}

fn selftest_cmd(a: SelftestArgs) -> Result<(), CliError> {
    let checks = selftest::run_all(a.seed);
    for c in &checks {
        println!("{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} self-test suite(s) failed")));
    }
    Ok(())
}
