//! Delay simulation, minimum-change repair and disruption counting.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Day, FlightId, Schedule, ScheduleInstance};
use crate::extract::{extract_blank_slate, extract_montecarlo, ExtractionMethod};
use crate::formulation::{
    build_baseline_ip, build_buffer_ip, build_moveup_ip, build_nice_ip, build_repair_ip,
    schedule_start, solve_schedule, solve_schedule_with, BuildOptions, FormulationError,
};
use crate::policy::{rl_schedule, PolicyWeights, RolloutMode};
use crate::seeds::SeedSplitter;
use crew_milp::{SolveStatus, SolverOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DisruptionError {
    #[error("invalid delay scenario: {0}")]
    InvalidScenario(String),
    #[error("cannot count disruptions: {0}")]
    Incomparable(String),
    #[error("method {0} needs trained policy weights")]
    MissingWeights(Method),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayScenario {
    /// Flights starting on or after this day have not left yet.
    pub decision_day: Day,
    pub fraction_delayed: f64,
    /// Inclusive range of whole-day shifts.
    pub delay_range: (Day, Day),
    pub seed: u64,
}

impl DelayScenario {
    pub fn new(fraction_delayed: f64, seed: u64) -> Self {
        Self {
            decision_day: 1,
            fraction_delayed,
            delay_range: (1, 3),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DisruptionError> {
        let f = self.fraction_delayed;
        if !(f > 0.0 && f <= 1.0) {
            return Err(DisruptionError::InvalidScenario(format!(
                "fraction_delayed {f} outside (0, 1]"
            )));
        }
        let (lo, hi) = self.delay_range;
        if lo < 1 || hi < lo {
            return Err(DisruptionError::InvalidScenario(format!(
                "delay range [{lo}, {hi}] must be positive and ordered"
            )));
        }
        Ok(())
    }

    /// Number of flights to delay out of `eligible`, rounding halves up.
    pub fn delayed_count(&self, eligible: usize) -> usize {
        ((self.fraction_delayed * eligible as f64) + 0.5).floor() as usize
    }
}

/// Shifts a random subset of not-yet-departed flights. Returns the delayed
/// instance and the applied `(flight, shift)` pairs in flight order.
pub fn apply_delays(
    inst: &ScheduleInstance,
    scn: &DelayScenario,
) -> Result<(ScheduleInstance, Vec<(FlightId, Day)>), DisruptionError> {
    scn.validate()?;
    let mut rng = SeedSplitter::new(scn.seed).rng("delays", 0);
    let eligible: Vec<FlightId> = inst
        .flights
        .iter()
        .filter(|f| f.start_day >= scn.decision_day)
        .map(|f| f.id)
        .collect();
    let k = scn.delayed_count(eligible.len());
    let mut chosen: Vec<FlightId> = eligible.choose_multiple(&mut rng, k).copied().collect();
    chosen.sort_unstable();

    let mut out = inst.clone();
    let mut shifts = Vec::with_capacity(k);
    for f in chosen {
        let d = rng.random_range(scn.delay_range.0..=scn.delay_range.1);
        let flight = &mut out.flights[f];
        flight.start_day += d;
        flight.end_day += d;
        shifts.push((f, d));
    }
    if let Some(last) = out.flights.iter().map(|f| f.end_day + 1).max() {
        out.horizon_days = out.horizon_days.max(last);
    }
    Ok((out, shifts))
}

/// Slots whose pilot changed between two complete schedules.
pub fn count_disruptions(original: &Schedule, repaired: &Schedule) -> Result<usize, DisruptionError> {
    if !original.complete || !repaired.complete {
        return Err(DisruptionError::Incomparable("incomplete schedule".into()));
    }
    if original.assignment.len() != repaired.assignment.len()
        || original.assignment.keys().ne(repaired.assignment.keys())
    {
        return Err(DisruptionError::Incomparable("different slot sets".into()));
    }
    Ok(original
        .assignment
        .iter()
        .zip(&repaired.assignment)
        .filter(|((_, a), (_, b))| a != b)
        .count())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Buffer,
    Moveup,
    Nice,
    Rl,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Baseline, Method::Buffer, Method::Moveup, Method::Nice, Method::Rl];

    pub fn label(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Buffer => "buffer",
            Method::Moveup => "moveup",
            Method::Nice => "nice",
            Method::Rl => "rl",
        }
    }

    pub fn is_ip(self) -> bool {
        self != Method::Rl
    }

    pub fn needs_weights(self) -> bool {
        matches!(self, Method::Nice | Method::Rl)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown method `{s}` (expected baseline, buffer, moveup, nice or rl)"))
    }
}

/// What to do when schedule construction hits the time limit with an incumbent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeoutPolicy {
    #[default]
    UseIncumbent,
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    /// No complete schedule exists for the pre-delay instance.
    Infeasible,
    /// The solver stopped at the limit (without incumbent, or under `Skip`).
    Timeout,
    RlIncomplete,
    RepairInfeasible,
    RepairTimeout,
}

/// Everything a trial needs besides the instance and the delays.
#[derive(Clone, Debug)]
pub struct TrialContext<'a> {
    pub t_buffer: Day,
    pub t_move: Day,
    pub time_limit: Duration,
    /// Policy behind NICE coefficients and RL schedules.
    pub weights: Option<&'a PolicyWeights>,
    pub extraction: ExtractionMethod,
    /// How Monte Carlo extraction rollouts pick actions.
    pub extraction_mode: RolloutMode,
    pub rl_mode: RolloutMode,
    pub on_timeout: TimeoutPolicy,
    /// Start the buffer, move-up and NICE searches from the baseline
    /// schedule, which is found within the same time limit.
    pub warm_start: bool,
    /// Seed for extraction rollouts and sampled RL episodes.
    pub seed: u64,
}

impl<'a> TrialContext<'a> {
    pub fn new(time_limit: Duration, weights: Option<&'a PolicyWeights>) -> Self {
        Self {
            t_buffer: 4,
            t_move: 2,
            time_limit,
            weights,
            extraction: ExtractionMethod::MonteCarlo { n: 2 },
            extraction_mode: RolloutMode::Sample,
            rl_mode: RolloutMode::Greedy,
            on_timeout: TimeoutPolicy::default(),
            warm_start: true,
            seed: 0,
        }
    }
}

/// A method's schedule for the pre-delay instance.
#[derive(Clone, Debug)]
pub struct Built {
    pub method: Method,
    pub schedule: Option<Schedule>,
    pub build_time: Duration,
    pub timed_out: bool,
    pub skip: Option<SkipReason>,
    pub model_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub method: Method,
    pub disruptions: Option<usize>,
    pub build_time: Duration,
    pub timed_out: bool,
    pub skip: Option<SkipReason>,
}

impl TrialResult {
    pub fn skipped(&self) -> bool {
        self.skip.is_some()
    }
}

fn weights_for<'a>(ctx: &TrialContext<'a>, m: Method) -> Result<&'a PolicyWeights, crate::Error> {
    ctx.weights.ok_or_else(|| DisruptionError::MissingWeights(m).into())
}

/// Builds and solves one method's schedule.
pub fn build_schedule(method: Method, inst: &ScheduleInstance, ctx: &TrialContext<'_>) -> Result<Built, crate::Error> {
    let start = Instant::now();
    let mut built = Built {
        method,
        schedule: None,
        build_time: Duration::ZERO,
        timed_out: false,
        skip: None,
        model_size: None,
    };
    if method == Method::Rl {
        let w = weights_for(ctx, method)?;
        let sched = rl_schedule(w, inst, ctx.rl_mode, ctx.seed)?;
        built.build_time = start.elapsed();
        if sched.complete {
            built.schedule = Some(sched);
        } else {
            built.skip = Some(SkipReason::RlIncomplete);
        }
        return Ok(built);
    }

    let opts = BuildOptions::default();
    let model = match method {
        Method::Baseline => build_baseline_ip(inst),
        Method::Buffer => build_buffer_ip(inst, ctx.t_buffer, opts),
        Method::Moveup => build_moveup_ip(inst, ctx.t_move, opts),
        Method::Nice => {
            let w = weights_for(ctx, method)?;
            let coeffs = match ctx.extraction {
                ExtractionMethod::BlankSlate => extract_blank_slate(w, inst)?,
                ExtractionMethod::MonteCarlo { n } => {
                    extract_montecarlo(w, inst, n, ctx.seed, ctx.extraction_mode)?
                }
            };
            build_nice_ip(inst, &coeffs)
        }
        Method::Rl => unreachable!(),
    };
    let (ip, cat) = match model {
        Ok(m) => m,
        Err(FormulationError::UncoverableSlot { .. }) => {
            built.build_time = start.elapsed();
            built.skip = Some(SkipReason::Infeasible);
            return Ok(built);
        }
        Err(e) => return Err(e.into()),
    };
    built.model_size = Some(crate::formulation::model_size(&ip));
    let mut opts = SolverOptions::with_time_limit(ctx.time_limit);
    if ctx.warm_start && method != Method::Baseline {
        let (bip, bcat) = build_baseline_ip(inst)?;
        if let (_, Some(base)) = solve_schedule(&bip, &bcat, ctx.time_limit)? {
            opts.start = Some(schedule_start(&cat, &base));
        }
        match ctx.time_limit.checked_sub(start.elapsed()) {
            Some(left) if !left.is_zero() => opts.time_limit = left,
            _ => opts.time_limit = Duration::from_millis(1),
        }
    }
    let (res, sched) = solve_schedule_with(&ip, &cat, &opts)?;
    built.build_time = start.elapsed();
    match res.status {
        SolveStatus::Optimal => built.schedule = sched,
        SolveStatus::Infeasible => built.skip = Some(SkipReason::Infeasible),
        SolveStatus::TimeoutNoIncumbent => {
            built.timed_out = true;
            built.skip = Some(SkipReason::Timeout);
        }
        SolveStatus::FeasibleIncumbent => {
            built.timed_out = true;
            match ctx.on_timeout {
                TimeoutPolicy::UseIncumbent => built.schedule = sched,
                TimeoutPolicy::Skip => built.skip = Some(SkipReason::Timeout),
            }
        }
    }
    Ok(built)
}

/// Builds every requested method. A proven-infeasible instance skips all of
/// them, RL included, since the IP constraint sets coincide.
pub fn build_all(methods: &[Method], inst: &ScheduleInstance, ctx: &TrialContext<'_>) -> Result<Vec<Built>, crate::Error> {
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        out.push(build_schedule(m, inst, ctx)?);
    }
    let mut infeasible = out.iter().any(|b| b.skip == Some(SkipReason::Infeasible));
    if !infeasible && !methods.iter().any(|m| m.is_ip()) {
        // Nothing proved feasibility yet; RL alone must follow the same skip rule.
        let check = build_schedule(Method::Baseline, inst, ctx)?;
        infeasible = check.skip == Some(SkipReason::Infeasible);
    }
    if infeasible {
        for b in &mut out {
            b.schedule = None;
            b.skip = Some(SkipReason::Infeasible);
        }
    }
    Ok(out)
}

/// Repairs each built schedule against one shared delay draw.
pub fn evaluate_delays(
    trial: usize,
    built: &[Built],
    inst: &ScheduleInstance,
    scn: &DelayScenario,
    ctx: &TrialContext<'_>,
) -> Result<Vec<TrialResult>, crate::Error> {
    let (delayed, _) = apply_delays(inst, scn)?;
    let mut out = Vec::with_capacity(built.len());
    for b in built {
        let mut r = TrialResult {
            trial,
            method: b.method,
            disruptions: None,
            build_time: b.build_time,
            timed_out: b.timed_out,
            skip: b.skip,
        };
        if let Some(original) = &b.schedule {
            match repair(&delayed, original, scn.decision_day, ctx.time_limit)? {
                Ok(repaired) => r.disruptions = Some(count_disruptions(original, &repaired)?),
                Err(reason) => r.skip = Some(reason),
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Minimum-change repair; the inner `Err` says why no repaired schedule exists.
pub fn repair(
    delayed: &ScheduleInstance,
    original: &Schedule,
    decision_day: Day,
    time_limit: Duration,
) -> Result<Result<Schedule, SkipReason>, crate::Error> {
    let (ip, cat) = match build_repair_ip(delayed, original, decision_day) {
        Ok(m) => m,
        Err(FormulationError::UncoverableSlot { .. }) => return Ok(Err(SkipReason::RepairInfeasible)),
        Err(e) => return Err(e.into()),
    };
    let (res, sched) = solve_schedule(&ip, &cat, time_limit)?;
    Ok(match (res.status, sched) {
        (SolveStatus::Optimal, Some(s)) => Ok(s),
        (SolveStatus::Infeasible, _) => Err(SkipReason::RepairInfeasible),
        _ => Err(SkipReason::RepairTimeout),
    })
}

/// Builds all methods on `inst`, then repairs them under one delay draw.
pub fn run_trial(
    trial: usize,
    methods: &[Method],
    inst: &ScheduleInstance,
    scn: &DelayScenario,
    ctx: &TrialContext<'_>,
) -> Result<Vec<TrialResult>, crate::Error> {
    let built = build_all(methods, inst, ctx)?;
    evaluate_delays(trial, &built, inst, scn, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::{instance, schedule};
    use crate::domain::validate_schedule;
    use crate::generator::{default_desk_profile, generate_instance, GeneratorConfig};

    #[test]
    fn delayed_count_rounds_half_up() {
        let s = DelayScenario::new(0.5, 0);
        assert_eq!(s.delayed_count(0), 0);
        assert_eq!(s.delayed_count(3), 2);
        assert_eq!(s.delayed_count(4), 2);
        assert_eq!(DelayScenario::new(0.25, 0).delayed_count(2), 1);
        assert_eq!(DelayScenario::new(1.0, 0).delayed_count(7), 7);
    }

    #[test]
    fn full_delay_moves_every_future_flight() {
        let inst = generate_instance(&default_desk_profile(), &GeneratorConfig::new(1.0, 1, 8)).unwrap();
        let (delayed, shifts) = apply_delays(&inst, &DelayScenario::new(1.0, 3)).unwrap();
        delayed.validate().unwrap();
        for (a, b) in inst.flights.iter().zip(&delayed.flights) {
            let shift = b.start_day - a.start_day;
            if a.start_day >= 1 {
                assert!((1..=3).contains(&shift));
            } else {
                assert_eq!(shift, 0);
            }
            assert_eq!(b.end_day - b.start_day, a.end_day - a.start_day);
        }
        assert_eq!(shifts.len(), inst.flights.iter().filter(|f| f.start_day >= 1).count());
    }

    #[test]
    fn nothing_to_delay() {
        let inst = instance(&[(0, 2, &[0])], &[&[0]]);
        let (delayed, shifts) = apply_delays(&inst, &DelayScenario::new(0.5, 1)).unwrap();
        assert!(shifts.is_empty());
        assert_eq!(delayed, inst);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let inst = instance(&[], &[&[0]]);
        for f in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(apply_delays(&inst, &DelayScenario::new(f, 0)).is_err());
        }
        let mut s = DelayScenario::new(0.5, 0);
        s.delay_range = (3, 1);
        assert!(s.validate().is_err());
    }

    #[test]
    fn disruption_counting() {
        let a = schedule(&[(0, 0), (1, 1), (2, 2)], true);
        assert_eq!(count_disruptions(&a, &a), Ok(0));
        let b = schedule(&[(0, 0), (1, 2), (2, 2)], true);
        assert_eq!(count_disruptions(&a, &b), Ok(1));
        let partial = schedule(&[(0, 0)], false);
        assert!(count_disruptions(&a, &partial).is_err());
        let other = schedule(&[(0, 0), (1, 1), (5, 2)], true);
        assert!(count_disruptions(&a, &other).is_err());
    }

    #[test]
    fn one_new_conflict_costs_one_change() {
        // Pilot 0 flies days 1-2 and 4; pilot 1 is idle. Delaying the first
        // flight by 2 days collides with the second, and the cheapest repair
        // hands one of the two flights to pilot 1.
        let inst = instance(&[(1, 2, &[0]), (4, 4, &[0])], &[&[0], &[0]]);
        let original = schedule(&[(0, 0), (1, 0)], true);
        let mut delayed = inst.clone();
        delayed.flights[0].start_day = 3;
        delayed.flights[0].end_day = 4;
        let repaired = repair(&delayed, &original, 1, Duration::from_secs(5)).unwrap().unwrap();
        assert!(validate_schedule(&delayed, &repaired).is_empty());
        assert_eq!(count_disruptions(&original, &repaired), Ok(1));
    }

    #[test]
    fn baseline_trial_on_desk_instance() {
        let inst = generate_instance(&default_desk_profile(), &GeneratorConfig::new(1.0, 1, 2)).unwrap();
        let ctx = TrialContext::new(Duration::from_secs(10), None);
        let res = run_trial(0, &[Method::Baseline, Method::Buffer], &inst, &DelayScenario::new(0.5, 9), &ctx).unwrap();
        assert_eq!(res.len(), 2);
        for r in &res {
            assert_eq!(r.disruptions.is_some(), !r.skipped());
        }
    }

    #[test]
    fn missing_weights_is_an_error() {
        let inst = instance(&[(0, 0, &[0])], &[&[0]]);
        let ctx = TrialContext::new(Duration::from_secs(1), None);
        assert!(build_schedule(Method::Nice, &inst, &ctx).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>(), Ok(m));
        }
        assert!("gurobi".parse::<Method>().is_err());
    }
}
