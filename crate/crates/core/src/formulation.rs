//! Integer-programming formulations of the crew scheduling problem and the
//! decoder that turns solver output back into a [`Schedule`].
//!
//! Every builder starts from the same baseline: one binary `X_p{i}_s{s}` per
//! eligible (pilot, slot) pair, at most one slot per pilot and flight,
//! exact slot coverage, and no pilot on two overlapping flights. Ineligible
//! pairs never get a variable, which is how qualification and leave are
//! enforced. The overlap rule is written per pilot and maximal set of
//! mutually overlapping flights rather than per overlapping pair; the
//! integer solutions are the same and the relaxation is much tighter.

use std::collections::BTreeMap;
use std::time::Duration;

use crew_milp::{IpInstance, Relation, Sense, SolveResult, SolverOptions};
use thiserror::Error;

use crate::domain::{
    buffer_days, Day, Flight, FlightId, PilotId, Schedule, ScheduleInstance, SlotId,
};
use crate::extract::CoefficientMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormulationError {
    #[error("slot {slot} has no eligible pilot")]
    UncoverableSlot { slot: SlotId },
    #[error("buffer {b} outside [0, {t_buffer}]")]
    BufferOutOfRange { b: i64, t_buffer: i64 },
    #[error("coefficient matrix is {rows}x{cols}, instance needs {pilots}x{slots}")]
    CoefficientShape {
        rows: usize,
        cols: usize,
        pilots: usize,
        slots: usize,
    },
    #[error("coefficient for pilot {pilot} slot {slot} is {value}, outside [0, 1]")]
    CoefficientRange {
        pilot: PilotId,
        slot: SlotId,
        value: f64,
    },
    #[error("original schedule must be complete")]
    IncompleteOriginal,
    #[error("pilot {pilot} on started flight slot {slot} is no longer eligible")]
    FrozenIneligible { pilot: PilotId, slot: SlotId },
    #[error("slot {slot} covered by more than one pilot in the solution")]
    DuplicateCoverage { slot: SlotId },
    #[error("solver result carries no solution vector")]
    NoSolution,
}

/// Maps each modelling concept to its variable index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VariableCatalog {
    pub num_slots: usize,
    pub pilot_slot: BTreeMap<(PilotId, SlotId), usize>,
    pub pilot_flight: BTreeMap<(PilotId, FlightId), usize>,
    pub buffer_vars: BTreeMap<(PilotId, FlightId, FlightId), usize>,
    pub moveup_vars: BTreeMap<(PilotId, FlightId, FlightId, SlotId), usize>,
}

/// Buffer penalty, linear from -1 at zero days up to `-1/(t+1)` at `t` days.
pub fn penalty(b: i64, t_buffer: i64) -> Result<f64, FormulationError> {
    if b < 0 || b > t_buffer {
        return Err(FormulationError::BufferOutOfRange { b, t_buffer });
    }
    Ok(-((t_buffer + 1 - b) as f64) / (t_buffer + 1) as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildOptions {
    /// Replace exact slot coverage by `<= 1` rows plus a coverage term that
    /// dominates the formulation's own objective.
    pub soft_coverage: bool,
}

/// Maximal sets of pairwise-conflicting flights among those `keep` selects.
/// Flights are day intervals, so every such set is the flights covering
/// some day; each conflicting pair lies in at least one returned set.
fn conflict_cliques(inst: &ScheduleInstance, keep: impl Fn(FlightId) -> bool) -> Vec<Vec<FlightId>> {
    let kept: Vec<&Flight> = inst.flights.iter().filter(|f| keep(f.id)).collect();
    let Some(last) = kept.iter().map(|f| f.end_day).max() else {
        return Vec::new();
    };
    let first = kept.iter().map(|f| f.start_day).min().unwrap_or(last);
    let mut sets: Vec<Vec<FlightId>> = (first..=last)
        .map(|d| kept.iter().filter(|f| f.start_day <= d && d <= f.end_day).map(|f| f.id).collect())
        .filter(|s: &Vec<FlightId>| s.len() >= 2)
        .collect();
    sets.sort();
    sets.dedup();
    let contained = |a: &Vec<FlightId>, b: &Vec<FlightId>| a.len() < b.len() && a.iter().all(|x| b.contains(x));
    sets.iter()
        .filter(|a| !sets.iter().any(|b| contained(a, b)))
        .cloned()
        .collect()
}

struct Builder<'a> {
    inst: &'a ScheduleInstance,
    ip: IpInstance,
    names: Vec<String>,
    cat: VariableCatalog,
    coverage_rows: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn new(inst: &'a ScheduleInstance) -> Self {
        Self {
            inst,
            ip: IpInstance::new(0, Sense::Maximize),
            names: Vec::new(),
            cat: VariableCatalog {
                num_slots: inst.slots.len(),
                ..VariableCatalog::default()
            },
            coverage_rows: Vec::new(),
        }
    }

    fn var(&mut self, name: String) -> usize {
        self.names.push(name);
        self.ip.num_vars += 1;
        self.ip.num_vars - 1
    }

    fn row(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.ip.add_constraint(terms, relation, rhs);
    }

    /// X variables for a pilot's slots on one flight.
    fn x_on_flight(&self, pilot: PilotId, flight: FlightId) -> Vec<usize> {
        self.inst.flights[flight]
            .slots
            .iter()
            .filter_map(|&s| self.cat.pilot_slot.get(&(pilot, s)).copied())
            .collect()
    }

    fn baseline(&mut self) -> Result<(), FormulationError> {
        let inst = self.inst;
        for s in 0..inst.slots.len() {
            let pilots = inst.eligible_pilots(s);
            if pilots.is_empty() {
                return Err(FormulationError::UncoverableSlot { slot: s });
            }
            for p in pilots {
                let v = self.var(format!("X_p{p}_s{s}"));
                self.cat.pilot_slot.insert((p, s), v);
            }
        }
        for p in 0..inst.pilots.len() {
            for f in 0..inst.flights.len() {
                let xs = self.x_on_flight(p, f);
                if xs.len() >= 2 {
                    self.row(xs.iter().map(|&v| (v, 1.0)).collect(), Relation::Le, 1.0);
                }
            }
        }
        let mut by_slot: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.slots.len()];
        for (&(_, s), &v) in &self.cat.pilot_slot {
            by_slot[s].push((v, 1.0));
        }
        for terms in by_slot {
            self.coverage_rows.push(self.ip.constraints.len());
            self.row(terms, Relation::Eq, 1.0);
        }
        for p in 0..inst.pilots.len() {
            let on: Vec<Vec<usize>> = (0..inst.flights.len())
                .map(|f| self.x_on_flight(p, f))
                .collect();
            for clique in conflict_cliques(inst, |f| !on[f].is_empty()) {
                let terms = clique.iter().flat_map(|&f| &on[f]).map(|&v| (v, 1.0)).collect();
                self.row(terms, Relation::Le, 1.0);
            }
        }
        Ok(())
    }

    /// Pilot-flight indicators `Y = sum of X over the flight's slots`.
    fn pilot_flight_indicators(&mut self) {
        let inst = self.inst;
        for p in 0..inst.pilots.len() {
            for f in 0..inst.flights.len() {
                let xs = self.x_on_flight(p, f);
                if xs.is_empty() {
                    continue;
                }
                let y = self.var(format!("Y_p{p}_f{f}"));
                self.cat.pilot_flight.insert((p, f), y);
                let mut terms = vec![(y, 1.0)];
                terms.extend(xs.iter().map(|&v| (v, -1.0)));
                self.row(terms, Relation::Eq, 0.0);
            }
        }
    }

    fn coverage_objective(&self) -> Vec<(usize, f64)> {
        self.cat.pilot_slot.values().map(|&v| (v, 1.0)).collect()
    }

    /// Adds `extra` to the objective, with a dominant coverage term when soft.
    fn finish_objective(&mut self, extra: Vec<(usize, f64)>, soft: bool) {
        if soft {
            let weight = extra.iter().map(|t| t.1.abs()).sum::<f64>() + 1.0;
            for &r in &self.coverage_rows {
                self.ip.constraints[r].relation = Relation::Le;
            }
            let mut obj: Vec<(usize, f64)> = self
                .coverage_objective()
                .into_iter()
                .map(|(v, _)| (v, weight))
                .collect();
            obj.extend(extra);
            self.ip.objective = obj;
        } else {
            self.ip.objective = extra;
        }
    }

    fn done(mut self) -> (IpInstance, VariableCatalog) {
        self.ip.var_names = Some(self.names);
        (self.ip, self.cat)
    }
}

/// Baseline IP: maximize filled slots subject to the scheduling rules.
pub fn build_baseline_ip(
    inst: &ScheduleInstance,
) -> Result<(IpInstance, VariableCatalog), FormulationError> {
    let mut b = Builder::new(inst);
    b.baseline()?;
    b.ip.objective = b.coverage_objective();
    Ok(b.done())
}

/// Baseline rules plus `B_p{i}_f{f}_f{g}` indicators for consecutive flights
/// with a short buffer, maximizing the (negative) total buffer penalty.
pub fn build_buffer_ip(
    inst: &ScheduleInstance,
    t_buffer: Day,
    opts: BuildOptions,
) -> Result<(IpInstance, VariableCatalog), FormulationError> {
    let mut b = Builder::new(inst);
    b.baseline()?;
    b.pilot_flight_indicators();
    let mut objective = Vec::new();
    let n_flights = inst.flights.len();
    for p in 0..inst.pilots.len() {
        let flown: Vec<FlightId> = (0..n_flights)
            .filter(|&f| b.cat.pilot_flight.contains_key(&(p, f)))
            .collect();
        for &f in &flown {
            let ff = &inst.flights[f];
            for &g in &flown {
                let fg = &inst.flights[g];
                if f == g || fg.start_day <= ff.end_day {
                    continue;
                }
                let gap = buffer_days(ff.end_day, fg.start_day).expect("ordered pair");
                if gap > t_buffer {
                    continue;
                }
                let between: Vec<usize> = flown
                    .iter()
                    .filter(|&&h| {
                        let fh = &inst.flights[h];
                        fh.start_day > ff.end_day && fh.end_day < fg.start_day
                    })
                    .map(|&h| b.cat.pilot_flight[&(p, h)])
                    .collect();
                let yf = b.cat.pilot_flight[&(p, f)];
                let yg = b.cat.pilot_flight[&(p, g)];
                let v = b.var(format!("B_p{p}_f{f}_f{g}"));
                b.cat.buffer_vars.insert((p, f, g), v);
                b.row(vec![(v, 1.0), (yf, -1.0)], Relation::Le, 0.0);
                b.row(vec![(v, 1.0), (yg, -1.0)], Relation::Le, 0.0);
                for &yh in &between {
                    b.row(vec![(v, 1.0), (yh, 1.0)], Relation::Le, 1.0);
                }
                let mut lower = vec![(v, 1.0), (yf, -1.0), (yg, -1.0)];
                lower.extend(between.iter().map(|&yh| (yh, 1.0)));
                b.row(lower, Relation::Ge, -1.0);
                objective.push((v, penalty(gap as i64, t_buffer as i64)?));
            }
        }
    }
    b.finish_objective(objective, opts.soft_coverage);
    Ok(b.done())
}

/// Static move-up screen: `pilot`, if flying `g`, could move up to slot `s`
/// on flight `f` (timing, leave and qualification; the "not already on an
/// overlapping earlier flight" condition depends on the schedule).
pub fn moveup_candidate(
    inst: &ScheduleInstance,
    pilot: PilotId,
    g: FlightId,
    s: SlotId,
    t_move: Day,
) -> bool {
    let slot = &inst.slots[s];
    let f = &inst.flights[slot.flight_id];
    let fg = &inst.flights[g];
    let p = &inst.pilots[pilot];
    f.id != g
        && fg.start_day >= f.start_day
        && fg.start_day <= f.start_day + t_move
        && fg.end_day >= f.end_day
        && !p.on_leave_during(&f.days())
        && p.holds(slot.required_qualification)
}

/// Flights that start before `f` and overlap it.
fn earlier_overlapping(inst: &ScheduleInstance, f: FlightId) -> impl Iterator<Item = FlightId> + '_ {
    let ff = &inst.flights[f];
    inst.flights
        .iter()
        .filter(move |h| h.start_day < ff.start_day && h.days().overlaps(&ff.days()))
        .map(|h| h.id)
}

/// Slots the pilot could move up to when assigned to `g`, given the flights
/// they already fly.
pub fn count_moveup_slots(
    inst: &ScheduleInstance,
    pilot: PilotId,
    g: FlightId,
    flown: &[FlightId],
    t_move: Day,
) -> usize {
    let mut count = 0;
    for f in &inst.flights {
        if f.id == g || flown.contains(&f.id) {
            continue;
        }
        if earlier_overlapping(inst, f.id).any(|h| h == g || flown.contains(&h)) {
            continue;
        }
        count += f
            .slots
            .iter()
            .filter(|&&s| moveup_candidate(inst, pilot, g, s, t_move))
            .count();
    }
    count
}

/// Baseline rules plus `M_p{j}_g{g}_f{f}_s{s}` move-up indicators, maximizing
/// their count.
pub fn build_moveup_ip(
    inst: &ScheduleInstance,
    t_move: Day,
    opts: BuildOptions,
) -> Result<(IpInstance, VariableCatalog), FormulationError> {
    let mut b = Builder::new(inst);
    b.baseline()?;
    b.pilot_flight_indicators();
    let mut objective = Vec::new();
    let earlier: Vec<Vec<FlightId>> = (0..inst.flights.len())
        .map(|f| earlier_overlapping(inst, f).collect())
        .collect();
    for j in 0..inst.pilots.len() {
        for g in 0..inst.flights.len() {
            let Some(&yg) = b.cat.pilot_flight.get(&(j, g)) else {
                continue;
            };
            for s in 0..inst.slots.len() {
                if !moveup_candidate(inst, j, g, s, t_move) {
                    continue;
                }
                let f = inst.slots[s].flight_id;
                let v = b.var(format!("M_p{j}_g{g}_f{f}_s{s}"));
                b.cat.moveup_vars.insert((j, g, f, s), v);
                b.row(vec![(v, 1.0), (yg, -1.0)], Relation::Le, 0.0);
                let mut lower = vec![(v, 1.0), (yg, -1.0)];
                if let Some(&yf) = b.cat.pilot_flight.get(&(j, f)) {
                    b.row(vec![(v, 1.0), (yf, 1.0)], Relation::Le, 1.0);
                    lower.push((yf, 1.0));
                }
                for &h in &earlier[f] {
                    if let Some(&yh) = b.cat.pilot_flight.get(&(j, h)) {
                        b.row(vec![(v, 1.0), (yh, 1.0)], Relation::Le, 1.0);
                        lower.push((yh, 1.0));
                    }
                }
                b.row(lower, Relation::Ge, 0.0);
                objective.push((v, 1.0));
            }
        }
    }
    b.finish_objective(objective, opts.soft_coverage);
    Ok(b.done())
}

/// Baseline rules with policy-derived objective weights `sum a_is X_is`.
pub fn build_nice_ip(
    inst: &ScheduleInstance,
    coeffs: &CoefficientMatrix,
) -> Result<(IpInstance, VariableCatalog), FormulationError> {
    let (pilots, slots) = (inst.pilots.len(), inst.slots.len());
    if coeffs.values.len() != pilots || coeffs.values.iter().any(|r| r.len() != slots) {
        return Err(FormulationError::CoefficientShape {
            rows: coeffs.values.len(),
            cols: coeffs.values.first().map_or(0, Vec::len),
            pilots,
            slots,
        });
    }
    let mut b = Builder::new(inst);
    b.baseline()?;
    let mut objective = Vec::with_capacity(b.cat.pilot_slot.len());
    for (&(p, s), &v) in &b.cat.pilot_slot {
        let a = coeffs.values[p][s];
        if !(0.0..=1.0).contains(&a) {
            return Err(FormulationError::CoefficientRange {
                pilot: p,
                slot: s,
                value: a,
            });
        }
        if a != 0.0 {
            objective.push((v, a));
        }
    }
    b.ip.objective = objective;
    Ok(b.done())
}

/// Minimum-change repair of `original` on the delayed instance. Flights that
/// started before `decision_day` keep their crews.
pub fn build_repair_ip(
    delayed: &ScheduleInstance,
    original: &Schedule,
    decision_day: Day,
) -> Result<(IpInstance, VariableCatalog), FormulationError> {
    if !original.complete || original.assignment.len() != delayed.slots.len() {
        return Err(FormulationError::IncompleteOriginal);
    }
    let mut b = Builder::new(delayed);
    b.baseline()?;
    let mut objective = Vec::new();
    for (&s, &p) in &original.assignment {
        let var = b.cat.pilot_slot.get(&(p, s)).copied();
        if delayed.flight_of(s).start_day < decision_day {
            let v = var.ok_or(FormulationError::FrozenIneligible { pilot: p, slot: s })?;
            b.row(vec![(v, 1.0)], Relation::Eq, 1.0);
        }
        if let Some(v) = var {
            objective.push((v, 1.0));
        }
    }
    b.ip.objective = objective;
    Ok(b.done())
}

/// Reads the pilot-slot assignment out of a solver result.
pub fn decode(cat: &VariableCatalog, result: &SolveResult) -> Result<Schedule, FormulationError> {
    let values = result.values.as_ref().ok_or(FormulationError::NoSolution)?;
    let mut sched = Schedule::default();
    for (&(p, s), &v) in &cat.pilot_slot {
        if values[v] && sched.assignment.insert(s, p).is_some() {
            return Err(FormulationError::DuplicateCoverage { slot: s });
        }
    }
    sched.complete = sched.assignment.len() == cat.num_slots;
    Ok(sched)
}

/// Variables plus constraints, the size measure used to compare formulations.
pub fn model_size(ip: &IpInstance) -> usize {
    ip.num_vars + ip.constraints.len()
}

/// Solves and decodes in one step; `None` when the solver found no solution.
pub fn solve_schedule(
    ip: &IpInstance,
    cat: &VariableCatalog,
    time_limit: Duration,
) -> Result<(SolveResult, Option<Schedule>), crate::Error> {
    solve_schedule_with(ip, cat, &SolverOptions::with_time_limit(time_limit))
}

/// Fixes every assignment variable to agree with `sched`; used as a solver
/// start so a schedule from a cheaper model becomes the first incumbent.
pub fn schedule_start(cat: &VariableCatalog, sched: &Schedule) -> Vec<(usize, bool)> {
    cat.pilot_slot
        .iter()
        .map(|(&(p, s), &v)| (v, sched.assignment.get(&s) == Some(&p)))
        .collect()
}

pub fn solve_schedule_with(
    ip: &IpInstance,
    cat: &VariableCatalog,
    opts: &SolverOptions,
) -> Result<(SolveResult, Option<Schedule>), crate::Error> {
    let res = crew_milp::solve_with(ip, opts)?;
    let sched = if res.status.has_solution() {
        Some(decode(cat, &res)?)
    } else {
        None
    };
    Ok((res, sched))
}
