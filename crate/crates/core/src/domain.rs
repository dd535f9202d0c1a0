//! Problem data: pilots, flights, slots and schedules, plus the day
//! arithmetic and validity checks every other module builds on.
//!
//! Days are 0-based integers counted from the start of the schedule and all
//! intervals are inclusive on both ends.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type PilotId = usize;
pub type FlightId = usize;
pub type SlotId = usize;
pub type Qualification = u16;
pub type FlightType = u16;
pub type Day = i32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DayRange {
    pub start: Day,
    pub end: Day,
}

impl DayRange {
    pub fn new(start: Day, end: Day) -> Self {
        Self { start, end }
    }

    pub fn overlaps(&self, other: &DayRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pilot {
    pub id: PilotId,
    pub qualifications: BTreeSet<Qualification>,
    pub leave: Vec<DayRange>,
}

impl Pilot {
    pub fn holds(&self, q: Qualification) -> bool {
        self.qualifications.contains(&q)
    }

    pub fn on_leave_during(&self, days: &DayRange) -> bool {
        self.leave.iter().any(|l| l.overlaps(days))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlightKind {
    Mission,
    Simulator,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flight {
    pub id: FlightId,
    pub kind: FlightKind,
    pub flight_type: FlightType,
    pub start_day: Day,
    pub end_day: Day,
    pub slots: Vec<SlotId>,
}

impl Flight {
    pub fn days(&self) -> DayRange {
        DayRange::new(self.start_day, self.end_day)
    }

    pub fn duration(&self) -> Day {
        self.end_day - self.start_day
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub id: SlotId,
    pub flight_id: FlightId,
    pub required_qualification: Qualification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInstance {
    pub pilots: Vec<Pilot>,
    pub flights: Vec<Flight>,
    pub slots: Vec<Slot>,
    pub horizon_days: Day,
    /// Size of the flight-type universe; sets the one-hot width of observations.
    pub num_flight_types: usize,
    /// `training_matrix[pilot][flight]`: fulfillments the pilot would earn on that flight.
    pub training_matrix: Vec<Vec<u32>>,
    pub trq_flags: Vec<[bool; 2]>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{what} id {found} at position {index}; ids must be dense and 0-based")]
    BadId {
        what: &'static str,
        index: usize,
        found: usize,
    },
    #[error("flight {flight} ends before it starts")]
    ReversedFlight { flight: FlightId },
    #[error("simulator {flight} spans more than one day")]
    LongSimulator { flight: FlightId },
    #[error("flight {flight} lies outside the horizon [0, {horizon})")]
    OutsideHorizon { flight: FlightId, horizon: Day },
    #[error("horizon must be at least one day")]
    EmptyHorizon,
    #[error("slot {slot} is not listed exactly once by its flight")]
    InconsistentSlot { slot: SlotId },
    #[error("pilot {pilot} has a leave interval ending before it starts")]
    ReversedLeave { pilot: PilotId },
    #[error("flight type {flight_type} of flight {flight} exceeds the type universe ({types})")]
    UnknownFlightType {
        flight: FlightId,
        flight_type: FlightType,
        types: usize,
    },
    #[error("{what} has shape inconsistent with the instance")]
    BadShape { what: &'static str },
    #[error("buffer needs a later start ({later_start}) strictly after the earlier end ({earlier_end})")]
    NotOrdered { earlier_end: Day, later_start: Day },
}

impl ScheduleInstance {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.horizon_days < 1 {
            return Err(DomainError::EmptyHorizon);
        }
        for (index, p) in self.pilots.iter().enumerate() {
            if p.id != index {
                return Err(DomainError::BadId {
                    what: "pilot",
                    index,
                    found: p.id,
                });
            }
            if p.leave.iter().any(|l| l.start > l.end) {
                return Err(DomainError::ReversedLeave { pilot: p.id });
            }
        }
        let mut owner = vec![None; self.slots.len()];
        for (index, f) in self.flights.iter().enumerate() {
            if f.id != index {
                return Err(DomainError::BadId {
                    what: "flight",
                    index,
                    found: f.id,
                });
            }
            if f.start_day > f.end_day {
                return Err(DomainError::ReversedFlight { flight: f.id });
            }
            if f.kind == FlightKind::Simulator && f.start_day != f.end_day {
                return Err(DomainError::LongSimulator { flight: f.id });
            }
            if f.start_day < 0 || f.end_day >= self.horizon_days {
                return Err(DomainError::OutsideHorizon {
                    flight: f.id,
                    horizon: self.horizon_days,
                });
            }
            if f.flight_type as usize >= self.num_flight_types {
                return Err(DomainError::UnknownFlightType {
                    flight: f.id,
                    flight_type: f.flight_type,
                    types: self.num_flight_types,
                });
            }
            for &s in &f.slots {
                match owner.get_mut(s) {
                    Some(slot_owner @ None) => *slot_owner = Some(f.id),
                    _ => return Err(DomainError::InconsistentSlot { slot: s }),
                }
            }
        }
        for (index, s) in self.slots.iter().enumerate() {
            if s.id != index {
                return Err(DomainError::BadId {
                    what: "slot",
                    index,
                    found: s.id,
                });
            }
            if owner[index] != Some(s.flight_id) {
                return Err(DomainError::InconsistentSlot { slot: s.id });
            }
        }
        if self.training_matrix.len() != self.pilots.len()
            || self
                .training_matrix
                .iter()
                .any(|row| row.len() != self.flights.len())
        {
            return Err(DomainError::BadShape {
                what: "training matrix",
            });
        }
        if self.trq_flags.len() != self.flights.len() {
            return Err(DomainError::BadShape { what: "TRQ flags" });
        }
        Ok(())
    }

    pub fn flight_of(&self, slot: SlotId) -> &Flight {
        &self.flights[self.slots[slot].flight_id]
    }

    /// Qualified for the slot and not on leave during its flight.
    pub fn eligible(&self, pilot: PilotId, slot: SlotId) -> bool {
        let p = &self.pilots[pilot];
        let s = &self.slots[slot];
        p.holds(s.required_qualification) && !p.on_leave_during(&self.flights[s.flight_id].days())
    }

    /// Pilots eligible for `slot`, in id order.
    pub fn eligible_pilots(&self, slot: SlotId) -> Vec<PilotId> {
        (0..self.pilots.len())
            .filter(|&p| self.eligible(p, slot))
            .collect()
    }

    /// Whether the pilot is eligible for at least one slot of the flight.
    pub fn eligible_for_flight(&self, pilot: PilotId, flight: FlightId) -> bool {
        self.flights[flight]
            .slots
            .iter()
            .any(|&s| self.eligible(pilot, s))
    }

    pub fn conflicts(&self, f: FlightId, g: FlightId) -> bool {
        flights_conflict(&self.flights[f], &self.flights[g])
    }
}

/// True iff `f` and `g` are different flights whose inclusive day intervals intersect.
pub fn flights_conflict(f: &Flight, g: &Flight) -> bool {
    f.id != g.id && f.days().overlaps(&g.days())
}

/// Full days strictly between an earlier flight's end and a later flight's start.
pub fn buffer_days(earlier_end: Day, later_start: Day) -> Result<Day, DomainError> {
    if later_start <= earlier_end {
        return Err(DomainError::NotOrdered {
            earlier_end,
            later_start,
        });
    }
    Ok(later_start - earlier_end - 1)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub assignment: BTreeMap<SlotId, PilotId>,
    pub complete: bool,
}

impl Schedule {
    /// Flights each pilot flies, sorted by flight id.
    pub fn flights_by_pilot(&self, inst: &ScheduleInstance) -> Vec<Vec<FlightId>> {
        let mut out = vec![Vec::new(); inst.pilots.len()];
        for (&s, &p) in &self.assignment {
            if let (Some(list), Some(slot)) = (out.get_mut(p), inst.slots.get(s)) {
                list.push(slot.flight_id);
            }
        }
        for list in &mut out {
            list.sort_unstable();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationClass {
    UnknownId,
    Leave,
    Qualification,
    SameFlightDuplicate,
    SlotCoverage,
    FlightConflict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum Violation {
    UnknownSlot { slot: SlotId },
    UnknownPilot { slot: SlotId, pilot: PilotId },
    Leave { pilot: PilotId, slot: SlotId },
    Qualification { pilot: PilotId, slot: SlotId },
    SameFlightDuplicate { pilot: PilotId, flight: FlightId },
    SlotCoverage { slot: SlotId },
    FlightConflict { pilot: PilotId, flights: (FlightId, FlightId) },
}

impl Violation {
    pub fn class(&self) -> ViolationClass {
        match self {
            Violation::UnknownSlot { .. } | Violation::UnknownPilot { .. } => {
                ViolationClass::UnknownId
            }
            Violation::Leave { .. } => ViolationClass::Leave,
            Violation::Qualification { .. } => ViolationClass::Qualification,
            Violation::SameFlightDuplicate { .. } => ViolationClass::SameFlightDuplicate,
            Violation::SlotCoverage { .. } => ViolationClass::SlotCoverage,
            Violation::FlightConflict { .. } => ViolationClass::FlightConflict,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownSlot { slot } => write!(f, "unknown slot {slot}"),
            Violation::UnknownPilot { slot, pilot } => {
                write!(f, "unknown pilot {pilot} on slot {slot}")
            }
            Violation::Leave { pilot, slot } => write!(f, "pilot {pilot} is on leave for slot {slot}"),
            Violation::Qualification { pilot, slot } => {
                write!(f, "pilot {pilot} lacks the qualification for slot {slot}")
            }
            Violation::SameFlightDuplicate { pilot, flight } => {
                write!(f, "pilot {pilot} holds two slots on flight {flight}")
            }
            Violation::SlotCoverage { slot } => write!(f, "slot {slot} is unfilled"),
            Violation::FlightConflict { pilot, flights } => write!(
                f,
                "pilot {pilot} is on overlapping flights {} and {}",
                flights.0, flights.1
            ),
        }
    }
}

/// Every broken schedule invariant; empty iff the schedule is valid.
pub fn validate_schedule(inst: &ScheduleInstance, sched: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    // pilot -> flights, with multiplicity, for the pairwise checks below
    let mut flown: BTreeMap<PilotId, Vec<FlightId>> = BTreeMap::new();
    for (&slot, &pilot) in &sched.assignment {
        let Some(s) = inst.slots.get(slot) else {
            out.push(Violation::UnknownSlot { slot });
            continue;
        };
        let Some(p) = inst.pilots.get(pilot) else {
            out.push(Violation::UnknownPilot { slot, pilot });
            continue;
        };
        if p.on_leave_during(&inst.flights[s.flight_id].days()) {
            out.push(Violation::Leave { pilot, slot });
        }
        if !p.holds(s.required_qualification) {
            out.push(Violation::Qualification { pilot, slot });
        }
        flown.entry(pilot).or_default().push(s.flight_id);
    }
    for (&pilot, flights) in &mut flown {
        flights.sort_unstable();
        for w in flights.windows(2) {
            if w[0] == w[1] {
                out.push(Violation::SameFlightDuplicate {
                    pilot,
                    flight: w[0],
                });
            }
        }
        flights.dedup();
        for (i, &a) in flights.iter().enumerate() {
            for &b in &flights[i + 1..] {
                if inst.conflicts(a, b) {
                    out.push(Violation::FlightConflict {
                        pilot,
                        flights: (a, b),
                    });
                }
            }
        }
    }
    if sched.complete {
        for s in 0..inst.slots.len() {
            if !sched.assignment.contains_key(&s) {
                out.push(Violation::SlotCoverage { slot: s });
            }
        }
    }
    out
}

/// Slots ordered by flight start day, then flight id, then ascending required
/// qualification (slot id breaks remaining ties).
pub fn slot_order(inst: &ScheduleInstance) -> Vec<SlotId> {
    let mut order: Vec<SlotId> = (0..inst.slots.len()).collect();
    order.sort_by_key(|&s| {
        let slot = &inst.slots[s];
        let f = &inst.flights[slot.flight_id];
        (f.start_day, f.id, slot.required_qualification, s)
    });
    order
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Builds an instance from `(start, end, slot quals)` per flight.
    /// Every pilot holds all qualifications in `quals[pilot]`.
    pub fn instance(flights: &[(Day, Day, &[Qualification])], quals: &[&[Qualification]]) -> ScheduleInstance {
        let mut slots = Vec::new();
        let mut fl = Vec::new();
        for (id, &(start, end, req)) in flights.iter().enumerate() {
            let mut ids = Vec::new();
            for &q in req {
                ids.push(slots.len());
                slots.push(Slot {
                    id: slots.len(),
                    flight_id: id,
                    required_qualification: q,
                });
            }
            fl.push(Flight {
                id,
                kind: FlightKind::Mission,
                flight_type: 0,
                start_day: start,
                end_day: end,
                slots: ids,
            });
        }
        let pilots: Vec<Pilot> = quals
            .iter()
            .enumerate()
            .map(|(id, q)| Pilot {
                id,
                qualifications: q.iter().copied().collect(),
                leave: Vec::new(),
            })
            .collect();
        let horizon = fl.iter().map(|f| f.end_day + 1).max().unwrap_or(1).max(7);
        ScheduleInstance {
            training_matrix: vec![vec![0; fl.len()]; pilots.len()],
            trq_flags: vec![[false; 2]; fl.len()],
            pilots,
            flights: fl,
            slots,
            horizon_days: horizon,
            num_flight_types: 1,
        }
    }

    pub fn schedule(pairs: &[(SlotId, PilotId)], complete: bool) -> Schedule {
        Schedule {
            assignment: pairs.iter().copied().collect(),
            complete,
        }
    }
}
