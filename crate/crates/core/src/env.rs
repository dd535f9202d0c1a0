//! Discrete-event scheduling environment: one step assigns one pilot to the
//! slot under the cursor, walking slots in a fixed order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    buffer_days, slot_order, Day, FlightId, PilotId, Schedule, ScheduleInstance, SlotId,
};
use crate::formulation::count_moveup_slots;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardVariant {
    Buffer,
    Moveup,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub variant: RewardVariant,
    /// Episode length `T` in days; a first assignment earns `T - 1`.
    pub horizon: Day,
    pub complete_bonus: f64,
    pub incomplete_penalty: f64,
    pub t_move: Day,
}

impl RewardConfig {
    pub fn buffer(horizon: Day) -> Self {
        Self {
            variant: RewardVariant::Buffer,
            horizon,
            complete_bonus: 25.0,
            incomplete_penalty: -10.0,
            t_move: 2,
        }
    }

    pub fn moveup(horizon: Day, t_move: Day) -> Self {
        Self {
            variant: RewardVariant::Moveup,
            t_move,
            ..Self::buffer(horizon)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("episode already finished")]
    Finished,
    #[error("pilot {pilot} is not available for slot {slot}")]
    MaskedAction { pilot: PilotId, slot: SlotId },
}

/// What the agent sees before choosing a pilot for the cursor slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub availability: Vec<bool>,
    pub event_type_onehot: Vec<f64>,
    pub trq: [bool; 2],
    pub assigned_to_event: Vec<bool>,
    pub duration_days: f64,
    pub days_to_start: f64,
    pub days_to_end: f64,
    pub training_fulfillments: Vec<f64>,
}

impl Observation {
    pub fn len_for(pilots: usize, flight_types: usize) -> usize {
        3 * pilots + flight_types + 5
    }

    /// Flat network input; day counts and fulfillments are divided by `scale`.
    pub fn features(&self, scale: f64) -> Vec<f64> {
        let bit = |b: &bool| if *b { 1.0 } else { 0.0 };
        let mut out = Vec::with_capacity(Self::len_for(
            self.availability.len(),
            self.event_type_onehot.len(),
        ));
        out.extend(self.availability.iter().map(bit));
        out.extend_from_slice(&self.event_type_onehot);
        out.extend(self.trq.iter().map(bit));
        out.extend(self.assigned_to_event.iter().map(bit));
        out.push(self.duration_days / scale);
        out.push(self.days_to_start / scale);
        out.push(self.days_to_end / scale);
        out.extend(self.training_fulfillments.iter().map(|v| v / scale));
        out
    }

    pub fn any_available(&self) -> bool {
        self.availability.iter().any(|&a| a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct Env<'a> {
    inst: &'a ScheduleInstance,
    reward: RewardConfig,
    order: Vec<SlotId>,
    cursor: usize,
    schedule: Schedule,
    flown: Vec<Vec<FlightId>>,
    done: bool,
}

impl<'a> Env<'a> {
    /// Fresh episode over the instance's canonical slot order.
    pub fn reset(inst: &'a ScheduleInstance, reward: RewardConfig) -> Self {
        Self::with_order(inst, reward, slot_order(inst))
    }

    /// Fresh episode over a caller-chosen slot sequence.
    pub fn with_order(inst: &'a ScheduleInstance, reward: RewardConfig, order: Vec<SlotId>) -> Self {
        let mut env = Self {
            inst,
            reward,
            order,
            cursor: 0,
            schedule: Schedule::default(),
            flown: vec![Vec::new(); inst.pilots.len()],
            done: false,
        };
        env.done = env.cursor_is_dead() || env.order.is_empty();
        env.schedule.complete = env.order.is_empty();
        env
    }

    pub fn instance(&self) -> &'a ScheduleInstance {
        self.inst
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_complete(&self) -> bool {
        self.schedule.complete
    }

    pub fn current_slot(&self) -> Option<SlotId> {
        (!self.done).then(|| self.order[self.cursor])
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn into_schedule(self) -> Schedule {
        self.schedule
    }

    /// Flights each pilot currently flies.
    pub fn flights_flown(&self) -> &[Vec<FlightId>] {
        &self.flown
    }

    fn available(&self, pilot: PilotId, slot: SlotId) -> bool {
        let f = self.inst.slots[slot].flight_id;
        self.inst.eligible(pilot, slot)
            && !self.flown[pilot]
                .iter()
                .any(|&g| g == f || self.inst.conflicts(g, f))
    }

    pub fn availability(&self, slot: SlotId) -> Vec<bool> {
        (0..self.inst.pilots.len())
            .map(|p| self.available(p, slot))
            .collect()
    }

    fn cursor_is_dead(&self) -> bool {
        match self.order.get(self.cursor) {
            Some(&s) => !(0..self.inst.pilots.len()).any(|p| self.available(p, s)),
            None => false,
        }
    }

    pub fn observe_slot(&self, slot: SlotId) -> Observation {
        let inst = self.inst;
        let f = inst.flight_of(slot);
        let mut onehot = vec![0.0; inst.num_flight_types];
        onehot[f.flight_type as usize] = 1.0;
        Observation {
            availability: self.availability(slot),
            event_type_onehot: onehot,
            trq: inst.trq_flags[f.id],
            assigned_to_event: (0..inst.pilots.len())
                .map(|p| self.flown[p].contains(&f.id))
                .collect(),
            duration_days: f.duration() as f64,
            days_to_start: f.start_day as f64,
            days_to_end: f.end_day as f64,
            training_fulfillments: (0..inst.pilots.len())
                .map(|p| inst.training_matrix[p][f.id] as f64)
                .collect(),
        }
    }

    /// Observation for the cursor slot, or `None` once the episode is over.
    pub fn observe(&self) -> Option<Observation> {
        self.current_slot().map(|s| self.observe_slot(s))
    }

    /// Placement reward for putting `pilot` on `flight`, before the terminal bonus.
    pub fn placement_reward(&self, pilot: PilotId, flight: FlightId) -> f64 {
        let inst = self.inst;
        match self.reward.variant {
            RewardVariant::Buffer => {
                let start = inst.flights[flight].start_day;
                let last_end = self.flown[pilot]
                    .iter()
                    .map(|&g| inst.flights[g].end_day)
                    .filter(|&e| e < start)
                    .max();
                match last_end {
                    Some(e) => (buffer_days(e, start).expect("end precedes start") + 1) as f64,
                    None => (self.reward.horizon - 1) as f64,
                }
            }
            RewardVariant::Moveup => {
                let m = count_moveup_slots(inst, pilot, flight, &self.flown[pilot], self.reward.t_move);
                (m + 1) as f64
            }
        }
    }

    pub fn step(&mut self, pilot: PilotId) -> Result<StepOutcome, EnvError> {
        let slot = self.current_slot().ok_or(EnvError::Finished)?;
        if pilot >= self.inst.pilots.len() || !self.available(pilot, slot) {
            return Err(EnvError::MaskedAction { pilot, slot });
        }
        let flight = self.inst.slots[slot].flight_id;
        let mut reward = self.placement_reward(pilot, flight);
        self.schedule.assignment.insert(slot, pilot);
        self.flown[pilot].push(flight);
        self.cursor += 1;
        if self.cursor == self.order.len() {
            self.done = true;
            self.schedule.complete = self.schedule.assignment.len() == self.inst.slots.len();
            reward += self.reward.complete_bonus;
        } else if self.cursor_is_dead() {
            self.done = true;
            reward += self.reward.incomplete_penalty;
        }
        Ok(StepOutcome {
            reward,
            done: self.done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::instance;
    use crate::domain::validate_schedule;

    #[test]
    fn empty_instance_is_terminal_and_complete() {
        let inst = instance(&[], &[&[0]]);
        let env = Env::reset(&inst, RewardConfig::buffer(7));
        assert!(env.is_done());
        assert!(env.is_complete());
        assert!(env.observe().is_none());
    }

    #[test]
    fn buffer_reward_examples() {
        // 0-day flight on day 1, next flight on day 7: buffer 5, reward 6.
        let inst = instance(&[(1, 1, &[0]), (7, 7, &[0]), (9, 9, &[0])], &[&[0]]);
        let mut env = Env::reset(&inst, RewardConfig::buffer(7));
        let first = env.step(0).unwrap();
        assert_eq!(first.reward, 6.0);
        let second = env.step(0).unwrap();
        assert_eq!(second.reward, 6.0);
        let last = env.step(0).unwrap();
        assert_eq!(last.reward, 2.0 + 25.0);
        assert!(last.done);
        assert!(env.is_complete());
    }

    #[test]
    fn dead_end_penalized() {
        // One pilot, two overlapping flights: the second slot has nobody left.
        let inst = instance(&[(0, 1, &[0]), (1, 1, &[0])], &[&[0]]);
        let mut env = Env::reset(&inst, RewardConfig::buffer(7));
        let out = env.step(0).unwrap();
        assert_eq!(out.reward, 6.0 - 10.0);
        assert!(out.done);
        assert!(!env.is_complete());
    }

    #[test]
    fn masked_action_rejected() {
        let inst = instance(&[(0, 0, &[1])], &[&[0], &[1]]);
        let mut env = Env::reset(&inst, RewardConfig::buffer(7));
        assert_eq!(env.observe().unwrap().availability, vec![false, true]);
        assert!(matches!(env.step(0), Err(EnvError::MaskedAction { .. })));
    }

    #[test]
    fn observation_layout() {
        let mut inst = instance(&[(2, 4, &[0, 0])], &[&[0], &[0], &[0]]);
        inst.num_flight_types = 4;
        inst.flights[0].flight_type = 2;
        inst.trq_flags[0] = [true, false];
        inst.training_matrix[1][0] = 3;
        let mut env = Env::reset(&inst, RewardConfig::buffer(7));
        env.step(1).unwrap();
        let obs = env.observe().unwrap();
        let x = obs.features(7.0);
        assert_eq!(x.len(), Observation::len_for(3, 4));
        assert_eq!(&x[..3], &[1.0, 0.0, 1.0]);
        assert_eq!(&x[3..7], &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(&x[7..9], &[1.0, 0.0]);
        assert_eq!(&x[9..12], &[0.0, 1.0, 0.0]);
        assert_eq!(&x[12..15], &[2.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0]);
        assert_eq!(&x[15..], &[0.0, 3.0 / 7.0, 0.0]);
    }

    #[test]
    fn moveup_reward_counts_reachable_slots() {
        // f0 day 0 (two slots), f1 day 1. A pilot put on f1 can move up to both f0 slots.
        let inst = instance(&[(0, 0, &[0, 0]), (1, 1, &[0])], &[&[0], &[0], &[0]]);
        let env = Env::reset(&inst, RewardConfig::moveup(7, 2));
        assert_eq!(env.placement_reward(2, 1), 3.0);
        assert_eq!(env.placement_reward(2, 0), 1.0);
    }

    #[test]
    fn complete_rollout_validates() {
        let inst = instance(
            &[(0, 1, &[0, 1]), (1, 2, &[0]), (3, 3, &[1, 0])],
            &[&[0, 1], &[0, 1], &[0]],
        );
        let mut env = Env::reset(&inst, RewardConfig::buffer(7));
        while let Some(obs) = env.observe() {
            let p = obs.availability.iter().position(|&a| a).unwrap();
            env.step(p).unwrap();
        }
        assert!(env.is_complete());
        assert!(validate_schedule(&inst, env.schedule()).is_empty());
    }
}
