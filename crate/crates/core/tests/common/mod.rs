#![allow(dead_code)]

use std::collections::BTreeSet;

use crew_core::domain::{Day, Flight, FlightKind, Pilot, Qualification, ScheduleInstance, Slot};
use crew_core::env::RewardVariant;
use crew_core::generator::{default_desk_profile, generate_instance, GeneratorConfig};
use crew_core::policy::{PolicyWeights, WeightsMetadata};

pub fn desk(density: f64, seed: u64) -> ScheduleInstance {
    generate_instance(&default_desk_profile(), &GeneratorConfig::new(density, 1, seed)).unwrap()
}

/// `(start, end, slot qualifications)` per flight; `quals[p]` is pilot p's set.
pub fn tiny(flights: &[(Day, Day, &[Qualification])], quals: &[&[Qualification]]) -> ScheduleInstance {
    let mut slots = Vec::new();
    let mut fl = Vec::new();
    for (id, &(start_day, end_day, req)) in flights.iter().enumerate() {
        let ids: Vec<usize> = req
            .iter()
            .map(|&q| {
                slots.push(Slot {
                    id: slots.len(),
                    flight_id: id,
                    required_qualification: q,
                });
                slots.len() - 1
            })
            .collect();
        fl.push(Flight {
            id,
            kind: FlightKind::Mission,
            flight_type: 0,
            start_day,
            end_day,
            slots: ids,
        });
    }
    let pilots: Vec<Pilot> = quals
        .iter()
        .enumerate()
        .map(|(id, q)| Pilot {
            id,
            qualifications: q.iter().copied().collect::<BTreeSet<_>>(),
            leave: Vec::new(),
        })
        .collect();
    ScheduleInstance {
        training_matrix: vec![vec![0; fl.len()]; pilots.len()],
        trq_flags: vec![[false; 2]; fl.len()],
        horizon_days: fl.iter().map(|f| f.end_day + 1).max().unwrap_or(1).max(7),
        pilots,
        flights: fl,
        slots,
        num_flight_types: 1,
    }
}

pub fn weights_for(inst: &ScheduleInstance, seed: u64) -> PolicyWeights {
    PolicyWeights::new(
        inst.pilots.len(),
        inst.num_flight_types,
        [16, 16],
        WeightsMetadata {
            reward_variant: RewardVariant::Buffer,
            training_density: 1.0,
            seed,
            horizon: 7,
            t_move: 2,
        },
        seed,
    )
}
