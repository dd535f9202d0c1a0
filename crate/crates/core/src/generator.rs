//! Random instance synthesis from a statistical dataset profile.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Day, DayRange, Flight, FlightKind, FlightType, Pilot, Qualification, ScheduleInstance, Slot,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub weekly_mission_mean: f64,
    pub weekly_mission_stddev: f64,
    pub weekly_simulator_mean: f64,
    pub weekly_simulator_stddev: f64,
    pub mission_type_frequencies: BTreeMap<FlightType, u32>,
    pub simulator_type_frequencies: BTreeMap<FlightType, u32>,
    /// Observed `end - start` lengths per type.
    pub duration_samples: BTreeMap<FlightType, Vec<Day>>,
    pub pilot_roster: Vec<Pilot>,
    /// Days covered by the roster's leave calendar; generated weeks are cut
    /// from a random whole week of it.
    pub leave_calendar_days: Day,
    /// `template[pilot][flight type]`.
    pub training_matrix_template: Vec<Vec<u32>>,
    /// Required qualification of each slot, per flight type.
    pub slots_per_flight_type: BTreeMap<FlightType, Vec<Qualification>>,
    pub trq_probabilities: [f64; 2],
    /// Inclusive bounds on slots per flight.
    pub slot_count_range: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub density: f64,
    pub weeks: u32,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(density: f64, weeks: u32, seed: u64) -> Self {
        Self {
            density,
            weeks,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("standard deviations and means must be finite and non-negative")]
    BadMoments,
    #[error("{0} frequencies need at least one positive entry")]
    NoTypes(&'static str),
    #[error("flight type {0} appears as both mission and simulator")]
    SharedType(FlightType),
    #[error("flight type {0} has no duration samples")]
    NoDurations(FlightType),
    #[error("flight type {0} has a negative duration sample")]
    NegativeDuration(FlightType),
    #[error("flight type {flight_type} has {count} slots, outside {min}..={max}")]
    SlotCount {
        flight_type: FlightType,
        count: usize,
        min: usize,
        max: usize,
    },
    #[error("roster pilot at position {0} has a mismatched id or reversed leave")]
    BadPilot(usize),
    #[error("training template shape does not match roster and type universe")]
    TemplateShape,
    #[error("TRQ probabilities must lie in [0, 1]")]
    BadTrq,
    #[error("density must be positive and finite, weeks at least 1")]
    BadConfig,
}

impl DatasetProfile {
    pub fn num_flight_types(&self) -> usize {
        self.mission_type_frequencies
            .keys()
            .chain(self.simulator_type_frequencies.keys())
            .map(|&t| t as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn num_pilots(&self) -> usize {
        self.pilot_roster.len()
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let moments = [
            self.weekly_mission_mean,
            self.weekly_mission_stddev,
            self.weekly_simulator_mean,
            self.weekly_simulator_stddev,
        ];
        if moments.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ProfileError::BadMoments);
        }
        if !self.mission_type_frequencies.values().any(|&c| c > 0) {
            return Err(ProfileError::NoTypes("mission"));
        }
        if !self.simulator_type_frequencies.values().any(|&c| c > 0) {
            return Err(ProfileError::NoTypes("simulator"));
        }
        for t in self.mission_type_frequencies.keys() {
            if self.simulator_type_frequencies.contains_key(t) {
                return Err(ProfileError::SharedType(*t));
            }
        }
        let (min, max) = self.slot_count_range;
        for &t in self
            .mission_type_frequencies
            .keys()
            .chain(self.simulator_type_frequencies.keys())
        {
            match self.duration_samples.get(&t) {
                Some(d) if !d.is_empty() => {
                    if d.iter().any(|&x| x < 0) {
                        return Err(ProfileError::NegativeDuration(t));
                    }
                }
                _ => return Err(ProfileError::NoDurations(t)),
            }
            let count = self.slots_per_flight_type.get(&t).map_or(0, Vec::len);
            if count < min || count > max {
                return Err(ProfileError::SlotCount {
                    flight_type: t,
                    count,
                    min,
                    max,
                });
            }
        }
        for (i, p) in self.pilot_roster.iter().enumerate() {
            if p.id != i || p.leave.iter().any(|l| l.start > l.end) {
                return Err(ProfileError::BadPilot(i));
            }
        }
        let types = self.num_flight_types();
        if self.training_matrix_template.len() != self.pilot_roster.len()
            || self.training_matrix_template.iter().any(|r| r.len() != types)
        {
            return Err(ProfileError::TemplateShape);
        }
        if self.trq_probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ProfileError::BadTrq);
        }
        Ok(())
    }
}

fn weekly_count(rng: &mut ChaCha8Rng, mean: f64, sd: f64, density: f64) -> usize {
    let draw = Normal::new(mean, sd)
        .expect("moments validated")
        .sample(rng);
    (draw * density).max(0.0).round_ties_even() as usize
}

fn type_sampler(freqs: &BTreeMap<FlightType, u32>) -> (Vec<FlightType>, WeightedIndex<u32>) {
    let types: Vec<FlightType> = freqs.keys().copied().collect();
    let dist = WeightedIndex::new(freqs.values().copied()).expect("a positive frequency exists");
    (types, dist)
}

/// Draws a random instance; identical `(profile, cfg)` give identical output.
pub fn generate_instance(
    profile: &DatasetProfile,
    cfg: &GeneratorConfig,
) -> Result<ScheduleInstance, ProfileError> {
    profile.validate()?;
    if !(cfg.density.is_finite() && cfg.density > 0.0) || cfg.weeks == 0 {
        return Err(ProfileError::BadConfig);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let week_span = 7 * cfg.weeks as Day;
    let spare_weeks = ((profile.leave_calendar_days - week_span) / 7).max(0);
    let leave_offset = 7 * rng.random_range(0..=spare_weeks);

    let (mission_types, mission_dist) = type_sampler(&profile.mission_type_frequencies);
    let (sim_types, sim_dist) = type_sampler(&profile.simulator_type_frequencies);

    let mut flights = Vec::new();
    let mut slots = Vec::new();
    let mut trq_flags = Vec::new();
    for week in 0..cfg.weeks as Day {
        let alpha = weekly_count(
            &mut rng,
            profile.weekly_mission_mean,
            profile.weekly_mission_stddev,
            cfg.density,
        );
        let beta = weekly_count(
            &mut rng,
            profile.weekly_simulator_mean,
            profile.weekly_simulator_stddev,
            cfg.density,
        );
        let kinds = std::iter::repeat_n(FlightKind::Mission, alpha)
            .chain(std::iter::repeat_n(FlightKind::Simulator, beta));
        for kind in kinds {
            let start = week * 7 + rng.random_range(0..7);
            let flight_type = match kind {
                FlightKind::Mission => mission_types[mission_dist.sample(&mut rng)],
                FlightKind::Simulator => sim_types[sim_dist.sample(&mut rng)],
            };
            let duration = match kind {
                FlightKind::Mission => *profile.duration_samples[&flight_type]
                    .choose(&mut rng)
                    .expect("durations validated"),
                FlightKind::Simulator => 0,
            };
            let id = flights.len();
            let mut ids = Vec::new();
            for &q in &profile.slots_per_flight_type[&flight_type] {
                ids.push(slots.len());
                slots.push(Slot {
                    id: slots.len(),
                    flight_id: id,
                    required_qualification: q,
                });
            }
            flights.push(Flight {
                id,
                kind,
                flight_type,
                start_day: start,
                end_day: start + duration,
                slots: ids,
            });
            trq_flags.push([
                rng.random_bool(profile.trq_probabilities[0]),
                rng.random_bool(profile.trq_probabilities[1]),
            ]);
        }
    }

    let horizon_days = flights
        .iter()
        .map(|f| f.end_day + 1)
        .max()
        .unwrap_or(0)
        .max(week_span);
    let window = DayRange::new(0, horizon_days - 1);
    let pilots = profile
        .pilot_roster
        .iter()
        .map(|p| Pilot {
            id: p.id,
            qualifications: p.qualifications.clone(),
            leave: p
                .leave
                .iter()
                .map(|l| DayRange::new(l.start - leave_offset, l.end - leave_offset))
                .filter(|l| l.overlaps(&window))
                .map(|l| DayRange::new(l.start.max(0), l.end.min(horizon_days - 1)))
                .collect(),
        })
        .collect();
    let training_matrix = profile
        .training_matrix_template
        .iter()
        .map(|row| flights.iter().map(|f| row[f.flight_type as usize]).collect())
        .collect();

    Ok(ScheduleInstance {
        pilots,
        flights,
        slots,
        horizon_days,
        num_flight_types: profile.num_flight_types(),
        training_matrix,
        trq_flags,
    })
}

/// Seed the bundled profile is built from; fixed so the profile never changes.
const DESK_PROFILE_SEED: u64 = 0x5EED_DE5C;

/// Bundled 20-pilot stand-in for a squadron export: 8 qualification tags,
/// 7 mission and 9 simulator types, 2-3 slots per flight and about seven
/// flights a week.
pub fn default_desk_profile() -> DatasetProfile {
    const PILOTS: usize = 20;
    const QUALS: u16 = 8;
    const CALENDAR: Day = 182;
    let mut rng = ChaCha8Rng::seed_from_u64(DESK_PROFILE_SEED);

    // Tag 0 is universal; each higher tag is rarer, but never held by fewer than 4.
    let mut roster: Vec<Pilot> = (0..PILOTS)
        .map(|id| Pilot {
            id,
            qualifications: BTreeSet::from([0]),
            leave: Vec::new(),
        })
        .collect();
    for q in 1..QUALS {
        let p_hold = 0.85 - 0.085 * q as f64;
        let mut holders = 0;
        for p in roster.iter_mut() {
            if rng.random_bool(p_hold) {
                p.qualifications.insert(q);
                holders += 1;
            }
        }
        let mut ids: Vec<usize> = (0..PILOTS).collect();
        ids.shuffle(&mut rng);
        for id in ids {
            if holders >= 4 {
                break;
            }
            if roster[id].qualifications.insert(q) {
                holders += 1;
            }
        }
    }
    for p in roster.iter_mut() {
        let mut run: Option<Day> = None;
        for day in 0..=CALENDAR {
            let away = day < CALENDAR && rng.random_bool(0.05);
            match (away, run) {
                (true, None) => run = Some(day),
                (false, Some(start)) => {
                    p.leave.push(DayRange::new(start, day - 1));
                    run = None;
                }
                _ => {}
            }
        }
    }

    let mission_freq: [u32; 7] = [14, 9, 7, 5, 4, 3, 2];
    let sim_freq: [u32; 9] = [10, 8, 6, 5, 4, 3, 3, 2, 1];
    let mission_durations: [&[Day]; 7] = [
        &[0, 1, 1, 2],
        &[1, 2, 2, 3],
        &[0, 0, 1],
        &[2, 3, 4],
        &[1, 1, 2, 3],
        &[0, 1, 2],
        &[3, 4],
    ];
    // (lead tag, additional slot tags): the lead slot carries the rarer tag.
    let mission_slots: [&[Qualification]; 7] = [
        &[0, 2],
        &[1, 0, 4],
        &[0, 3],
        &[2, 0, 6],
        &[1, 5],
        &[0, 1, 3],
        &[4, 7],
    ];
    let sim_slots: [&[Qualification]; 9] = [
        &[0, 1],
        &[0, 2],
        &[1, 3],
        &[0, 0, 2],
        &[2, 4],
        &[0, 5],
        &[1, 1, 3],
        &[3, 6],
        &[0, 7],
    ];

    let mut mission_type_frequencies = BTreeMap::new();
    let mut simulator_type_frequencies = BTreeMap::new();
    let mut duration_samples = BTreeMap::new();
    let mut slots_per_flight_type = BTreeMap::new();
    for t in 0..7u16 {
        mission_type_frequencies.insert(t, mission_freq[t as usize]);
        duration_samples.insert(t, mission_durations[t as usize].to_vec());
        slots_per_flight_type.insert(t, mission_slots[t as usize].to_vec());
    }
    for k in 0..9u16 {
        let t = 7 + k;
        simulator_type_frequencies.insert(t, sim_freq[k as usize]);
        duration_samples.insert(t, vec![0]);
        slots_per_flight_type.insert(t, sim_slots[k as usize].to_vec());
    }
    let training_matrix_template = (0..PILOTS)
        .map(|_| (0..16).map(|_| rng.random_range(0..=3)).collect())
        .collect();

    DatasetProfile {
        weekly_mission_mean: 3.2,
        weekly_mission_stddev: 1.3,
        weekly_simulator_mean: 3.9,
        weekly_simulator_stddev: 1.5,
        mission_type_frequencies,
        simulator_type_frequencies,
        duration_samples,
        pilot_roster: roster,
        leave_calendar_days: CALENDAR,
        training_matrix_template,
        slots_per_flight_type,
        trq_probabilities: [0.4, 0.25],
        slot_count_range: (2, 3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn fixed_profile(mission_mean: f64) -> DatasetProfile {
        let mut p = default_desk_profile();
        p.weekly_mission_mean = mission_mean;
        p.weekly_mission_stddev = 0.0;
        p
    }

    fn count(inst: &ScheduleInstance, kind: FlightKind) -> usize {
        inst.flights.iter().filter(|f| f.kind == kind).count()
    }

    #[test]
    fn zero_variance_counts_scale_with_density() {
        let p = fixed_profile(5.0);
        for seed in 0..5 {
            let one = generate_instance(&p, &GeneratorConfig::new(1.0, 3, seed)).unwrap();
            assert_eq!(count(&one, FlightKind::Mission), 15);
            let two = generate_instance(&p, &GeneratorConfig::new(2.0, 3, seed)).unwrap();
            assert_eq!(count(&two, FlightKind::Mission), 30);
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let p = default_desk_profile();
        let cfg = GeneratorConfig::new(1.5, 2, 99);
        let a = serde_json::to_string(&generate_instance(&p, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_instance(&p, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn desk_profile_shape() {
        let p = default_desk_profile();
        assert_eq!(p.validate(), Ok(()));
        assert_eq!(p.pilot_roster.len(), 20);
        assert_eq!(p.mission_type_frequencies.len(), 7);
        assert_eq!(p.simulator_type_frequencies.len(), 9);
        assert_eq!(p.num_flight_types(), 16);
        let tags: BTreeSet<_> = p
            .slots_per_flight_type
            .values()
            .flatten()
            .copied()
            .collect();
        assert_eq!(tags.len(), 8);
        for q in 0..8 {
            let holders = p.pilot_roster.iter().filter(|x| x.holds(q)).count();
            assert!(holders >= 4, "tag {q} has {holders} holders");
        }
        for t in 0..16 {
            assert!(!p.duration_samples[&t].is_empty());
        }
        let weekly = p.weekly_mission_mean + p.weekly_simulator_mean;
        assert!((weekly - 801.0 / 26.0 * 20.0 / 87.0).abs() < 0.1);
    }

    #[test]
    fn rejects_bad_profiles() {
        let mut p = default_desk_profile();
        p.weekly_simulator_stddev = -1.0;
        assert_eq!(p.validate(), Err(ProfileError::BadMoments));
        let mut p = default_desk_profile();
        p.duration_samples.remove(&3);
        assert_eq!(p.validate(), Err(ProfileError::NoDurations(3)));
        let mut p = default_desk_profile();
        for v in p.mission_type_frequencies.values_mut() {
            *v = 0;
        }
        assert_eq!(p.validate(), Err(ProfileError::NoTypes("mission")));
        let p = default_desk_profile();
        assert_eq!(
            generate_instance(&p, &GeneratorConfig::new(0.0, 1, 0)),
            Err(ProfileError::BadConfig)
        );
    }

    #[test]
    fn generated_instances_are_valid() {
        let p = default_desk_profile();
        for seed in 0..200 {
            let d = [0.5, 1.0, 2.0, 3.0][seed as usize % 4];
            let inst = generate_instance(&p, &GeneratorConfig::new(d, 1 + seed as u32 % 3, seed)).unwrap();
            assert_eq!(inst.validate(), Ok(()), "seed {seed}");
            for f in &inst.flights {
                assert!((0..7 * 3).contains(&f.start_day));
                assert!((2..=3).contains(&f.slots.len()));
                if f.kind == FlightKind::Simulator {
                    assert_eq!(f.start_day, f.end_day);
                }
            }
        }
    }

    #[test]
    fn weekly_mission_mean_within_three_standard_errors() {
        let p = default_desk_profile();
        let weeks = 10_000u32;
        let inst = generate_instance(&p, &GeneratorConfig::new(1.0, weeks, 5)).unwrap();
        let mut per_week = vec![0u32; weeks as usize];
        for f in inst.flights.iter().filter(|f| f.kind == FlightKind::Mission) {
            per_week[(f.start_day / 7) as usize] += 1;
        }
        let n = weeks as f64;
        let mean = per_week.iter().map(|&c| c as f64).sum::<f64>() / n;
        let var = per_week.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(
            (mean - p.weekly_mission_mean).abs() <= 3.0 * se,
            "mean {mean} vs {} (se {se})",
            p.weekly_mission_mean
        );
    }

    #[test]
    fn flight_types_follow_profile_frequencies() {
        let p = default_desk_profile();
        let inst = generate_instance(&p, &GeneratorConfig::new(1.0, 3500, 11)).unwrap();
        let missions: Vec<_> = inst
            .flights
            .iter()
            .filter(|f| f.kind == FlightKind::Mission)
            .take(10_000)
            .collect();
        assert_eq!(missions.len(), 10_000);
        let total: u32 = p.mission_type_frequencies.values().sum();
        let mut stat = 0.0;
        for (&t, &w) in &p.mission_type_frequencies {
            let observed = missions.iter().filter(|f| f.flight_type == t).count() as f64;
            let expected = 10_000.0 * w as f64 / total as f64;
            stat += (observed - expected).powi(2) / expected;
        }
        let dof = (p.mission_type_frequencies.len() - 1) as f64;
        let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
        assert!(stat < critical, "chi-squared {stat} >= {critical}");
    }
}
