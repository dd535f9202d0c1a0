//! Oracle suites behind `crew selftest`.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use crew_core::domain::{buffer_days, Day, Flight, FlightKind, Pilot, ScheduleInstance, Slot};
use crew_core::env::{Env, RewardConfig, RewardVariant};
use crew_core::formulation::penalty;
use crew_core::generator::{default_desk_profile, generate_instance, GeneratorConfig};
use crew_core::policy::{gradient_check, PolicyWeights, WeightsMetadata};
use crew_milp::oracle::{brute_force, random_ip};
use crew_milp::{solve, SolveStatus};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} {}: {}", self.name, self.detail)
    }
}

/// Branch-and-bound against exhaustive enumeration on random 0/1 programs.
pub fn solver_oracle(count: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for k in 0..count {
        let ip = random_ip(&mut rng, 14, 10);
        let truth = brute_force(&ip).map(|(obj, _)| obj);
        let got = match solve(&ip, Duration::from_secs(30)) {
            Ok(r) if r.status == SolveStatus::Optimal => r.objective_value,
            Ok(r) if r.status == SolveStatus::Infeasible => None,
            Ok(r) => {
                mismatches.push(format!("#{k}: stopped with {}", r.status));
                continue;
            }
            Err(e) => {
                mismatches.push(format!("#{k}: {e}"));
                continue;
            }
        };
        if got != truth {
            mismatches.push(format!("#{k}: got {got:?}, enumeration {truth:?}"));
        }
    }
    let detail = format!(
        "{}/{count} programs agree in {:.2}s{}",
        count - mismatches.len(),
        start.elapsed().as_secs_f64(),
        mismatches.first().map_or(String::new(), |m| format!(", first mismatch {m}"))
    );
    Check::new("solver-oracle", mismatches.is_empty(), detail)
}

/// One pilot holding qualification 0; one single-slot flight per `(start, end)`.
fn single_pilot_instance(flights: &[(Day, Day)]) -> ScheduleInstance {
    let flights: Vec<Flight> = flights
        .iter()
        .enumerate()
        .map(|(id, &(start_day, end_day))| Flight {
            id,
            kind: FlightKind::Mission,
            flight_type: 0,
            start_day,
            end_day,
            slots: vec![id],
        })
        .collect();
    ScheduleInstance {
        pilots: vec![Pilot {
            id: 0,
            qualifications: BTreeSet::from([0]),
            leave: Vec::new(),
        }],
        slots: (0..flights.len())
            .map(|id| Slot {
                id,
                flight_id: id,
                required_qualification: 0,
            })
            .collect(),
        horizon_days: 10,
        num_flight_types: 1,
        training_matrix: vec![vec![0; flights.len()]],
        trq_flags: vec![[false; 2]; flights.len()],
        flights,
    }
}

/// Exact reward and penalty values on hand-built examples.
pub fn reward_units() -> Check {
    let mut failures = Vec::new();
    let mut expect = |what: &str, got: f64, want: f64| {
        if got != want {
            failures.push(format!("{what} = {got}, expected {want}"));
        }
    };
    expect("buffer_days(1, 5)", buffer_days(1, 5).map_or(f64::NAN, f64::from), 3.0);
    expect("penalty(0, 4)", penalty(0, 4).unwrap_or(f64::NAN), -1.0);
    expect("penalty(4, 4)", penalty(4, 4).unwrap_or(f64::NAN), -0.2);

    let cfg = RewardConfig::buffer(7);
    let inst = single_pilot_instance(&[(1, 1), (7, 7), (9, 9)]);
    let mut env = Env::reset(&inst, cfg);
    let rewards: Vec<f64> = (0..3).filter_map(|_| env.step(0).ok().map(|o| o.reward)).collect();
    expect("first placement", rewards.first().copied().unwrap_or(f64::NAN), 6.0);
    expect("day 1 then day 7", rewards.get(1).copied().unwrap_or(f64::NAN), 6.0);
    expect("completing step", rewards.get(2).copied().unwrap_or(f64::NAN), 2.0 + 25.0);

    let dead = single_pilot_instance(&[(0, 1), (1, 1)]);
    let mut env = Env::reset(&dead, cfg);
    let r = env.step(0).map_or(f64::NAN, |o| o.reward);
    expect("dead-end step", r, 6.0 - 10.0);
    expect("complete bonus", cfg.complete_bonus, 25.0);
    expect("incomplete penalty", cfg.incomplete_penalty, -10.0);

    let passed = failures.is_empty();
    let detail = if passed {
        "buffer days, penalties, step and terminal rewards exact".into()
    } else {
        failures.join("; ")
    };
    Check::new("reward-units", passed, detail)
}

/// Observations met by a uniformly random policy on desk instances, with
/// the availability mask and a legal action for each.
pub fn random_observations(count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<bool>, usize)> {
    let profile = default_desk_profile();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reward = RewardConfig::buffer(7);
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count {
        let inst = generate_instance(&profile, &GeneratorConfig::new(1.0, 1, seed.wrapping_add(k)))
            .expect("desk profile is valid");
        k += 1;
        let mut env = Env::reset(&inst, reward);
        while let Some(obs) = env.observe() {
            let legal: Vec<usize> = (0..obs.availability.len()).filter(|&i| obs.availability[i]).collect();
            let Some(&a) = legal.choose(&mut rng) else { break };
            if rng.random_bool(0.3) && out.len() < count {
                out.push((obs.features(f64::from(reward.horizon)), obs.availability.clone(), a));
            }
            if env.step(a).is_err() {
                break;
            }
        }
    }
    out
}

/// Backpropagated actor and critic gradients against central differences.
pub fn gradient_checks(count: usize, seed: u64) -> Check {
    let profile = default_desk_profile();
    let meta = WeightsMetadata {
        reward_variant: RewardVariant::Buffer,
        training_density: 1.0,
        seed,
        horizon: 7,
        t_move: 2,
    };
    let mut w = PolicyWeights::new(profile.num_pilots(), profile.num_flight_types(), [32, 32], meta, seed);
    // Fresh actor heads are scaled down; spread them so every block carries signal.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    for p in &mut w.params {
        *p += rng.random_range(-0.2..0.2);
    }
    let (mut actor, mut critic) = (0.0f64, 0.0f64);
    let mut errors = Vec::new();
    for (x, mask, a) in random_observations(count, seed) {
        match gradient_check(&w, &x, &mask, a, 1e-5) {
            Ok(g) => {
                actor = actor.max(g.actor);
                critic = critic.max(g.critic);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let passed = errors.is_empty() && actor <= 1e-4 && critic <= 1e-4;
    let detail = format!(
        "{count} observations, worst relative error actor {actor:.2e}, critic {critic:.2e} (limit 1e-4){}",
        errors.first().map_or(String::new(), |e| format!(", {e}"))
    );
    Check::new("gradient-check", passed, detail)
}

pub fn run_all(seed: u64) -> Vec<Check> {
    vec![solver_oracle(500, seed), reward_units(), gradient_checks(20, seed)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(solver_oracle(40, 3).passed);
        let r = reward_units();
        assert!(r.passed, "{}", r.detail);
        let g = gradient_checks(3, 5);
        assert!(g.passed, "{}", g.detail);
    }

    #[test]
    fn observations_carry_legal_actions() {
        for (x, mask, a) in random_observations(10, 1) {
            assert!(mask[a]);
            assert_eq!(x.len(), 3 * mask.len() + default_desk_profile().num_flight_types() + 5);
        }
    }
}
