//! Objective coefficients read off a trained policy.

use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ScheduleInstance, SlotId};
use crate::env::Env;
use crate::policy::{argmax, sample_index, PolicyError, PolicyWeights, RolloutMode};
use crate::seeds::SeedSplitter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExtractionMethod {
    MonteCarlo { n: usize },
    BlankSlate,
}

impl ExtractionMethod {
    /// `n = 0` selects the blank-slate method.
    pub fn from_n(n: usize) -> Self {
        if n == 0 {
            ExtractionMethod::BlankSlate
        } else {
            ExtractionMethod::MonteCarlo { n }
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ExtractionMethod::MonteCarlo { n } => *n,
            ExtractionMethod::BlankSlate => 0,
        }
    }
}

/// `values[pilot][slot]` in `[0, 1]`; ineligible pairs are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMatrix {
    pub values: Vec<Vec<f64>>,
    pub method: ExtractionMethod,
    /// Seed of the weights the matrix was read from.
    pub source_seed: u64,
}

impl CoefficientMatrix {
    pub fn zeros(pilots: usize, slots: usize) -> Self {
        Self {
            values: vec![vec![0.0; slots]; pilots],
            method: ExtractionMethod::BlankSlate,
            source_seed: 0,
        }
    }

    /// Largest per-slot column sum.
    pub fn max_slot_sum(&self) -> f64 {
        let slots = self.values.first().map_or(0, Vec::len);
        (0..slots)
            .map(|s| self.values.iter().map(|row| row[s]).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Mean per-slot policy probabilities over `n` rollouts in shuffled slot
/// orders. A slot a rollout never reaches contributes zeros.
pub fn extract_montecarlo(
    weights: &PolicyWeights,
    inst: &ScheduleInstance,
    n: usize,
    seed: u64,
    mode: RolloutMode,
) -> Result<CoefficientMatrix, PolicyError> {
    assert!(n >= 1, "Monte Carlo extraction needs at least one rollout");
    let seeds = SeedSplitter::new(seed);
    let orders: Vec<Vec<SlotId>> = (0..n as u64)
        .map(|run| {
            let mut order: Vec<SlotId> = (0..inst.slots.len()).collect();
            order.shuffle(&mut seeds.rng("rollout", run));
            order
        })
        .collect();
    extract_with_orders(weights, inst, &orders, seed, mode)
}

/// [`extract_montecarlo`] over caller-chosen slot orders, one rollout each.
/// Sampled actions in run `k` draw from the `("actions", k)` stream of `seed`.
pub fn extract_with_orders(
    weights: &PolicyWeights,
    inst: &ScheduleInstance,
    orders: &[Vec<SlotId>],
    seed: u64,
    mode: RolloutMode,
) -> Result<CoefficientMatrix, PolicyError> {
    assert!(!orders.is_empty(), "Monte Carlo extraction needs at least one rollout");
    weights.check_instance(inst)?;
    let seeds = SeedSplitter::new(seed);
    let (pilots, slots) = (inst.pilots.len(), inst.slots.len());
    let mut sums = vec![vec![0.0; slots]; pilots];
    for (run, order) in orders.iter().enumerate() {
        let mut rng = seeds.rng("actions", run as u64);
        let mut env = Env::with_order(inst, weights.reward_config(), order.clone());
        while let Some(obs) = env.observe() {
            let slot = env.current_slot().expect("episode running");
            let (probs, _) = weights.policy_forward(&obs)?;
            for (p, &pr) in probs.iter().enumerate() {
                sums[p][slot] += pr;
            }
            let pilot = match mode {
                RolloutMode::Sample => sample_index(&probs, &mut rng),
                RolloutMode::Greedy => argmax(&probs),
            };
            env.step(pilot)?;
        }
    }
    let n = orders.len();
    for row in &mut sums {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }
    Ok(CoefficientMatrix {
        values: sums,
        method: ExtractionMethod::MonteCarlo { n },
        source_seed: weights.metadata.seed,
    })
}

/// Each slot's probabilities read as if it were the first slot of an empty schedule.
pub fn extract_blank_slate(
    weights: &PolicyWeights,
    inst: &ScheduleInstance,
) -> Result<CoefficientMatrix, PolicyError> {
    weights.check_instance(inst)?;
    let (pilots, slots) = (inst.pilots.len(), inst.slots.len());
    let mut values = vec![vec![0.0; slots]; pilots];
    let empty = Env::with_order(inst, weights.reward_config(), Vec::new());
    for s in 0..slots {
        let obs = empty.observe_slot(s);
        if !obs.any_available() {
            continue;
        }
        let (probs, _) = weights.policy_forward(&obs)?;
        for (p, &pr) in probs.iter().enumerate() {
            values[p][s] = pr;
        }
    }
    Ok(CoefficientMatrix {
        values,
        method: ExtractionMethod::BlankSlate,
        source_seed: weights.metadata.seed,
    })
}

/// Dispatches on the method; `seed` only matters for Monte Carlo.
pub fn extract(
    weights: &PolicyWeights,
    inst: &ScheduleInstance,
    method: ExtractionMethod,
    seed: u64,
) -> Result<CoefficientMatrix, PolicyError> {
    match method {
        ExtractionMethod::BlankSlate => extract_blank_slate(weights, inst),
        ExtractionMethod::MonteCarlo { n } => {
            extract_montecarlo(weights, inst, n, seed, RolloutMode::Sample)
        }
    }
}
