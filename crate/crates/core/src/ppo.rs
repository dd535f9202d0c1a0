//! Proximal policy optimization on freshly generated instances.

use rand::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Day;
use crate::env::{Env, RewardConfig, RewardVariant};
use crate::generator::{generate_instance, DatasetProfile, GeneratorConfig, ProfileError};
use crate::policy::{
    argmax, masked_softmax, sample_index, PolicyError, PolicyWeights, RolloutMode, WeightsMetadata,
};
use crate::seeds::SeedSplitter;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub density: f64,
    pub weeks: u32,
    pub seed: u64,
    pub total_episodes: usize,
    pub reward: RewardVariant,
    pub t_move: Day,
    pub hidden: [usize; 2],
    pub clip: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_steps: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Multiplies environment rewards before they reach the learner.
    pub reward_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            density: 1.0,
            weeks: 1,
            seed: 0,
            total_episodes: 3000,
            reward: RewardVariant::Buffer,
            t_move: 2,
            hidden: [128, 128],
            clip: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            epochs: 4,
            batch_steps: 2048,
            minibatch_size: 256,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            reward_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("training diverged at update {update}: {what} is not finite")]
    Divergence { update: usize, what: &'static str },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub episode: usize,
    #[serde(rename = "return")]
    pub mean_return: f64,
    pub completion_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub weights: PolicyWeights,
    pub log: Vec<TrainLogRow>,
}

struct Transition {
    x: Vec<f64>,
    mask: Vec<bool>,
    action: usize,
    log_prob: f64,
    value: f64,
    reward: f64,
    done: bool,
}

/// Per-sample clipped surrogate loss `-min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn ppo_policy_loss(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    -(ratio * advantage).min(clipped * advantage)
}

/// Whether the unclipped branch is active, i.e. the loss depends on the ratio.
fn surrogate_active(ratio: f64, advantage: f64, clip: f64) -> bool {
    if advantage >= 0.0 {
        ratio <= 1.0 + clip
    } else {
        ratio >= 1.0 - clip
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("density must be positive");
        }
        if self.weeks == 0 || self.epochs == 0 || self.batch_steps == 0 || self.minibatch_size == 0 {
            return bad("weeks, epochs, batch_steps and minibatch_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if self.clip <= 0.0 || self.learning_rate <= 0.0 || self.reward_scale <= 0.0 {
            return bad("clip, learning_rate and reward_scale must be positive");
        }
        Ok(())
    }

    pub fn horizon(&self) -> Day {
        7 * self.weeks as Day
    }

    pub fn reward_config(&self) -> RewardConfig {
        match self.reward {
            RewardVariant::Buffer => RewardConfig::buffer(self.horizon()),
            RewardVariant::Moveup => RewardConfig::moveup(self.horizon(), self.t_move),
        }
    }

    pub fn initial_weights(&self, profile: &DatasetProfile) -> PolicyWeights {
        let seeds = SeedSplitter::new(self.seed);
        PolicyWeights::new(
            profile.num_pilots(),
            profile.num_flight_types(),
            self.hidden,
            WeightsMetadata {
                reward_variant: self.reward,
                training_density: self.density,
                seed: self.seed,
                horizon: self.horizon(),
                t_move: self.t_move,
            },
            seeds.seed("init", 0),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalStats {
    pub mean_return: f64,
    pub completion_rate: f64,
    pub episodes: usize,
}

/// Runs one episode; returns its undiscounted return and completion flag.
fn run_episode<R: Rng>(
    weights: &PolicyWeights,
    env: &mut Env<'_>,
    mode: RolloutMode,
    rng: &mut R,
    mut record: impl FnMut(Transition),
) -> Result<(f64, bool), PolicyError> {
    let mut total = 0.0;
    while let Some(obs) = env.observe() {
        let x = obs.features(weights.obs_scale);
        let fwd = weights.forward_features(&x)?;
        let probs = masked_softmax(&fwd.logits, &obs.availability)?;
        let action = match mode {
            RolloutMode::Greedy => argmax(&probs),
            RolloutMode::Sample => sample_index(&probs, rng),
        };
        let out = env.step(action)?;
        total += out.reward;
        record(Transition {
            x,
            mask: obs.availability,
            action,
            log_prob: probs[action].ln(),
            value: fwd.value,
            reward: out.reward,
            done: out.done,
        });
    }
    Ok((total, env.is_complete()))
}

/// Mean return and completion rate over `episodes` instances drawn from the
/// named evaluation stream of `seed`.
pub fn evaluate(
    weights: &PolicyWeights,
    profile: &DatasetProfile,
    density: f64,
    episodes: usize,
    seed: u64,
    mode: RolloutMode,
) -> Result<EvalStats, TrainError> {
    let seeds = SeedSplitter::new(seed);
    let mut rng = seeds.rng("eval-actions", 0);
    let weeks = (weights.metadata.horizon / 7).max(1) as u32;
    let mut total = 0.0;
    let mut complete = 0;
    for e in 0..episodes {
        let cfg = GeneratorConfig::new(density, weeks, seeds.seed("eval-instance", e as u64));
        let inst = generate_instance(profile, &cfg)?;
        let mut env = Env::reset(&inst, weights.reward_config());
        let (ret, done) = run_episode(weights, &mut env, mode, &mut rng, |_| {})?;
        total += ret;
        complete += done as usize;
    }
    Ok(EvalStats {
        mean_return: total / episodes.max(1) as f64,
        completion_rate: complete as f64 / episodes.max(1) as f64,
        episodes,
    })
}

/// Trains an actor-critic policy with PPO. Identical configs give identical weights.
pub fn train_ppo(profile: &DatasetProfile, cfg: &TrainConfig) -> Result<TrainOutput, TrainError> {
    train_ppo_from(profile, cfg, cfg.initial_weights(profile))
}

pub fn train_ppo_from(
    profile: &DatasetProfile,
    cfg: &TrainConfig,
    mut weights: PolicyWeights,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    profile.validate()?;
    let seeds = SeedSplitter::new(cfg.seed);
    let mut action_rng = seeds.rng("train-actions", 0);
    let mut shuffle_rng = seeds.rng("train-shuffle", 0);
    let reward_cfg = cfg.reward_config();
    let mut adam = Adam::new(weights.num_params());
    let mut log = Vec::new();
    let mut episode = 0usize;
    let mut update = 0usize;

    while episode < cfg.total_episodes {
        let mut batch: Vec<Transition> = Vec::with_capacity(cfg.batch_steps + 64);
        let mut returns = Vec::new();
        let mut completed = 0usize;
        while batch.len() < cfg.batch_steps && episode < cfg.total_episodes {
            let gen = GeneratorConfig::new(cfg.density, cfg.weeks, seeds.seed("train-instance", episode as u64));
            let inst = generate_instance(profile, &gen)?;
            episode += 1;
            let mut env = Env::reset(&inst, reward_cfg);
            let (ret, complete) =
                run_episode(&weights, &mut env, RolloutMode::Sample, &mut action_rng, |t| batch.push(t))?;
            if env.cursor() == 0 && !complete {
                continue;
            }
            returns.push(ret);
            completed += complete as usize;
        }
        if batch.is_empty() {
            continue;
        }

        // Generalized advantage estimation; every episode ends inside the batch.
        let n = batch.len();
        let mut adv = vec![0.0; n];
        let mut next_value = 0.0;
        let mut next_adv = 0.0;
        for t in (0..n).rev() {
            let tr = &batch[t];
            if tr.done {
                next_value = 0.0;
                next_adv = 0.0;
            }
            let delta = tr.reward * cfg.reward_scale + cfg.gamma * next_value - tr.value;
            next_adv = delta + cfg.gamma * cfg.gae_lambda * next_adv;
            adv[t] = next_adv;
            next_value = tr.value;
        }
        let targets: Vec<f64> = adv.iter().zip(&batch).map(|(a, t)| a + t.value).collect();
        let mean = adv.iter().sum::<f64>() / n as f64;
        let sd = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let norm_adv: Vec<f64> = adv.iter().map(|a| (a - mean) / (sd + 1e-8)).collect();

        let mut order: Vec<usize> = (0..n).collect();
        let (mut pl_sum, mut vl_sum, mut ent_sum, mut count) = (0.0, 0.0, 0.0, 0usize);
        let mut grad = vec![0.0; weights.num_params()];
        for _ in 0..cfg.epochs {
            order.shuffle(&mut shuffle_rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / chunk.len() as f64;
                for &i in chunk {
                    let tr = &batch[i];
                    let fwd = weights.forward_features(&tr.x)?;
                    let probs = masked_softmax(&fwd.logits, &tr.mask)?;
                    let logp = probs[tr.action].ln();
                    let ratio = (logp - tr.log_prob).exp();
                    let a = norm_adv[i];
                    let entropy: f64 = -probs
                        .iter()
                        .filter(|&&p| p > 0.0)
                        .map(|p| p * p.ln())
                        .sum::<f64>();
                    pl_sum += ppo_policy_loss(ratio, a, cfg.clip);
                    vl_sum += (fwd.value - targets[i]).powi(2);
                    ent_sum += entropy;
                    count += 1;

                    let g_logp = if surrogate_active(ratio, a, cfg.clip) {
                        -ratio * a
                    } else {
                        0.0
                    };
                    let dlogits: Vec<f64> = probs
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| {
                            let onehot = if k == tr.action { 1.0 } else { 0.0 };
                            let ent = if p > 0.0 {
                                cfg.entropy_coef * p * (p.ln() + entropy)
                            } else {
                                0.0
                            };
                            scale * (g_logp * (onehot - p) + ent)
                        })
                        .collect();
                    let dvalue = scale * 2.0 * cfg.value_coef * (fwd.value - targets[i]);
                    weights.backward(&fwd, &dlogits, dvalue, &mut grad);
                }
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if !norm.is_finite() {
                    return Err(TrainError::Divergence {
                        update,
                        what: "gradient norm",
                    });
                }
                if norm > cfg.max_grad_norm {
                    let k = cfg.max_grad_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= k);
                }
                adam.step(&mut weights.params, &grad, cfg.learning_rate);
            }
        }
        let denom = count.max(1) as f64;
        let row = TrainLogRow {
            episode,
            mean_return: returns.iter().sum::<f64>() / returns.len().max(1) as f64,
            completion_rate: completed as f64 / returns.len().max(1) as f64,
            policy_loss: pl_sum / denom,
            value_loss: vl_sum / denom,
            entropy: ent_sum / denom,
        };
        if !(row.policy_loss.is_finite() && row.value_loss.is_finite()) {
            return Err(TrainError::Divergence {
                update,
                what: "loss",
            });
        }
        weights.check().map_err(|_| TrainError::Divergence {
            update,
            what: "parameters",
        })?;
        log.push(row);
        update += 1;
    }
    Ok(TrainOutput { weights, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::default_desk_profile;

    #[test]
    fn clipped_loss_is_flat_outside_the_trust_region() {
        let eps = 0.2;
        for &a in &[0.7, 2.0] {
            let hi = ppo_policy_loss(1.3, a, eps);
            assert_eq!(hi, ppo_policy_loss(1.9, a, eps));
            assert!(!surrogate_active(1.3, a, eps));
            assert!(ppo_policy_loss(1.0, a, eps) > hi);
        }
        for &a in &[-0.7, -2.0] {
            let lo = ppo_policy_loss(0.7, a, eps);
            assert_eq!(lo, ppo_policy_loss(0.1, a, eps));
            assert!(!surrogate_active(0.7, a, eps));
        }
    }

    fn tiny() -> TrainConfig {
        TrainConfig {
            total_episodes: 40,
            batch_steps: 128,
            minibatch_size: 64,
            epochs: 2,
            hidden: [16, 16],
            seed: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn identical_seeds_identical_weights() {
        let p = default_desk_profile();
        let a = train_ppo(&p, &tiny()).unwrap();
        let b = train_ppo(&p, &tiny()).unwrap();
        assert_eq!(a.weights.params, b.weights.params);
        assert_eq!(a.log, b.log);
        assert!(!a.log.is_empty());
    }

    #[test]
    fn rejects_bad_config() {
        let p = default_desk_profile();
        let cfg = TrainConfig {
            clip: 0.0,
            ..tiny()
        };
        assert!(matches!(train_ppo(&p, &cfg), Err(TrainError::Config(_))));
    }
}
