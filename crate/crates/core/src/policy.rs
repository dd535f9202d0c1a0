//! Actor-critic network with hand-written forward and backward passes.
//!
//! A shared two-layer tanh trunk feeds an actor head (one logit per pilot)
//! and a scalar critic head. All parameters live in one flat vector so the
//! optimizer, gradient clipping and finite-difference checks can treat the
//! network as a plain point in `R^n`.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Day, Schedule, ScheduleInstance};
use crate::env::{Env, EnvError, Observation, RewardConfig, RewardVariant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("weights expect {expected} pilots and {expected_types} flight types, instance has {found} and {found_types}")]
    ShapeMismatch {
        expected: usize,
        expected_types: usize,
        found: usize,
        found_types: usize,
    },
    #[error("observation has length {found}, network expects {expected}")]
    InputLength { expected: usize, found: usize },
    #[error("no pilot is available for the current slot")]
    NoAvailablePilot,
    #[error("weights contain non-finite parameters")]
    NonFinite,
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsMetadata {
    pub reward_variant: RewardVariant,
    pub training_density: f64,
    pub seed: u64,
    pub horizon: Day,
    pub t_move: Day,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyWeights {
    pub num_pilots: usize,
    pub num_flight_types: usize,
    pub input_dim: usize,
    pub hidden: [usize; 2],
    /// Divisor applied to day counts and fulfillments in the observation.
    pub obs_scale: f64,
    pub params: Vec<f64>,
    pub metadata: WeightsMetadata,
}

/// Offsets of each parameter block inside `params`.
#[derive(Clone, Copy, Debug)]
struct Layout {
    input: usize,
    h1: usize,
    h2: usize,
    actions: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wa: usize,
    ba: usize,
    wc: usize,
    bc: usize,
    total: usize,
}

impl Layout {
    fn new(input: usize, h1: usize, h2: usize, actions: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + h1 * input;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let wa = b2 + h2;
        let ba = wa + actions * h2;
        let wc = ba + actions;
        let bc = wc + h2;
        Self {
            input,
            h1,
            h2,
            actions,
            w1,
            b1,
            w2,
            b2,
            wa,
            ba,
            wc,
            bc,
            total: bc + 1,
        }
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    x: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let n = x.len();
    for (r, &bias) in b.iter().enumerate() {
        let row = &w[r * n..(r + 1) * n];
        out.push(bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>());
    }
}

/// Softmax restricted to `mask`; masked entries get exactly 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, PolicyError> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(PolicyError::NoAvailablePilot);
    }
    let mut probs: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(probs)
}

impl PolicyWeights {
    pub fn new(
        num_pilots: usize,
        num_flight_types: usize,
        hidden: [usize; 2],
        metadata: WeightsMetadata,
        seed: u64,
    ) -> Self {
        let input_dim = Observation::len_for(num_pilots, num_flight_types);
        let lay = Layout::new(input_dim, hidden[0], hidden[1], num_pilots);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; lay.total];
        let mut fill = |start: usize, fan_in: usize, fan_out: usize, gain: f64| {
            let sd = gain * (2.0 / (fan_in + fan_out) as f64).sqrt();
            let normal = Normal::new(0.0, sd).expect("positive sd");
            for p in &mut params[start..start + fan_in * fan_out] {
                *p = normal.sample(&mut rng);
            }
        };
        fill(lay.w1, lay.input, lay.h1, 1.0);
        fill(lay.w2, lay.h1, lay.h2, 1.0);
        fill(lay.wa, lay.h2, lay.actions, 0.01);
        fill(lay.wc, lay.h2, 1, 1.0);
        Self {
            num_pilots,
            num_flight_types,
            input_dim,
            hidden,
            obs_scale: metadata.horizon.max(1) as f64,
            params,
            metadata,
        }
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input_dim, self.hidden[0], self.hidden[1], self.num_pilots)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Parameter index range of the actor head (weights and biases).
    pub fn actor_head_range(&self) -> std::ops::Range<usize> {
        let l = self.layout();
        l.wa..l.wc
    }

    pub fn check(&self) -> Result<(), PolicyError> {
        if self.params.len() != self.layout().total
            || self.input_dim != Observation::len_for(self.num_pilots, self.num_flight_types)
        {
            return Err(PolicyError::InputLength {
                expected: self.layout().total,
                found: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(PolicyError::NonFinite);
        }
        Ok(())
    }

    pub fn check_instance(&self, inst: &ScheduleInstance) -> Result<(), PolicyError> {
        if inst.pilots.len() != self.num_pilots || inst.num_flight_types != self.num_flight_types {
            return Err(PolicyError::ShapeMismatch {
                expected: self.num_pilots,
                expected_types: self.num_flight_types,
                found: inst.pilots.len(),
                found_types: inst.num_flight_types,
            });
        }
        Ok(())
    }

    pub fn reward_config(&self) -> RewardConfig {
        match self.metadata.reward_variant {
            RewardVariant::Buffer => RewardConfig::buffer(self.metadata.horizon),
            RewardVariant::Moveup => RewardConfig::moveup(self.metadata.horizon, self.metadata.t_move),
        }
    }

    pub fn forward_features(&self, x: &[f64]) -> Result<Forward, PolicyError> {
        if x.len() != self.input_dim {
            return Err(PolicyError::InputLength {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let l = self.layout();
        let p = &self.params;
        let mut h1 = Vec::with_capacity(l.h1);
        affine(&p[l.w1..l.b1], &p[l.b1..l.w2], x, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut h2 = Vec::with_capacity(l.h2);
        affine(&p[l.w2..l.b2], &p[l.b2..l.wa], &h1, &mut h2);
        h2.iter_mut().for_each(|v| *v = v.tanh());
        let mut logits = Vec::with_capacity(l.actions);
        affine(&p[l.wa..l.ba], &p[l.ba..l.wc], &h2, &mut logits);
        let value = p[l.bc] + p[l.wc..l.bc].iter().zip(&h2).map(|(a, b)| a * b).sum::<f64>();
        Ok(Forward {
            x: x.to_vec(),
            h1,
            h2,
            logits,
            value,
        })
    }

    /// Masked action probabilities and state value for one observation.
    pub fn policy_forward(&self, obs: &Observation) -> Result<(Vec<f64>, f64), PolicyError> {
        let fwd = self.forward_features(&obs.features(self.obs_scale))?;
        let probs = masked_softmax(&fwd.logits, &obs.availability)?;
        Ok((probs, fwd.value))
    }

    /// Accumulates into `grad` the parameter gradient of
    /// `sum_k dlogits[k] * logit_k + dvalue * value`.
    pub fn backward(&self, fwd: &Forward, dlogits: &[f64], dvalue: f64, grad: &mut [f64]) {
        let l = self.layout();
        let p = &self.params;
        let mut dh2 = vec![0.0; l.h2];
        for (a, &dl) in dlogits.iter().enumerate() {
            if dl == 0.0 {
                continue;
            }
            grad[l.ba + a] += dl;
            let row = l.wa + a * l.h2;
            for k in 0..l.h2 {
                grad[row + k] += dl * fwd.h2[k];
                dh2[k] += dl * p[row + k];
            }
        }
        grad[l.bc] += dvalue;
        for k in 0..l.h2 {
            grad[l.wc + k] += dvalue * fwd.h2[k];
            dh2[k] += dvalue * p[l.wc + k];
        }
        let dz2: Vec<f64> = dh2
            .iter()
            .zip(&fwd.h2)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        let mut dh1 = vec![0.0; l.h1];
        for (r, &dz) in dz2.iter().enumerate() {
            grad[l.b2 + r] += dz;
            let row = l.w2 + r * l.h1;
            for k in 0..l.h1 {
                grad[row + k] += dz * fwd.h1[k];
                dh1[k] += dz * p[row + k];
            }
        }
        for r in 0..l.h1 {
            let dz = dh1[r] * (1.0 - fwd.h1[r] * fwd.h1[r]);
            if dz == 0.0 {
                continue;
            }
            grad[l.b1 + r] += dz;
            let row = l.w1 + r * l.input;
            for (k, &xk) in fwd.x.iter().enumerate() {
                grad[row + k] += dz * xk;
            }
        }
    }

    /// Log-probability of `action` under the masked policy.
    pub fn log_prob(&self, x: &[f64], mask: &[bool], action: usize) -> Result<f64, PolicyError> {
        let fwd = self.forward_features(x)?;
        Ok(masked_softmax(&fwd.logits, mask)?[action].ln())
    }

    /// Gradient of the log-probability of `action` with respect to all parameters.
    pub fn log_prob_grad(&self, x: &[f64], mask: &[bool], action: usize) -> Result<Vec<f64>, PolicyError> {
        let fwd = self.forward_features(x)?;
        let probs = masked_softmax(&fwd.logits, mask)?;
        let dlogits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, &pk)| if k == action { 1.0 - pk } else { -pk })
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&fwd, &dlogits, 0.0, &mut grad);
        Ok(grad)
    }

    pub fn value_grad(&self, x: &[f64]) -> Result<Vec<f64>, PolicyError> {
        let fwd = self.forward_features(x)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&fwd, &vec![0.0; self.num_pilots], 1.0, &mut grad);
        Ok(grad)
    }
}

/// Worst relative gap between backpropagated and central-difference
/// gradients over every parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    pub actor: f64,
    pub critic: f64,
}

/// Compares [`PolicyWeights::log_prob_grad`] and [`PolicyWeights::value_grad`]
/// against central differences with step `h`. Gaps are relative to the
/// larger magnitude, floored at 1e-6 so that vanishing gradients compare absolutely.
pub fn gradient_check(
    weights: &PolicyWeights,
    x: &[f64],
    mask: &[bool],
    action: usize,
    h: f64,
) -> Result<GradientCheck, PolicyError> {
    let ga = weights.log_prob_grad(x, mask, action)?;
    let gc = weights.value_grad(x)?;
    let mut w = weights.clone();
    let rel = |g: f64, fd: f64| (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
    let mut out = GradientCheck { actor: 0.0, critic: 0.0 };
    for i in 0..w.params.len() {
        let orig = w.params[i];
        w.params[i] = orig + h;
        let (lp_up, v_up) = (w.log_prob(x, mask, action)?, w.forward_features(x)?.value);
        w.params[i] = orig - h;
        let (lp_dn, v_dn) = (w.log_prob(x, mask, action)?, w.forward_features(x)?.value);
        w.params[i] = orig;
        out.actor = out.actor.max(rel(ga[i], (lp_up - lp_dn) / (2.0 * h)));
        out.critic = out.critic.max(rel(gc[i], (v_up - v_dn) / (2.0 * h)));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutMode {
    Greedy,
    Sample,
}

/// Index of the largest probability; the lowest index wins ties.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Samples an index from a probability vector with one uniform draw.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Rolls the environment to termination with the trained policy.
pub fn rl_schedule(
    weights: &PolicyWeights,
    inst: &ScheduleInstance,
    mode: RolloutMode,
    seed: u64,
) -> Result<Schedule, PolicyError> {
    weights.check_instance(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Env::reset(inst, weights.reward_config());
    while let Some(obs) = env.observe() {
        let (probs, _) = weights.policy_forward(&obs)?;
        let pilot = match mode {
            RolloutMode::Greedy => argmax(&probs),
            RolloutMode::Sample => sample_index(&probs, &mut rng),
        };
        env.step(pilot)?;
    }
    Ok(env.into_schedule())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> WeightsMetadata {
        WeightsMetadata {
            reward_variant: RewardVariant::Buffer,
            training_density: 1.0,
            seed: 0,
            horizon: 7,
            t_move: 2,
        }
    }

    #[test]
    fn singleton_and_uniform_softmax() {
        let p = masked_softmax(&[3.0, -1.0, 2.0], &[false, true, false]).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
        let p = masked_softmax(&[0.0; 5], &[true, false, true, true, false]).unwrap();
        for (i, v) in p.iter().enumerate() {
            let expected = if [0, 2, 3].contains(&i) { 1.0 / 3.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-15);
        }
        assert_eq!(
            masked_softmax(&[1.0, 2.0], &[false, false]),
            Err(PolicyError::NoAvailablePilot)
        );
    }

    #[test]
    fn parameter_count_matches_layout() {
        let w = PolicyWeights::new(20, 16, [128, 128], meta(), 1);
        let input = 3 * 20 + 16 + 5;
        assert_eq!(w.input_dim, input);
        assert_eq!(
            w.num_params(),
            128 * input + 128 + 128 * 128 + 128 + 20 * 128 + 20 + 128 + 1
        );
        assert_eq!(w.check(), Ok(()));
    }

    #[test]
    fn log_prob_gradient_matches_finite_difference() {
        let mut w = PolicyWeights::new(4, 3, [6, 5], meta(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..w.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mask = [true, false, true, true];
        let g = w.log_prob_grad(&x, &mask, 2).unwrap();
        let h = 1e-6;
        for i in 0..w.num_params() {
            let orig = w.params[i];
            w.params[i] = orig + h;
            let up = w.log_prob(&x, &mask, 2).unwrap();
            w.params[i] = orig - h;
            let down = w.log_prob(&x, &mask, 2).unwrap();
            w.params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn greedy_tie_breaks_low() {
        assert_eq!(argmax(&[0.25, 0.5, 0.5]), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], &mut rng), 1);
    }
}
