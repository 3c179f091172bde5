//! Clipped-surrogate PPO with GAE advantages.
//!
//! The minimized loss for a minibatch of `B` samples is
//!
//! ```text
//! L = -(1/B) Σ min(ρ·A, clip(ρ, 1-ε, 1+ε)·A)
//!     + c_v · (1/B) Σ (V(s) - R)²
//!     - c_e · (1/B) Σ H(π(·|s))
//! ```
//!
//! with `ρ = exp(log π(a|s) - log π_old(a|s))`. Gradients are analytic.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::policy::{bernoulli_entropy, bernoulli_log_prob, sigmoid, PolicyNetwork};
use crate::error::{Error, Result};
use crate::model::PlacementVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Environment steps collected between updates.
    pub update_interval: usize,
    /// Global gradient-norm cap; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            epochs_per_update: 10,
            minibatch_size: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            update_interval: 256,
            max_grad_norm: Some(0.5),
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.clip_epsilon > 0.0) {
            return bad("clip_epsilon must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if self.epochs_per_update == 0 || self.minibatch_size == 0 || self.update_interval == 0 {
            return bad("epochs_per_update, minibatch_size and update_interval must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: PlacementVector,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Value estimate of the state following the last transition; used only
    /// when that transition did not end an episode.
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }
}

/// Generalized advantage estimates and value targets (unnormalized).
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = traj.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let tr = &traj.transitions[t];
        let (next_value, carry) = if tr.done {
            (0.0, 0.0)
        } else if t + 1 == n {
            (traj.bootstrap_value, 0.0)
        } else {
            (traj.transitions[t + 1].value, running)
        };
        let delta = tr.reward + gamma * next_value - tr.value;
        running = delta + gamma * lambda * carry;
        adv[t] = running;
    }
    let returns = adv
        .iter()
        .zip(&traj.transitions)
        .map(|(a, t)| a + t.value)
        .collect();
    (adv, returns)
}

/// One training example for the surrogate loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub action: PlacementVector,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub target: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Loss over `batch` and its gradient with respect to every network parameter.
pub fn ppo_loss_and_grad(
    net: &PolicyNetwork,
    batch: &[Sample],
    clip_epsilon: f64,
    value_coef: f64,
    entropy_coef: f64,
) -> (LossBreakdown, Vec<f64>) {
    let mut grad = vec![0.0; net.param_count()];
    let mut out = LossBreakdown::default();
    if batch.is_empty() {
        return (out, grad);
    }
    let b = batch.len() as f64;
    let n = net.n_nodes();
    let mut clipped = 0usize;
    let mut d_out = vec![0.0; n + 1];
    for s in batch {
        let cache = net.mlp().forward_cached(&net.scale_input(&s.state));
        let o = cache.output();
        let logits = &o[..n];
        let value = o[n];

        let log_prob: f64 = logits
            .iter()
            .zip(&s.action.0)
            .map(|(&z, &a)| bernoulli_log_prob(z, a))
            .sum();
        let ratio = (log_prob - s.old_log_prob).exp();
        let a = s.advantage;
        let clipped_ratio = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
        let surrogate = (ratio * a).min(clipped_ratio * a);
        // d surrogate / d log π: zero where the clipped branch is the minimum
        // and binds, ρ·A elsewhere.
        let in_clip = (a > 0.0 && ratio > 1.0 + clip_epsilon) || (a < 0.0 && ratio < 1.0 - clip_epsilon);
        let d_surr = if in_clip { 0.0 } else { ratio * a };
        if in_clip {
            clipped += 1;
        }
        let entropy: f64 = logits.iter().map(|&z| bernoulli_entropy(z)).sum();
        let err = value - s.target;

        out.policy_loss -= surrogate / b;
        out.value_loss += err * err / b;
        out.entropy += entropy / b;
        out.approx_kl += (s.old_log_prob - log_prob) / b;

        for (i, (&z, &on)) in logits.iter().zip(&s.action.0).enumerate() {
            let p = sigmoid(z);
            let d_logp = if on { 1.0 - p } else { -p };
            // dH/dz = -z·p·(1-p)
            let d_ent = -z * p * (1.0 - p);
            d_out[i] = (-d_surr * d_logp - entropy_coef * d_ent) / b;
        }
        d_out[n] = value_coef * 2.0 * err / b;
        net.mlp().backward(&cache, &d_out, &mut grad);
    }
    out.clip_fraction = clipped as f64 / b;
    out.total = out.policy_loss + value_coef * out.value_loss - entropy_coef * out.entropy;
    (out, grad)
}

/// Scalar loss only; used by finite-difference checks.
pub fn ppo_loss(net: &PolicyNetwork, batch: &[Sample], cfg: &PpoConfig) -> f64 {
    ppo_loss_and_grad(net, batch, cfg.clip_epsilon, cfg.value_coef, cfg.entropy_coef)
        .0
        .total
}

/// Build normalized training samples from a trajectory.
pub fn prepare_samples(traj: &Trajectory, cfg: &PpoConfig) -> Vec<Sample> {
    let (adv, returns) = compute_gae(traj, cfg.gamma, cfg.gae_lambda);
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    traj.transitions
        .iter()
        .zip(adv.iter().zip(&returns))
        .map(|(t, (a, r))| Sample {
            state: t.state.clone(),
            action: t.action.clone(),
            old_log_prob: t.log_prob,
            advantage: (a - mean) / std,
            target: *r,
        })
        .collect()
}

/// Run the configured epochs of minibatch updates over one trajectory.
pub fn ppo_update(
    net: &mut PolicyNetwork,
    opt: &mut Adam,
    traj: &Trajectory,
    cfg: &PpoConfig,
    rng: &mut impl Rng,
) -> Result<LossBreakdown> {
    if traj.is_empty() {
        return Ok(LossBreakdown::default());
    }
    let samples = prepare_samples(traj, cfg);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut mean = LossBreakdown::default();
    let mut batches = 0usize;
    for _ in 0..cfg.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&k| samples[k].clone()).collect();
            let (loss, mut grad) =
                ppo_loss_and_grad(net, &batch, cfg.clip_epsilon, cfg.value_coef, cfg.entropy_coef);
            if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "policy {} value {} entropy {}",
                    loss.policy_loss, loss.value_loss, loss.entropy
                )));
            }
            if let Some(cap) = cfg.max_grad_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > cap {
                    let k = cap / norm;
                    grad.iter_mut().for_each(|g| *g *= k);
                }
            }
            opt.apply(net.params_mut(), &grad, cfg.learning_rate);
            mean.total += loss.total;
            mean.policy_loss += loss.policy_loss;
            mean.value_loss += loss.value_loss;
            mean.entropy += loss.entropy;
            mean.clip_fraction += loss.clip_fraction;
            mean.approx_kl += loss.approx_kl;
            batches += 1;
        }
    }
    let k = batches as f64;
    mean.total /= k;
    mean.policy_loss /= k;
    mean.value_loss /= k;
    mean.entropy /= k;
    mean.clip_fraction /= k;
    mean.approx_kl /= k;
    Ok(mean)
}
