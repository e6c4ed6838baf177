//! Masked PPO-Clip: a softmax actor whose infeasible logits are dropped
//! before normalization, a separate value network, and clipped-surrogate
//! updates over short rollouts.

use alb_sim::ActionMask;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::masking::{masked_log_prob, masked_softmax, sample_from_probs};
use crate::net::{DenseNet, Head};
use crate::rollout::{compute_gae, normalize, RolloutBuffer, RolloutStep};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    /// Environment steps per learning phase.
    pub learning_frequency: usize,
    pub learning_epochs: usize,
    pub batch_size: usize,
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 3e-4,
            discount: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            learning_frequency: 20,
            learning_epochs: 4,
            batch_size: 5,
            entropy_coef: 0.01,
        }
    }
}

/// Feasibility-filtered action distribution: logits of masked actions are
/// treated as negative infinity, so they come out with exactly zero
/// probability and the feasible ones renormalize through the softmax.
pub fn ppo_policy(actor: &DenseNet, state: &[f64], mask: &ActionMask) -> Vec<f64> {
    let logits = actor.forward(state);
    masked_softmax(&logits, mask)
}

/// Log-probability of an executed (possibly coordinator-substituted) action
/// under the current policy; this is what the rollout stores.
pub fn compute_probs_new_action(
    actor: &DenseNet,
    state: &[f64],
    action: usize,
    mask: &ActionMask,
) -> f64 {
    assert!(mask.get(action), "substituted action must be feasible under the mask");
    let logits = actor.forward(state);
    masked_log_prob(&logits, mask, action)
}

/// Losses averaged over one learning phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoLosses {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

pub struct PpoAgent {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub config: PpoConfig,
    pub rollout: RolloutBuffer,
}

impl PpoAgent {
    /// Builds actor and critic with the same hidden stack; the critic ends
    /// in a single-value head.
    pub fn new(sizes: &[usize], config: PpoConfig, rng: &mut impl Rng) -> Self {
        let actor = DenseNet::init(sizes, Head::SoftmaxLogits, rng);
        let mut critic_sizes = sizes.to_vec();
        *critic_sizes.last_mut().unwrap() = 1;
        let critic = DenseNet::init(&critic_sizes, Head::Linear, rng);
        let actor_opt = Adam::new(&actor, config.learning_rate);
        let critic_opt = Adam::new(&critic, config.learning_rate);
        PpoAgent { actor, critic, actor_opt, critic_opt, config, rollout: RolloutBuffer::new() }
    }

    pub fn value(&self, state: &[f64]) -> f64 {
        self.critic.forward(state)[0]
    }

    /// Samples an action from the filtered distribution; returns the action
    /// and its log-probability.
    pub fn select(&self, state: &[f64], mask: &ActionMask, rng: &mut impl Rng) -> (usize, f64) {
        let probs = ppo_policy(&self.actor, state, mask);
        let action = sample_from_probs(&probs, rng);
        (action, probs[action].ln())
    }

    pub fn rollout_full(&self) -> bool {
        self.rollout.len() >= self.config.learning_frequency
    }

    /// Clipped-surrogate update over the buffered rollout.
    /// `bootstrap_value` estimates the state after the final step (ignored
    /// when that step ended its episode).
    pub fn learn(&mut self, bootstrap_value: f64, rng: &mut impl Rng) -> PpoLosses {
        let steps = self.rollout.drain();
        ppo_learn_step(
            &mut self.actor,
            &mut self.critic,
            &mut self.actor_opt,
            &mut self.critic_opt,
            &steps,
            bootstrap_value,
            &self.config,
            rng,
        )
    }
}

/// Runs `learning_epochs` passes of shuffled minibatches over the rollout,
/// updating actor (clipped surrogate plus entropy bonus) and critic (squared
/// error to the GAE returns). Advantages are normalized per rollout.
#[allow(clippy::too_many_arguments)]
pub fn ppo_learn_step(
    actor: &mut DenseNet,
    critic: &mut DenseNet,
    actor_opt: &mut Adam,
    critic_opt: &mut Adam,
    steps: &[RolloutStep],
    bootstrap_value: f64,
    config: &PpoConfig,
    rng: &mut impl Rng,
) -> PpoLosses {
    let n = steps.len();
    assert!(n > 0, "cannot learn from an empty rollout");
    let (mut advantages, returns) =
        compute_gae(steps, bootstrap_value, config.discount, config.gae_lambda);
    normalize(&mut advantages);

    let mut totals = PpoLosses::default();
    let mut minibatch_count = 0usize;
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..config.learning_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size) {
            let losses = ppo_minibatch(
                actor, critic, actor_opt, critic_opt, steps, &advantages, &returns, chunk, config,
            );
            totals.policy += losses.policy;
            totals.value += losses.value;
            totals.entropy += losses.entropy;
            minibatch_count += 1;
        }
    }
    totals.policy /= minibatch_count as f64;
    totals.value /= minibatch_count as f64;
    totals.entropy /= minibatch_count as f64;
    totals
}

#[allow(clippy::too_many_arguments)]
fn ppo_minibatch(
    actor: &mut DenseNet,
    critic: &mut DenseNet,
    actor_opt: &mut Adam,
    critic_opt: &mut Adam,
    steps: &[RolloutStep],
    advantages: &[f64],
    returns: &[f64],
    chunk: &[usize],
    config: &PpoConfig,
) -> PpoLosses {
    let m = chunk.len();
    let input_size = actor.input_size();
    let out_size = actor.output_size();

    let mut states = Array2::zeros((m, input_size));
    for (row, &idx) in chunk.iter().enumerate() {
        for (col, &x) in steps[idx].state.iter().enumerate() {
            states[(row, col)] = x;
        }
    }

    // Actor pass.
    let trace = actor.forward_batch(states.view());
    let logits_batch = trace.output();
    let mut actor_grad = Array2::zeros((m, out_size));
    let mut policy_loss = 0.0;
    let mut entropy_total = 0.0;

    for (row, &idx) in chunk.iter().enumerate() {
        let step = &steps[idx];
        let logits: Vec<f64> = logits_batch.row(row).to_vec();
        let probs = masked_softmax(&logits, &step.mask);
        let log_prob_new = masked_log_prob(&logits, &step.mask, step.action);
        let ratio = (log_prob_new - step.log_prob).exp();
        let adv = advantages[idx];

        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - config.clip_ratio, 1.0 + config.clip_ratio) * adv;
        policy_loss += -unclipped.min(clipped);

        // Gradient of -min(surrogates) w.r.t. log p(a): flows only through
        // the unclipped branch when it is the active minimum.
        let d_log_prob = if unclipped <= clipped { -adv * ratio } else { 0.0 };

        let mut entropy = 0.0;
        for z in step.mask.feasible_indices() {
            if probs[z] > 0.0 {
                entropy -= probs[z] * probs[z].ln();
            }
        }
        entropy_total += entropy;

        for z in step.mask.feasible_indices() {
            let p = probs[z];
            let indicator = if z == step.action { 1.0 } else { 0.0 };
            let mut g = d_log_prob * (indicator - p);
            if p > 0.0 {
                g += config.entropy_coef * p * (p.ln() + entropy);
            }
            actor_grad[(row, z)] = g / m as f64;
        }
    }

    let actor_grads = actor.backward_batch(&trace, actor_grad.view());
    actor_opt.step(actor, &actor_grads, None);

    // Critic pass.
    let critic_trace = critic.forward_batch(states.view());
    let values = critic_trace.output();
    let mut critic_grad = Array2::zeros((m, 1));
    let mut value_loss = 0.0;
    for (row, &idx) in chunk.iter().enumerate() {
        let err = values[(row, 0)] - returns[idx];
        value_loss += err * err;
        critic_grad[(row, 0)] = 2.0 * err / m as f64;
    }
    let critic_grads = critic.backward_batch(&critic_trace, critic_grad.view());
    critic_opt.step(critic, &critic_grads, None);

    PpoLosses {
        policy: policy_loss / m as f64,
        value: value_loss / m as f64,
        entropy: entropy_total / m as f64,
    }
}

/// Clipped-surrogate objective for a single sample; exposed for tests.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}
