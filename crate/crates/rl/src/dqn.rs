//! Masked deep Q-learning: epsilon-greedy selection over feasible actions,
//! TD targets that never bootstrap through masked next-state actions, and a
//! periodically soft-updated target network.

use alb_sim::ActionMask;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::masking::{masked_argmax, sample_feasible_uniform};
use crate::net::{DenseNet, Grads, Head};
use crate::replay::{ReplayBuffer, StoredTransition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub discount: f64,
    pub memory: usize,
    /// Soft-update the target every this many learn steps.
    pub target_sync: u64,
    /// Mixing weight toward the online network at each sync.
    pub soft_update: f64,
    pub grad_clip: f64,
    pub warm_start: usize,
    /// Run one learn step every this many environment steps.
    pub learn_every: u32,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            learning_rate: 1e-5,
            batch_size: 64,
            discount: 0.995,
            memory: 100_000,
            target_sync: 10,
            soft_update: 0.8,
            grad_clip: 1.0,
            warm_start: 200,
            learn_every: 4,
        }
    }
}

/// Linear exploration schedule in episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: u32,
}

impl EpsilonSchedule {
    pub fn value(&self, episode: u32) -> f64 {
        if episode >= self.decay_episodes {
            return self.end;
        }
        let frac = f64::from(episode) / f64::from(self.decay_episodes);
        self.start + (self.end - self.start) * frac
    }
}

/// Epsilon-greedy over the feasible set: explore uniformly among feasible
/// actions, otherwise pick the masked argmax of the Q-values. The returned
/// index is always feasible.
pub fn dqn_select_action(
    net: &DenseNet,
    state: &[f64],
    mask: &ActionMask,
    epsilon: f64,
    rng: &mut impl Rng,
) -> usize {
    assert!(mask.count_feasible() > 0, "mask admits no action");
    if rng.gen::<f64>() < epsilon {
        sample_feasible_uniform(mask, rng)
    } else {
        let q = net.forward(state);
        masked_argmax(&q, mask)
    }
}

pub struct DqnAgent {
    pub online: DenseNet,
    pub target: DenseNet,
    pub optimizer: Adam,
    pub replay: ReplayBuffer,
    pub config: DqnConfig,
    learn_steps: u64,
}

impl DqnAgent {
    pub fn new(sizes: &[usize], config: DqnConfig, rng: &mut impl Rng) -> Self {
        let online = DenseNet::init(sizes, Head::Linear, rng);
        let target = online.clone();
        let optimizer = Adam::new(&online, config.learning_rate);
        let replay = ReplayBuffer::new(config.memory);
        DqnAgent { online, target, optimizer, replay, config, learn_steps: 0 }
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    pub fn ready(&self) -> bool {
        self.replay.len() >= self.config.warm_start.max(self.config.batch_size)
    }

    pub fn select(&self, state: &[f64], mask: &ActionMask, epsilon: f64, rng: &mut impl Rng) -> usize {
        dqn_select_action(&self.online, state, mask, epsilon, rng)
    }

    /// One squared-TD-error learning step on a uniform batch. Returns the
    /// batch loss, or `None` while the warm start has not been reached.
    pub fn learn(&mut self, rng: &mut impl Rng) -> Option<f64> {
        if !self.ready() {
            return None;
        }
        let batch: Vec<&StoredTransition> =
            self.replay.sample(self.config.batch_size, rng);
        let loss = dqn_learn_step(
            &mut self.online,
            &mut self.target,
            &mut self.optimizer,
            &batch,
            &self.config,
            &mut self.learn_steps,
        );
        Some(loss)
    }
}

/// TD update on an explicit batch: the target is
/// `r + discount * (1 - done) * max over next-mask-feasible target Q`.
pub fn dqn_learn_step(
    online: &mut DenseNet,
    target: &mut DenseNet,
    optimizer: &mut Adam,
    batch: &[&StoredTransition],
    config: &DqnConfig,
    learn_steps: &mut u64,
) -> f64 {
    let n = batch.len();
    let input_size = online.input_size();
    let out_size = online.output_size();

    let mut states = Array2::zeros((n, input_size));
    let mut next_states = Array2::zeros((n, input_size));
    for (row, t) in batch.iter().enumerate() {
        for (col, &x) in t.state.iter().enumerate() {
            states[(row, col)] = f64::from(x);
        }
        for (col, &x) in t.next_state.iter().enumerate() {
            next_states[(row, col)] = f64::from(x);
        }
    }

    let trace = online.forward_batch(states.view());
    let q = trace.output();
    let next_q = target.forward_batch(next_states.view());
    let next_q = next_q.output();

    let mut output_grad = Array2::zeros((n, out_size));
    let mut loss = 0.0;
    for (row, t) in batch.iter().enumerate() {
        let bootstrap = if t.done {
            0.0
        } else {
            let row_q: Vec<f64> = next_q.row(row).to_vec();
            let best = masked_argmax(&row_q, &t.next_mask);
            row_q[best]
        };
        let target_value = t.reward + config.discount * bootstrap;
        let td = q[(row, t.action)] - target_value;
        loss += td * td;
        output_grad[(row, t.action)] = 2.0 * td / n as f64;
    }
    loss /= n as f64;

    let grads: Grads = online.backward_batch(&trace, output_grad.view());
    optimizer.step(online, &grads, Some(config.grad_clip));

    *learn_steps += 1;
    if *learn_steps % config.target_sync == 0 {
        target.soft_update_from(online, config.soft_update);
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mask_of(bits: &[bool]) -> ActionMask {
        let mut m = ActionMask::all_false(bits.len());
        for (z, &b) in bits.iter().enumerate() {
            m.set(z, b);
        }
        m
    }

    /// 1-input, 2-action linear net with hand-set weights.
    fn toy_net(w: [f64; 2], b: [f64; 2]) -> DenseNet {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = DenseNet::init(&[1, 2], Head::Linear, &mut rng);
        let (ws, bs) = net.weights_mut();
        ws[0][(0, 0)] = w[0];
        ws[0][(0, 1)] = w[1];
        bs[0][0] = b[0];
        bs[0][1] = b[1];
        net
    }

    #[test]
    fn greedy_selection_is_the_masked_argmax() {
        // Q(s) = [2, 5, 1] with actions 0 and 2 feasible: pick 0.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = DenseNet::init(&[1, 3], Head::Linear, &mut rng);
        let (ws, bs) = net.weights_mut();
        ws[0].fill(0.0);
        bs[0][0] = 2.0;
        bs[0][1] = 5.0;
        bs[0][2] = 1.0;
        let m = mask_of(&[true, false, true]);
        assert_eq!(dqn_select_action(&net, &[0.0], &m, 0.0, &mut rng), 0);

        let one = mask_of(&[false, true, false]);
        for eps in [0.0, 1.0] {
            assert_eq!(dqn_select_action(&net, &[0.0], &one, eps, &mut rng), 1);
        }
    }

    #[test]
    fn exploration_is_uniform_over_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = toy_net([0.0, 0.0], [0.0, 0.0]);
        let m = mask_of(&[true, true]);
        let mut counts = [0u32; 2];
        for _ in 0..10_000 {
            counts[dqn_select_action(&net, &[0.0], &m, 1.0, &mut rng)] += 1;
        }
        for c in counts {
            assert!((f64::from(c) / 10_000.0 - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn terminal_transitions_regress_to_the_reward() {
        // Q(s=[1]) = [0.6, -0.05]; terminal sample with r = 1 on action 0:
        // loss = (0.6 - 1)^2 = 0.16.
        let mut online = toy_net([0.5, -0.25], [0.1, 0.2]);
        let mut target = online.clone();
        let mut adam = Adam::new(&online, 1e-5);
        let cfg = DqnConfig { batch_size: 1, ..DqnConfig::default() };
        let t = StoredTransition {
            state: vec![1.0],
            action: 0,
            reward: 1.0,
            next_state: vec![0.5],
            done: true,
            mask: mask_of(&[true, true]),
            next_mask: mask_of(&[true, true]),
        };
        let mut steps = 0;
        let loss = dqn_learn_step(&mut online, &mut target, &mut adam, &[&t], &cfg, &mut steps);
        assert!((loss - 0.16).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_uses_only_next_mask_feasible_actions() {
        // Q_target(s'=[0.5]) = [0.35, 0.075]; only action 1 feasible in s',
        // so y = 1 + 0.995 * 0.075 and loss = (0.6 - y)^2.
        let mut online = toy_net([0.5, -0.25], [0.1, 0.2]);
        let mut target = online.clone();
        let mut adam = Adam::new(&online, 1e-5);
        let cfg = DqnConfig { batch_size: 1, ..DqnConfig::default() };
        let t = StoredTransition {
            state: vec![1.0],
            action: 0,
            reward: 1.0,
            next_state: vec![0.5],
            done: false,
            mask: mask_of(&[true, true]),
            next_mask: mask_of(&[false, true]),
        };
        let mut steps = 0;
        let loss = dqn_learn_step(&mut online, &mut target, &mut adam, &[&t], &cfg, &mut steps);
        let y = 1.0 + 0.995 * 0.075;
        assert!((loss - (0.6 - y) * (0.6 - y)).abs() < 1e-12);
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let eps = EpsilonSchedule { start: 1.0, end: 0.05, decay_episodes: 100 };
        assert_eq!(eps.value(0), 1.0);
        assert!((eps.value(50) - 0.525).abs() < 1e-12);
        assert_eq!(eps.value(100), 0.05);
        assert_eq!(eps.value(10_000), 0.05);
        let mut last = f64::INFINITY;
        for ep in 0..200 {
            let v = eps.value(ep);
            assert!(v <= last && (0.05..=1.0).contains(&v));
            last = v;
        }
    }
}
