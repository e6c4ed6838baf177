//! On-policy trajectory storage and generalized advantage estimation.

use alb_sim::ActionMask;

/// One time step as the policy saw it: the executed action (after any
/// coordinator substitution), its log-probability under the acting policy,
/// the pre-step value estimate and the mask the policy was given.
#[derive(Debug, Clone)]
pub struct RolloutStep {
    pub state: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
    pub mask: ActionMask,
}

#[derive(Debug, Default)]
pub struct RolloutBuffer {
    steps: Vec<RolloutStep>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        RolloutBuffer { steps: Vec::new() }
    }

    pub fn push(&mut self, step: RolloutStep) {
        self.steps.push(step);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[RolloutStep] {
        &self.steps
    }

    pub fn drain(&mut self) -> Vec<RolloutStep> {
        std::mem::take(&mut self.steps)
    }
}

/// Standard GAE over a contiguous rollout. `bootstrap_value` estimates the
/// state following the final step and is only used when that step is not
/// terminal; episode boundaries inside the rollout cut the recursion.
/// Returns per-step advantages and value-regression targets.
pub fn compute_gae(
    steps: &[RolloutStep],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = steps.len();
    let mut advantages = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let alive = if steps[t].done { 0.0 } else { 1.0 };
        let next_value = if t + 1 == n { bootstrap_value } else { steps[t + 1].value };
        let delta = steps[t].reward + gamma * next_value * alive - steps[t].value;
        gae = delta + gamma * lambda * alive * gae;
        advantages[t] = gae;
    }
    let returns = advantages.iter().zip(steps).map(|(a, s)| a + s.value).collect();
    (advantages, returns)
}

/// In-place normalization to zero mean and unit variance.
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    if values.is_empty() {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for v in values {
        *v = (*v - mean) / std;
    }
}
