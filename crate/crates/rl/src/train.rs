//! Training loops for the four agent configurations (DQN/PPO, centralized/
//! multi-agent), the masking-off penalty ablation, convergence tracking and
//! greedy evaluation of trained policies.

use std::collections::VecDeque;
use std::time::Instant;

use alb_sim::{
    action_feasible, agent_mask, centralized_mask, reset, transition, ActionMask,
    AgentActionSpace, CentralizedActionSpace, FactoryConfig, FactoryState, RewardConfig,
    SpaceError, TaskAssignment,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dqn::{DqnAgent, DqnConfig, EpsilonSchedule};
use crate::marl::sequential_feasibility_check;
use crate::masking::masked_argmax;
use crate::net::{DenseNet, NetCheckpoint};
use crate::ppo::{compute_probs_new_action, ppo_policy, PpoAgent, PpoConfig, PpoLosses};
use crate::replay::StoredTransition;
use crate::rollout::RolloutStep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Dqn,
    Ppo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Central,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Masking {
    On,
    /// The ablation baseline: the agent sees no mask; an infeasible choice
    /// is replaced by the null action and punished with a fixed penalty.
    OffWithPenalty,
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algo::Dqn => "dqn",
            Algo::Ppo => "ppo",
        })
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Central => "central",
            Mode::Multi => "multi",
        })
    }
}

impl std::fmt::Display for Masking {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Masking::On => "on",
            Masking::OffWithPenalty => "off",
        })
    }
}

/// Everything one training run depends on besides the instance itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub algo: Algo,
    pub mode: Mode,
    pub masking: Masking,
    pub seed: u64,
    pub episodes: u32,
    /// Width of the three hidden layers.
    pub hidden_width: usize,
    pub reward: RewardConfig,
    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episode budget over which epsilon decays linearly.
    pub epsilon_decay_frac: f64,
    /// Reward handed out for an infeasible attempt when masking is off.
    pub infeasible_penalty: f64,
    /// Trailing window for the convergence criterion.
    pub convergence_window: usize,
    /// Convergence target for the trailing-median criterion (the exact
    /// optimum when known).
    pub target_k_end: Option<u32>,
    pub stop_on_convergence: bool,
}

impl RunConfig {
    /// Defaults for an algorithm/mode pair, including its hidden width.
    pub fn new(algo: Algo, mode: Mode) -> Self {
        let hidden_width = match (algo, mode) {
            (Algo::Dqn, Mode::Central) => 534,
            (Algo::Dqn, Mode::Multi) => 178,
            (Algo::Ppo, Mode::Central) => 258,
            (Algo::Ppo, Mode::Multi) => 86,
        };
        RunConfig {
            algo,
            mode,
            masking: Masking::On,
            seed: 0,
            episodes: 2000,
            hidden_width,
            reward: RewardConfig::default(),
            dqn: DqnConfig::default(),
            ppo: PpoConfig::default(),
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_frac: 0.6,
            infeasible_penalty: -1.0,
            convergence_window: 100,
            target_k_end: None,
            stop_on_convergence: false,
        }
    }

    fn epsilon_schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_episodes: (f64::from(self.episodes) * self.epsilon_decay_frac).round() as u32,
        }
    }
}

/// One CSV row of training metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub k_end: u32,
    pub cumulative_reward: f64,
    /// One entry for centralized runs, one per agent for multi-agent runs.
    pub losses: Vec<f64>,
    /// Epsilon for DQN, mean policy entropy for PPO.
    pub explore: f64,
    pub wall_ms: f64,
}

/// Trained policy networks, sufficient for greedy execution.
#[derive(Debug, Clone)]
pub struct Policy {
    pub algo: Algo,
    pub mode: Mode,
    /// The Q-network (DQN) or actor (PPO); one entry for centralized runs,
    /// one per workstation otherwise.
    pub nets: Vec<DenseNet>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub records: Vec<EpisodeRecord>,
    /// First episode whose trailing-window median k_end hit the target.
    pub convergence_episode: Option<u32>,
    pub episodes_run: u32,
    /// Executed actions that failed validation; must stay zero when masking
    /// is on (the feasibility-totality counter).
    pub infeasible_executed: u64,
    /// Infeasible proposals replaced by null steps (mask-off ablation only).
    pub infeasible_attempts: u64,
    pub sfc_invocations: u64,
    pub final_policy: Policy,
    /// Policy snapshot from the episode with the best k_end so far.
    pub best_policy: Policy,
    pub best_k_end: u32,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Trailing-window median tracker.
struct ConvergenceTracker {
    window: VecDeque<u32>,
    size: usize,
    target: Option<u32>,
    converged_at: Option<u32>,
}

impl ConvergenceTracker {
    fn new(size: usize, target: Option<u32>) -> Self {
        ConvergenceTracker { window: VecDeque::new(), size, target, converged_at: None }
    }

    /// Records an episode result; returns true on first convergence.
    fn push(&mut self, episode: u32, k_end: u32) -> bool {
        if self.window.len() == self.size {
            self.window.pop_front();
        }
        self.window.push_back(k_end);
        if self.converged_at.is_some() || self.window.len() < self.size {
            return false;
        }
        let Some(target) = self.target else { return false };
        let mut sorted: Vec<u32> = self.window.iter().copied().collect();
        sorted.sort_unstable();
        // Median of an even-sized window of integers bounded below by the
        // optimum equals the optimum exactly when both central order
        // statistics do.
        let lo = sorted[(self.size - 1) / 2];
        let hi = sorted[self.size / 2];
        if lo == target && hi == target {
            self.converged_at = Some(episode);
            return true;
        }
        false
    }
}

/// Dispatches to the right loop for the run configuration.
pub fn train(config: &FactoryConfig, run: &RunConfig) -> Result<TrainOutcome, TrainError> {
    match (run.algo, run.mode) {
        (Algo::Ppo, Mode::Central) => train_central_ppo(config, run),
        (Algo::Dqn, Mode::Central) => train_central_dqn(config, run),
        (Algo::Ppo, Mode::Multi) => train_multi_ppo(config, run),
        (Algo::Dqn, Mode::Multi) => train_multi_dqn(config, run),
    }
}

fn mask_or_all(
    masked: bool,
    state: &FactoryState,
    space: &CentralizedActionSpace,
    config: &FactoryConfig,
) -> ActionMask {
    if masked {
        centralized_mask(state, space, config)
    } else {
        ActionMask::all_true(space.len())
    }
}

/// Applies a centralized action: when masking is off an infeasible pick is
/// replaced by the null step and rewarded with the penalty.
struct CentralStep {
    outcome: alb_sim::StepOutcome,
    was_infeasible: bool,
}

fn central_env_step(
    state: &FactoryState,
    action: &TaskAssignment,
    config: &FactoryConfig,
    run: &RunConfig,
    infeasible_executed: &mut u64,
) -> CentralStep {
    match transition(state, action, config, &run.reward) {
        Ok(outcome) => CentralStep { outcome, was_infeasible: false },
        Err(_) if run.masking == Masking::OffWithPenalty => {
            let null = TaskAssignment::empty(config.num_workstations, config.num_tasks);
            let mut outcome = transition(state, &null, config, &run.reward)
                .expect("null action is always feasible");
            outcome.reward = run.infeasible_penalty;
            CentralStep { outcome, was_infeasible: true }
        }
        Err(_) => {
            // Unreachable when masking works; counted (and recovered with a
            // null step) so the totality property stays checkable.
            *infeasible_executed += 1;
            let null = TaskAssignment::empty(config.num_workstations, config.num_tasks);
            let outcome = transition(state, &null, config, &run.reward)
                .expect("null action is always feasible");
            CentralStep { outcome, was_infeasible: true }
        }
    }
}

fn train_central_ppo(config: &FactoryConfig, run: &RunConfig) -> Result<TrainOutcome, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let space = CentralizedActionSpace::enumerate(config, None)?;
    let masked = run.masking == Masking::On;
    let sizes =
        [config.state_vector_len(), run.hidden_width, run.hidden_width, run.hidden_width, space.len()];
    let mut agent = PpoAgent::new(&sizes, run.ppo, &mut rng);

    let mut tracker = ConvergenceTracker::new(run.convergence_window, run.target_k_end);
    let mut records = Vec::new();
    let mut infeasible_executed = 0u64;
    let mut infeasible_attempts = 0u64;
    let mut best: Option<(u32, Policy)> = None;

    let mut episodes_run = 0;
    'training: for episode in 0..run.episodes {
        let started = Instant::now();
        let mut state = reset(config);
        let mut cumulative_reward = 0.0;
        let mut entropy_sum = 0.0;
        let mut entropy_cnt = 0u32;
        let mut loss_sum = 0.0;
        let mut loss_cnt = 0u32;

        while !state.done {
            let flat = state.flatten(config);
            let mask = mask_or_all(masked, &state, &space, config);
            let probs = ppo_policy(&agent.actor, &flat, &mask);
            let action = crate::masking::sample_from_probs(&probs, &mut rng);
            let log_prob = probs[action].ln();
            entropy_sum -=
                probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
            entropy_cnt += 1;
            let value = agent.value(&flat);

            let step = central_env_step(
                &state,
                space.decode(action),
                config,
                run,
                &mut infeasible_executed,
            );
            if step.was_infeasible {
                infeasible_attempts += 1;
            }
            cumulative_reward += step.outcome.reward;

            agent.rollout.push(RolloutStep {
                state: flat,
                action,
                log_prob,
                value,
                reward: step.outcome.reward,
                done: step.outcome.done,
                mask,
            });
            state = step.outcome.state;

            if agent.rollout_full() {
                let bootstrap =
                    if state.done { 0.0 } else { agent.value(&state.flatten(config)) };
                let losses = agent.learn(bootstrap, &mut rng);
                loss_sum += losses.policy + losses.value;
                loss_cnt += 1;
            }
        }

        episodes_run = episode + 1;
        let k_end = state.clock;
        track_episode(
            &mut records,
            &mut tracker,
            &mut best,
            episode,
            k_end,
            cumulative_reward,
            vec![if loss_cnt > 0 { loss_sum / f64::from(loss_cnt) } else { 0.0 }],
            entropy_sum / f64::from(entropy_cnt.max(1)),
            started,
            || Policy { algo: run.algo, mode: run.mode, nets: vec![agent.actor.clone()] },
        );
        if tracker.converged_at.is_some() && run.stop_on_convergence {
            break 'training;
        }
    }

    let final_policy = Policy { algo: run.algo, mode: run.mode, nets: vec![agent.actor.clone()] };
    Ok(finish(
        records,
        tracker,
        episodes_run,
        infeasible_executed,
        infeasible_attempts,
        0,
        final_policy,
        best,
    ))
}

fn train_central_dqn(config: &FactoryConfig, run: &RunConfig) -> Result<TrainOutcome, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let space = CentralizedActionSpace::enumerate(config, None)?;
    let masked = run.masking == Masking::On;
    let sizes =
        [config.state_vector_len(), run.hidden_width, run.hidden_width, run.hidden_width, space.len()];
    let mut agent = DqnAgent::new(&sizes, run.dqn, &mut rng);
    let schedule = run.epsilon_schedule();

    let mut tracker = ConvergenceTracker::new(run.convergence_window, run.target_k_end);
    let mut records = Vec::new();
    let mut infeasible_executed = 0u64;
    let mut infeasible_attempts = 0u64;
    let mut best: Option<(u32, Policy)> = None;
    let mut global_step = 0u64;

    let mut episodes_run = 0;
    'training: for episode in 0..run.episodes {
        let started = Instant::now();
        let epsilon = schedule.value(episode);
        let mut state = reset(config);
        let mut mask = mask_or_all(masked, &state, &space, config);
        let mut cumulative_reward = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_cnt = 0u32;

        while !state.done {
            let flat = state.flatten(config);
            let action = agent.select(&flat, &mask, epsilon, &mut rng);

            let step = central_env_step(
                &state,
                space.decode(action),
                config,
                run,
                &mut infeasible_executed,
            );
            if step.was_infeasible {
                infeasible_attempts += 1;
            }
            cumulative_reward += step.outcome.reward;
            let next_mask = mask_or_all(masked, &step.outcome.state, &space, config);

            agent.replay.push(StoredTransition {
                state: flat.iter().map(|&x| x as f32).collect(),
                action,
                reward: step.outcome.reward,
                next_state: step.outcome.state.flatten(config).iter().map(|&x| x as f32).collect(),
                done: step.outcome.done,
                mask,
                next_mask: next_mask.clone(),
            });

            state = step.outcome.state;
            mask = next_mask;
            global_step += 1;
            if global_step % u64::from(run.dqn.learn_every) == 0 {
                if let Some(loss) = agent.learn(&mut rng) {
                    loss_sum += loss;
                    loss_cnt += 1;
                }
            }
        }

        episodes_run = episode + 1;
        track_episode(
            &mut records,
            &mut tracker,
            &mut best,
            episode,
            state.clock,
            cumulative_reward,
            vec![if loss_cnt > 0 { loss_sum / f64::from(loss_cnt) } else { 0.0 }],
            epsilon,
            started,
            || Policy { algo: run.algo, mode: run.mode, nets: vec![agent.online.clone()] },
        );
        if tracker.converged_at.is_some() && run.stop_on_convergence {
            break 'training;
        }
    }

    let final_policy = Policy { algo: run.algo, mode: run.mode, nets: vec![agent.online.clone()] };
    Ok(finish(
        records,
        tracker,
        episodes_run,
        infeasible_executed,
        infeasible_attempts,
        0,
        final_policy,
        best,
    ))
}

fn train_multi_ppo(config: &FactoryConfig, run: &RunConfig) -> Result<TrainOutcome, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let spaces = AgentActionSpace::enumerate_all(config);
    let masked = run.masking == Masking::On;
    let ni = config.num_workstations;
    let input = config.state_vector_len();
    let mut agents: Vec<PpoAgent> = (0..ni)
        .map(|i| {
            let sizes =
                [input, run.hidden_width, run.hidden_width, run.hidden_width, spaces[i].len()];
            PpoAgent::new(&sizes, run.ppo, &mut rng)
        })
        .collect();

    let mut tracker = ConvergenceTracker::new(run.convergence_window, run.target_k_end);
    let mut records = Vec::new();
    let mut infeasible_executed = 0u64;
    let mut infeasible_attempts = 0u64;
    let mut sfc_invocations = 0u64;
    let mut best: Option<(u32, Policy)> = None;
    let mut global_step = 0u64;

    let mut episodes_run = 0;
    'training: for episode in 0..run.episodes {
        let started = Instant::now();
        let mut state = reset(config);
        let mut cumulative_reward = 0.0;
        let mut entropy_sum = 0.0;
        let mut entropy_cnt = 0u32;
        let mut loss_sums = vec![0.0; ni];
        let mut loss_cnt = 0u32;

        while !state.done {
            let flat = state.flatten(config);
            let masks: Vec<ActionMask> = (0..ni)
                .map(|i| {
                    if masked {
                        agent_mask(&state, i, &spaces[i], config)
                    } else {
                        ActionMask::all_true(spaces[i].len())
                    }
                })
                .collect();

            let mut proposals = Vec::with_capacity(ni);
            let mut values = Vec::with_capacity(ni);
            for i in 0..ni {
                let probs = ppo_policy(&agents[i].actor, &flat, &masks[i]);
                entropy_sum -=
                    probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
                entropy_cnt += 1;
                proposals.push(crate::masking::sample_from_probs(&probs, &mut rng));
                values.push(agents[i].value(&flat));
            }

            let rows: Vec<u64> = (0..ni).map(|i| spaces[i].decode(proposals[i])).collect();
            let joint = TaskAssignment::from_rows(rows, config.num_tasks);

            let mut penalized = false;
            let (executed_joint, executed) = if action_feasible(&state, &joint, config).is_ok() {
                (joint, proposals.clone())
            } else if masked {
                // Conflicting individually-feasible proposals: resolve them
                // with the sequential feasibility check.
                sfc_invocations += 1;
                let outcome = sequential_feasibility_check(
                    &state,
                    config,
                    &spaces,
                    |agent, fict_state, fict_mask, rng| {
                        let probs =
                            ppo_policy(&agents[agent].actor, &fict_state.flatten(config), fict_mask);
                        crate::masking::sample_from_probs(&probs, rng)
                    },
                    &mut rng,
                );
                (outcome.joint, outcome.chosen)
            } else {
                // Ablation path: punish and fall back to the null action.
                infeasible_attempts += 1;
                penalized = true;
                let null = TaskAssignment::empty(ni, config.num_tasks);
                (null, vec![0; ni])
            };

            let mut step = match transition(&state, &executed_joint, config, &run.reward) {
                Ok(out) => out,
                Err(_) => {
                    // Unreachable when the coordinator works; counted and
                    // recovered with a null step to keep training total.
                    infeasible_executed += 1;
                    let null = TaskAssignment::empty(ni, config.num_tasks);
                    transition(&state, &null, config, &run.reward)
                        .expect("null action is always feasible")
                }
            };
            if penalized {
                step.reward = run.infeasible_penalty;
            }
            cumulative_reward += step.reward;

            for i in 0..ni {
                // Stored log-probability of the executed (possibly
                // substituted) action under the original state and mask.
                let log_prob = if masked {
                    compute_probs_new_action(&agents[i].actor, &flat, executed[i], &masks[i])
                } else {
                    compute_probs_new_action(&agents[i].actor, &flat, proposals[i], &masks[i])
                };
                let stored_action = if masked { executed[i] } else { proposals[i] };
                agents[i].rollout.push(RolloutStep {
                    state: flat.clone(),
                    action: stored_action,
                    log_prob,
                    value: values[i],
                    reward: step.reward,
                    done: step.done,
                    mask: masks[i].clone(),
                });
            }

            state = step.state;
            global_step += 1;

            if global_step % run.ppo.learning_frequency as u64 == 0 {
                let next_flat = state.flatten(config);
                for (i, agent) in agents.iter_mut().enumerate() {
                    let bootstrap = if state.done { 0.0 } else { agent.value(&next_flat) };
                    let losses: PpoLosses = agent.learn(bootstrap, &mut rng);
                    loss_sums[i] += losses.policy + losses.value;
                }
                loss_cnt += 1;
            }
        }

        episodes_run = episode + 1;
        let losses = loss_sums
            .iter()
            .map(|&s| if loss_cnt > 0 { s / f64::from(loss_cnt) } else { 0.0 })
            .collect();
        track_episode(
            &mut records,
            &mut tracker,
            &mut best,
            episode,
            state.clock,
            cumulative_reward,
            losses,
            entropy_sum / f64::from(entropy_cnt.max(1)),
            started,
            || Policy {
                algo: run.algo,
                mode: run.mode,
                nets: agents.iter().map(|a| a.actor.clone()).collect(),
            },
        );
        if tracker.converged_at.is_some() && run.stop_on_convergence {
            break 'training;
        }
    }

    let final_policy = Policy {
        algo: run.algo,
        mode: run.mode,
        nets: agents.iter().map(|a| a.actor.clone()).collect(),
    };
    Ok(finish(
        records,
        tracker,
        episodes_run,
        infeasible_executed,
        infeasible_attempts,
        sfc_invocations,
        final_policy,
        best,
    ))
}

fn train_multi_dqn(config: &FactoryConfig, run: &RunConfig) -> Result<TrainOutcome, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let spaces = AgentActionSpace::enumerate_all(config);
    let masked = run.masking == Masking::On;
    let ni = config.num_workstations;
    let input = config.state_vector_len();
    let mut agents: Vec<DqnAgent> = (0..ni)
        .map(|i| {
            let sizes =
                [input, run.hidden_width, run.hidden_width, run.hidden_width, spaces[i].len()];
            DqnAgent::new(&sizes, run.dqn, &mut rng)
        })
        .collect();
    let schedule = run.epsilon_schedule();

    let mut tracker = ConvergenceTracker::new(run.convergence_window, run.target_k_end);
    let mut records = Vec::new();
    let mut infeasible_executed = 0u64;
    let mut infeasible_attempts = 0u64;
    let mut sfc_invocations = 0u64;
    let mut best: Option<(u32, Policy)> = None;
    let mut global_step = 0u64;

    let mut episodes_run = 0;
    'training: for episode in 0..run.episodes {
        let started = Instant::now();
        let epsilon = schedule.value(episode);
        let mut state = reset(config);
        let mut cumulative_reward = 0.0;
        let mut loss_sums = vec![0.0; ni];
        let mut loss_cnts = vec![0u32; ni];

        while !state.done {
            let flat = state.flatten(config);
            let masks: Vec<ActionMask> = (0..ni)
                .map(|i| {
                    if masked {
                        agent_mask(&state, i, &spaces[i], config)
                    } else {
                        ActionMask::all_true(spaces[i].len())
                    }
                })
                .collect();

            let proposals: Vec<usize> = (0..ni)
                .map(|i| agents[i].select(&flat, &masks[i], epsilon, &mut rng))
                .collect();

            let rows: Vec<u64> = (0..ni).map(|i| spaces[i].decode(proposals[i])).collect();
            let joint = TaskAssignment::from_rows(rows, config.num_tasks);

            let mut penalized = false;
            let (executed_joint, executed) = if action_feasible(&state, &joint, config).is_ok() {
                (joint, proposals.clone())
            } else if masked {
                sfc_invocations += 1;
                let outcome = sequential_feasibility_check(
                    &state,
                    config,
                    &spaces,
                    |agent, fict_state, fict_mask, _rng| {
                        // Greedy re-selection on the fictitious state.
                        let q = agents[agent].online.forward(&fict_state.flatten(config));
                        masked_argmax(&q, fict_mask)
                    },
                    &mut rng,
                );
                (outcome.joint, outcome.chosen)
            } else {
                infeasible_attempts += 1;
                penalized = true;
                let null = TaskAssignment::empty(ni, config.num_tasks);
                (null, vec![0; ni])
            };

            let mut step = match transition(&state, &executed_joint, config, &run.reward) {
                Ok(out) => out,
                Err(_) => {
                    // Unreachable when the coordinator works; counted and
                    // recovered with a null step to keep training total.
                    infeasible_executed += 1;
                    let null = TaskAssignment::empty(ni, config.num_tasks);
                    transition(&state, &null, config, &run.reward)
                        .expect("null action is always feasible")
                }
            };
            if penalized {
                step.reward = run.infeasible_penalty;
            }
            cumulative_reward += step.reward;

            let next_flat32: Vec<f32> =
                step.state.flatten(config).iter().map(|&x| x as f32).collect();
            let flat32: Vec<f32> = flat.iter().map(|&x| x as f32).collect();
            let next_masks: Vec<ActionMask> = (0..ni)
                .map(|i| {
                    if masked {
                        agent_mask(&step.state, i, &spaces[i], config)
                    } else {
                        ActionMask::all_true(spaces[i].len())
                    }
                })
                .collect();

            for i in 0..ni {
                let stored_action = if masked { executed[i] } else { proposals[i] };
                agents[i].replay.push(StoredTransition {
                    state: flat32.clone(),
                    action: stored_action,
                    reward: step.reward,
                    next_state: next_flat32.clone(),
                    done: step.done,
                    mask: masks[i].clone(),
                    next_mask: next_masks[i].clone(),
                });
            }

            state = step.state;
            global_step += 1;
            if global_step % u64::from(run.dqn.learn_every) == 0 {
                for (i, agent) in agents.iter_mut().enumerate() {
                    if let Some(loss) = agent.learn(&mut rng) {
                        loss_sums[i] += loss;
                        loss_cnts[i] += 1;
                    }
                }
            }
        }

        episodes_run = episode + 1;
        let losses = loss_sums
            .iter()
            .zip(&loss_cnts)
            .map(|(&s, &c)| if c > 0 { s / f64::from(c) } else { 0.0 })
            .collect();
        track_episode(
            &mut records,
            &mut tracker,
            &mut best,
            episode,
            state.clock,
            cumulative_reward,
            losses,
            epsilon,
            started,
            || Policy {
                algo: run.algo,
                mode: run.mode,
                nets: agents.iter().map(|a| a.online.clone()).collect(),
            },
        );
        if tracker.converged_at.is_some() && run.stop_on_convergence {
            break 'training;
        }
    }

    let final_policy = Policy {
        algo: run.algo,
        mode: run.mode,
        nets: agents.iter().map(|a| a.online.clone()).collect(),
    };
    Ok(finish(
        records,
        tracker,
        episodes_run,
        infeasible_executed,
        infeasible_attempts,
        sfc_invocations,
        final_policy,
        best,
    ))
}

#[allow(clippy::too_many_arguments)]
fn track_episode(
    records: &mut Vec<EpisodeRecord>,
    tracker: &mut ConvergenceTracker,
    best: &mut Option<(u32, Policy)>,
    episode: u32,
    k_end: u32,
    cumulative_reward: f64,
    losses: Vec<f64>,
    explore: f64,
    started: Instant,
    snapshot: impl FnOnce() -> Policy,
) {
    if best.as_ref().map_or(true, |(b, _)| k_end < *b) {
        *best = Some((k_end, snapshot()));
    }
    tracker.push(episode, k_end);
    records.push(EpisodeRecord {
        episode,
        k_end,
        cumulative_reward,
        losses,
        explore,
        wall_ms: started.elapsed().as_secs_f64() * 1000.0,
    });
}

#[allow(clippy::too_many_arguments)]
fn finish(
    records: Vec<EpisodeRecord>,
    tracker: ConvergenceTracker,
    episodes_run: u32,
    infeasible_executed: u64,
    infeasible_attempts: u64,
    sfc_invocations: u64,
    final_policy: Policy,
    best: Option<(u32, Policy)>,
) -> TrainOutcome {
    let (best_k_end, best_policy) = match best {
        Some((k, p)) => (k, p),
        None => (u32::MAX, final_policy.clone()),
    };
    TrainOutcome {
        records,
        convergence_episode: tracker.converged_at,
        episodes_run,
        infeasible_executed,
        infeasible_attempts,
        sfc_invocations,
        final_policy,
        best_policy,
        best_k_end,
    }
}

impl Policy {
    /// Greedy joint action for the current state: masked argmax for
    /// centralized policies; per-agent masked argmax plus the sequential
    /// feasibility check for decentralized execution.
    pub fn greedy_action(
        &self,
        state: &FactoryState,
        config: &FactoryConfig,
        central_space: Option<&CentralizedActionSpace>,
        agent_spaces: &[AgentActionSpace],
        rng: &mut impl Rng,
    ) -> TaskAssignment {
        let flat = state.flatten(config);
        match self.mode {
            Mode::Central => {
                let space = central_space.expect("centralized policy needs the enumerated space");
                let mask = centralized_mask(state, space, config);
                let values = self.nets[0].forward(&flat);
                space.decode(masked_argmax(&values, &mask)).clone()
            }
            Mode::Multi => {
                let ni = config.num_workstations;
                let rows: Vec<u64> = (0..ni)
                    .map(|i| {
                        let mask = agent_mask(state, i, &agent_spaces[i], config);
                        let values = self.nets[i].forward(&flat);
                        agent_spaces[i].decode(masked_argmax(&values, &mask))
                    })
                    .collect();
                let joint = TaskAssignment::from_rows(rows, config.num_tasks);
                if action_feasible(state, &joint, config).is_ok() {
                    joint
                } else {
                    let outcome = sequential_feasibility_check(
                        state,
                        config,
                        agent_spaces,
                        |agent, fict_state, fict_mask, _rng| {
                            let values = self.nets[agent].forward(&fict_state.flatten(config));
                            masked_argmax(values.as_slice(), fict_mask)
                        },
                        rng,
                    );
                    outcome.joint
                }
            }
        }
    }

    pub fn to_checkpoint(&self, run: &RunConfig) -> ModelCheckpoint {
        ModelCheckpoint {
            algo: self.algo,
            mode: self.mode,
            policy_nets: self.nets.iter().map(|n| n.to_checkpoint(None, Some(run.seed))).collect(),
            run: run.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Self {
        Policy {
            algo: ckpt.algo,
            mode: ckpt.mode,
            nets: ckpt.policy_nets.iter().map(DenseNet::from_checkpoint).collect(),
        }
    }
}

/// Greedy rollout from a state; returns the finishing clock `k_end`.
pub fn greedy_rollout(
    policy: &Policy,
    start: &FactoryState,
    config: &FactoryConfig,
    central_space: Option<&CentralizedActionSpace>,
    agent_spaces: &[AgentActionSpace],
    reward: &RewardConfig,
    rng: &mut impl Rng,
) -> u32 {
    let mut state = start.clone();
    while !state.done {
        let action = policy.greedy_action(&state, config, central_space, agent_spaces, rng);
        let out = transition(&state, &action, config, reward)
            .expect("greedy evaluation produced an infeasible action");
        state = out.state;
    }
    state.clock
}

/// Serialized policy (plus its run configuration) for the checkpoint files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub algo: Algo,
    pub mode: Mode,
    pub policy_nets: Vec<NetCheckpoint>,
    pub run: RunConfig,
}
