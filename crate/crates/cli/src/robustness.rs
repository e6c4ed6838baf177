//! Robustness study: greedy policy rollouts from random reachable states,
//! scored against the exact optimum computed from each state.

use alb_rl::train::{greedy_rollout, Mode, Policy};
use alb_sim::{
    solve_from, AgentActionSpace, CentralizedActionSpace, FactoryConfig, RewardConfig, Solved,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::sample_reachable_state;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessSample {
    pub clock: u32,
    pub oracle_k_opt: Option<u32>,
    pub policy_k_end: Option<u32>,
    pub optimal: bool,
}

/// Aggregate of one robustness run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub samples: usize,
    pub optimal: usize,
    /// States the oracle could not finish within the horizon; excluded from
    /// the fraction.
    pub excluded: usize,
    pub fraction_optimal: f64,
    pub per_sample: Vec<RobustnessSample>,
}

/// Draws `n_samples` reachable states, solves each exactly and compares the
/// policy's greedy rollout against the optimum.
pub fn robustness_test(
    policy: &Policy,
    config: &FactoryConfig,
    space: &CentralizedActionSpace,
    agent_spaces: &[AgentActionSpace],
    n_samples: usize,
    max_depth: u32,
    node_budget: Option<u64>,
    rng: &mut impl Rng,
) -> Result<RobustnessReport, alb_sim::SolveError> {
    let reward = RewardConfig::default();
    let mut per_sample = Vec::with_capacity(n_samples);
    let mut optimal = 0usize;
    let mut excluded = 0usize;

    for _ in 0..n_samples {
        let state = sample_reachable_state(config, space, max_depth, rng);
        let solved = solve_from(&state, config, node_budget)?;
        match solved {
            Solved::InfeasibleWithinHorizon { .. } => {
                excluded += 1;
                per_sample.push(RobustnessSample {
                    clock: state.clock,
                    oracle_k_opt: None,
                    policy_k_end: None,
                    optimal: false,
                });
            }
            Solved::Optimal(result) => {
                let central = match policy.mode {
                    Mode::Central => Some(space),
                    Mode::Multi => None,
                };
                let k_end =
                    greedy_rollout(policy, &state, config, central, agent_spaces, &reward, rng);
                let is_optimal = k_end == result.k_opt;
                if is_optimal {
                    optimal += 1;
                }
                per_sample.push(RobustnessSample {
                    clock: state.clock,
                    oracle_k_opt: Some(result.k_opt),
                    policy_k_end: Some(k_end),
                    optimal: is_optimal,
                });
            }
        }
    }

    let scored = n_samples - excluded;
    Ok(RobustnessReport {
        samples: n_samples,
        optimal,
        excluded,
        fraction_optimal: if scored > 0 { optimal as f64 / scored as f64 } else { 0.0 },
        per_sample,
    })
}
