//! Reachable-state sampling by random masked rollouts.

use alb_sim::{
    centralized_mask, reset, transition, CentralizedActionSpace, FactoryConfig, FactoryState,
    RewardConfig,
};
use rand::Rng;

/// Rolls a uniformly random feasible action for a uniformly random number of
/// steps in `[0, max_depth]` from the reset state. Every returned state is
/// reachable by construction.
pub fn sample_reachable_state(
    config: &FactoryConfig,
    space: &CentralizedActionSpace,
    max_depth: u32,
    rng: &mut impl Rng,
) -> FactoryState {
    let reward = RewardConfig::default();
    let depth = rng.gen_range(0..=max_depth);
    let mut state = reset(config);
    for _ in 0..depth {
        if state.done {
            break;
        }
        let mask = centralized_mask(&state, space, config);
        let n = mask.count_feasible();
        let pick = rng.gen_range(0..n);
        let z = mask.feasible_indices().nth(pick).expect("pick < feasible count");
        state = transition(&state, space.decode(z), config, &reward)
            .expect("masked action must transition")
            .state;
    }
    state
}
