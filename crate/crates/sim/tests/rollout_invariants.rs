//! Property tests over random masked rollouts: every state invariant holds
//! after every step, caps are respected, finish flags are monotone and the
//! reward fires exactly once per finishing episode.

use alb_sim::instances::table3;
use alb_sim::{
    action_feasible, agent_mask, centralized_mask, check_state_invariants, reset, transition,
    AgentActionSpace, CentralizedActionSpace, FactoryConfig, RewardConfig, TaskAssignment,
    Violation,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_masked_rollout(
    config: &FactoryConfig,
    space: &CentralizedActionSpace,
    seed: u64,
    mut inspect: impl FnMut(&alb_sim::FactoryState, f64),
) {
    let reward_cfg = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = reset(config);
    while !state.done {
        let mask = centralized_mask(&state, space, config);
        assert!(mask.get(0), "null action must stay feasible");
        let pick = rng.gen_range(0..mask.count_feasible());
        let z = mask.feasible_indices().nth(pick).unwrap();
        let out = transition(&state, space.decode(z), config, &reward_cfg).unwrap();
        inspect(&out.state, out.reward);
        state = out.state;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn masked_rollouts_preserve_every_state_invariant(seed in 0u64..5_000) {
        let config = table3();
        let space = CentralizedActionSpace::enumerate(&config, None).unwrap();
        let initial = reset(&config);
        let mut finished_before = vec![false; config.num_tasks];
        let mut clock_before = 0u32;
        let mut rewards_paid = 0u32;

        random_masked_rollout(&config, &space, seed, |state, reward| {
            check_state_invariants(state, &config, &initial).unwrap();

            // Caps hold on every masked trajectory.
            for i in 0..config.num_workstations {
                assert!(state.occupancies[i] <= config.occupancy_caps[i]);
                for r in 0..config.num_resources {
                    assert!(
                        state.buffers[i * config.num_resources + r]
                            <= config.buffer_caps[i][r]
                    );
                }
            }

            // Finish flags never reset; the clock advances by exactly one.
            for (j, (&before, &now)) in
                finished_before.iter().zip(&state.finished).enumerate()
            {
                assert!(!(before && !now), "finished flag of task {j} reset");
            }
            assert_eq!(state.clock, clock_before + 1);

            if reward != 0.0 {
                rewards_paid += 1;
                assert!(state.all_finished(), "reward outside the finishing step");
            }

            finished_before = state.finished.clone();
            clock_before = state.clock;
        });

        assert!(rewards_paid <= 1, "reward fired more than once in an episode");
    }

    #[test]
    fn individually_feasible_rows_fail_jointly_only_on_shared_resources(seed in 0u64..5_000) {
        let config = table3();
        let spaces = AgentActionSpace::enumerate_all(&config);
        let space = CentralizedActionSpace::enumerate(&config, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let reward_cfg = RewardConfig::default();

        let mut state = reset(&config);
        while !state.done {
            // Draw one feasible row per agent and stack them.
            let rows: Vec<u64> = (0..config.num_workstations)
                .map(|i| {
                    let m = agent_mask(&state, i, &spaces[i], &config);
                    let pick = rng.gen_range(0..m.count_feasible());
                    let z = m.feasible_indices().nth(pick).unwrap();
                    spaces[i].decode(z)
                })
                .collect();
            let joint = TaskAssignment::from_rows(rows, config.num_tasks);
            match action_feasible(&state, &joint, &config) {
                Ok(()) => {
                    // A feasible joint action decomposes into feasible rows,
                    // already guaranteed by construction here.
                }
                Err(v) => {
                    // Per-workstation constraints cannot newly fail when the
                    // rows were individually feasible; only cross-agent
                    // conflicts can.
                    assert!(
                        matches!(
                            v,
                            Violation::DuplicateAssignment { .. }
                                | Violation::InsufficientInventory { .. }
                        ),
                        "unexpected cross-agent violation {v:?}"
                    );
                }
            }

            // Step with a uniformly random centrally-feasible action.
            let mask = centralized_mask(&state, &space, &config);
            let pick = rng.gen_range(0..mask.count_feasible());
            let z = mask.feasible_indices().nth(pick).unwrap();
            state = transition(&state, space.decode(z), &config, &reward_cfg).unwrap().state;
        }
    }

    #[test]
    fn joint_feasible_actions_have_agent_feasible_rows(seed in 0u64..5_000) {
        let config = table3();
        let spaces = AgentActionSpace::enumerate_all(&config);
        let space = CentralizedActionSpace::enumerate(&config, None).unwrap();

        random_masked_rollout(&config, &space, seed.wrapping_add(77), |state, _| {
            if state.done {
                return;
            }
            let mask = centralized_mask(state, &space, &config);
            for z in mask.feasible_indices().take(64) {
                let action = space.decode(z);
                for i in 0..config.num_workstations {
                    let row = action.row(i);
                    let agent = &spaces[i];
                    let idx = agent.encode(row).expect("row belongs to the agent space");
                    let m = agent_mask(state, i, agent, &config);
                    assert!(m.get(idx), "row of a feasible joint action is agent-infeasible");
                }
            }
        });
    }
}

#[test]
fn mask_lengths_match_space_sizes() {
    let config = table3();
    let spaces = AgentActionSpace::enumerate_all(&config);
    let space = CentralizedActionSpace::enumerate(&config, None).unwrap();
    let state = reset(&config);
    assert_eq!(centralized_mask(&state, &space, &config).len(), 336);
    for (i, agent) in spaces.iter().enumerate() {
        assert_eq!(agent_mask(&state, i, agent, &config).len(), agent.len());
    }
}

#[test]
fn reset_masks_match_brute_force_expectations() {
    // At reset only tasks 0, 2, 3 are assignable (1 and 4 wait on
    // precedences), so feasible actions are exactly the cap-respecting
    // assignments of subsets of those three tasks.
    let config = table3();
    let space = CentralizedActionSpace::enumerate(&config, None).unwrap();
    let state = reset(&config);
    let mask = centralized_mask(&state, &space, &config);

    let mut expected = 0usize;
    for (z, action) in space.iter().enumerate() {
        let allowed = action.assignments().all(|(_, j)| [0, 2, 3].contains(&j));
        assert_eq!(mask.get(z), allowed, "action {z} mask mismatch");
        expected += usize::from(allowed);
    }
    assert_eq!(mask.count_feasible(), expected);
    assert_eq!(expected, 44);

    // Agent 0 (cap 1): the null row plus the three assignable singletons.
    let spaces = AgentActionSpace::enumerate_all(&config);
    let m0 = agent_mask(&state, 0, &spaces[0], &config);
    assert_eq!(m0.count_feasible(), 4);
    assert_eq!(spaces[0].len(), 6);
}

#[test]
fn terminal_and_saturated_states_admit_only_null() {
    let config = table3();
    let space = CentralizedActionSpace::enumerate(&config, None).unwrap();

    let mut terminal = reset(&config);
    terminal.finished = vec![true; 5];
    let m = centralized_mask(&terminal, &space, &config);
    assert_eq!(m.count_feasible(), 1);
    assert!(m.get(0));

    // All workstations exactly at their occupancy caps.
    let mut saturated = reset(&config);
    let caps = config.occupancy_caps.clone();
    let mut task = 0usize;
    for (i, &cap) in caps.iter().enumerate() {
        for _ in 0..cap {
            let ij = saturated.ij(&config, i, task);
            saturated.executing[ij] = true;
            saturated.remaining[ij] = 2;
            saturated.occupancies[i] += 1;
            task += 1;
        }
    }
    let m = centralized_mask(&saturated, &space, &config);
    assert_eq!(m.count_feasible(), 1, "only the null action fits a saturated factory");
    assert!(m.get(0));
}
