//! Multi-agent coordination: fictitious booking states and the randomized
//! sequential feasibility check that turns independent per-workstation
//! proposals into one feasible joint action.

use alb_sim::{
    agent_mask, book_assignments, AgentActionSpace, FactoryConfig, FactoryState, TaskAssignment,
};
use alb_sim::ActionMask;
use rand::seq::SliceRandom;
use rand::Rng;

/// A copy of the factory state where proposed assignments book assets
/// (occupancy, execution flags, allocations, buffers, stock) but durations
/// never tick and the clock never advances. Masks recomputed on it hide
/// tasks and resources already claimed by earlier agents in the loop.
#[derive(Debug, Clone)]
pub struct FictitiousEnv {
    pub state: FactoryState,
}

impl FictitiousEnv {
    pub fn new(state: &FactoryState) -> Self {
        FictitiousEnv { state: state.clone() }
    }

    /// Books one workstation's proposed row into the fictitious state.
    pub fn book_row(&mut self, workstation: usize, row: u64, config: &FactoryConfig) {
        let mut rows = vec![0u64; config.num_workstations];
        rows[workstation] = row;
        let action = TaskAssignment::from_rows(rows, config.num_tasks);
        book_assignments(&mut self.state, &action, config);
    }

    /// The fictitious mask for one agent, recomputed from the booked state.
    pub fn mask_for(
        &self,
        workstation: usize,
        space: &AgentActionSpace,
        config: &FactoryConfig,
    ) -> ActionMask {
        agent_mask(&self.state, workstation, space, config)
    }
}

/// Result of one sequential feasibility check.
#[derive(Debug, Clone)]
pub struct SfcOutcome {
    pub joint: TaskAssignment,
    /// The per-agent action index each agent ended up executing.
    pub chosen: Vec<usize>,
    /// The order in which agents were visited.
    pub order: Vec<usize>,
}

/// Visits every agent once in a uniformly random order. Each visited agent
/// re-selects from its own policy against the fictitious state and mask, and
/// its choice is booked before the next agent is consulted, so the
/// concatenated action is feasible by construction: the null row is always
/// available as a fallback.
///
/// `select(agent, fictitious_state, fictitious_mask, rng)` must return a
/// mask-feasible index of that agent's space.
pub fn sequential_feasibility_check<R, F>(
    state: &FactoryState,
    config: &FactoryConfig,
    spaces: &[AgentActionSpace],
    mut select: F,
    rng: &mut R,
) -> SfcOutcome
where
    R: Rng,
    F: FnMut(usize, &FactoryState, &ActionMask, &mut R) -> usize,
{
    let ni = config.num_workstations;
    debug_assert_eq!(spaces.len(), ni);

    let mut order: Vec<usize> = (0..ni).collect();
    order.shuffle(rng);

    let mut env = FictitiousEnv::new(state);
    let mut rows = vec![0u64; ni];
    let mut chosen = vec![0usize; ni];

    for &agent in &order {
        let fictitious_mask = env.mask_for(agent, &spaces[agent], config);
        let z = select(agent, &env.state, &fictitious_mask, rng);
        assert!(
            fictitious_mask.get(z),
            "agent {agent} selected an index its fictitious mask rejects"
        );
        let row = spaces[agent].decode(z);
        chosen[agent] = z;
        rows[agent] = row;
        env.book_row(agent, row, config);
    }

    SfcOutcome {
        joint: TaskAssignment::from_rows(rows, config.num_tasks),
        chosen,
        order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alb_sim::{action_feasible, instances::table3, reset, FactoryConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Picks the row assigning exactly the given task if feasible, else null.
    fn prefer_task(
        task: usize,
        space: &AgentActionSpace,
        mask: &ActionMask,
    ) -> usize {
        let want = 1u64 << (space.num_tasks() - 1 - task);
        match space.encode(want) {
            Some(z) if mask.get(z) => z,
            _ => 0,
        }
    }

    #[test]
    fn booking_masks_the_task_for_later_agents() {
        let cfg = table3();
        let spaces = AgentActionSpace::enumerate_all(&cfg);
        let state = reset(&cfg);
        let mut env = FictitiousEnv::new(&state);

        // Agent 0 books task 2; afterwards every agent's fictitious mask
        // rejects any row containing task 2.
        let row = 1u64 << (5 - 1 - 2);
        assert!(env
            .mask_for(0, &spaces[0], &cfg)
            .get(spaces[0].encode(row).unwrap()));
        env.book_row(0, row, &cfg);
        assert_eq!(env.state.clock, 0);
        assert_eq!(env.state.remaining[env.state.ij(&cfg, 0, 2)], cfg.durations[0][2]);

        for agent in 0..3 {
            let m = env.mask_for(agent, &spaces[agent], &cfg);
            for (z, &r) in spaces[agent].rows().iter().enumerate() {
                if r & row != 0 {
                    assert!(!m.get(z), "agent {agent} row {z} should be masked");
                }
            }
        }
    }

    #[test]
    fn null_proposals_leave_the_fictitious_state_unchanged() {
        let cfg = table3();
        let state = reset(&cfg);
        let mut env = FictitiousEnv::new(&state);
        env.book_row(1, 0, &cfg);
        assert_eq!(env.state, state);
    }

    #[test]
    fn inventory_exhaustion_masks_later_rows() {
        // Two workstations, two tasks that each need 3 units of the single
        // resource, but only 4 units in stock: after one is booked, the
        // other's row is masked by the stock constraint.
        let cfg = FactoryConfig {
            num_workstations: 2,
            num_tasks: 2,
            num_resources: 1,
            horizon: 10,
            occupancy_caps: vec![1, 1],
            buffer_caps: vec![vec![10], vec![10]],
            durations: vec![vec![2, 2], vec![2, 2]],
            deadlines: vec![10, 10],
            precedence: vec![vec![0, 0], vec![0, 0]],
            resource_needs: vec![vec![3], vec![3]],
            inventories: vec![4],
            returnable_resources: false,
        };
        cfg.validate().unwrap();
        let spaces = AgentActionSpace::enumerate_all(&cfg);
        let mut env = FictitiousEnv::new(&reset(&cfg));

        env.book_row(0, 1 << 1, &cfg); // task 0 on workstation 0
        assert_eq!(env.state.inventories, vec![1]);
        let m = env.mask_for(1, &spaces[1], &cfg);
        // Null stays feasible; any row needing 3 more units is masked.
        assert!(m.get(0));
        assert_eq!(m.count_feasible(), 1);
    }

    #[test]
    fn conflicting_proposals_resolve_to_one_winner() {
        let cfg = table3();
        let spaces = AgentActionSpace::enumerate_all(&cfg);
        let state = reset(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(42);

        let mut wins = [0u32; 2];
        for _ in 0..1000 {
            // Agents 0 and 2 both want task 2 (feasible at reset); agent 1
            // stays null.
            let outcome = sequential_feasibility_check(
                &state,
                &cfg,
                &spaces,
                |agent, _s, mask, _rng| match agent {
                    0 | 2 => prefer_task(2, &spaces[agent], mask),
                    _ => 0,
                },
                &mut rng,
            );
            assert!(action_feasible(&state, &outcome.joint, &cfg).is_ok());
            assert!(!outcome.joint.has_column_conflict());
            let w0 = outcome.joint.get(0, 2);
            let w2 = outcome.joint.get(2, 2);
            assert!(w0 ^ w2, "exactly one agent wins the contested task");
            wins[usize::from(w2)] += 1;
        }
        // Random visiting order keeps the contest near even.
        for w in wins {
            let freq = f64::from(w) / 1000.0;
            assert!((freq - 0.5).abs() < 0.05, "win frequency {freq}");
        }
    }

    #[test]
    fn all_null_proposals_return_the_null_action() {
        let cfg = table3();
        let spaces = AgentActionSpace::enumerate_all(&cfg);
        let state = reset(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let outcome =
            sequential_feasibility_check(&state, &cfg, &spaces, |_, _, _, _| 0, &mut rng);
        assert!(outcome.joint.is_null());
        assert_eq!(outcome.order.len(), 3);
    }

    #[test]
    fn single_agent_pool_is_identity() {
        let cfg = FactoryConfig {
            num_workstations: 1,
            num_tasks: 2,
            num_resources: 1,
            horizon: 10,
            occupancy_caps: vec![2],
            buffer_caps: vec![vec![10]],
            durations: vec![vec![2, 3]],
            deadlines: vec![10, 10],
            precedence: vec![vec![0, 0], vec![0, 0]],
            resource_needs: vec![vec![1], vec![1]],
            inventories: vec![10],
            returnable_resources: false,
        };
        cfg.validate().unwrap();
        let spaces = AgentActionSpace::enumerate_all(&cfg);
        let state = reset(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // The agent's own masked choice passes through unchanged.
        let outcome = sequential_feasibility_check(
            &state,
            &cfg,
            &spaces,
            |_, _, mask, _| mask.feasible_indices().last().unwrap(),
            &mut rng,
        );
        assert_eq!(outcome.chosen[0], spaces[0].len() - 1);
    }
}
