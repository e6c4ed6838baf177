//! Exact state-transition dynamics and the terminal reward.

use crate::config::{FactoryConfig, RewardConfig};
use crate::mask::{action_feasible, Violation};
use crate::state::{FactoryState, TaskAssignment};

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: FactoryState,
    pub reward: f64,
    pub done: bool,
}

/// Applies the assignment phase of an action to `state` in place: occupancy
/// and execution flags are raised, the full duration is booked, and resources
/// move from the factory stock into per-task allocations. Durations are not
/// decremented and the clock does not advance, so this is also the booking
/// step used by fictitious multi-agent lookahead states.
pub fn book_assignments(
    state: &mut FactoryState,
    action: &TaskAssignment,
    config: &FactoryConfig,
) {
    let (nj, nr) = (config.num_tasks, config.num_resources);
    for (i, j) in action.assignments() {
        state.occupancies[i] += 1;
        let ij = i * nj + j;
        state.remaining[ij] = config.durations[i][j];
        state.executing[ij] = true;
        for r in 0..nr {
            let need = config.resource_needs[j][r];
            state.allocated[ij * nr + r] += need;
            state.buffers[i * nr + r] += need;
            state.inventories[r] -= i64::from(need);
        }
    }
}

/// One step of the factory: validates the action against the masking
/// constraints, books new assignments, then advances every executing task by
/// one time unit. Tasks reaching zero remaining duration finish, release
/// their workstation and clear their allocation. An action that books a task
/// now completes it exactly `durations[i][j]` transitions later.
pub fn transition(
    state: &FactoryState,
    action: &TaskAssignment,
    config: &FactoryConfig,
    reward_cfg: &RewardConfig,
) -> Result<StepOutcome, Violation> {
    action_feasible(state, action, config)?;
    Ok(transition_unchecked(state, action, config, reward_cfg))
}

/// The same dynamics without the feasibility gate. Infeasible actions are
/// applied verbatim and leave invariant violations in the resulting state;
/// used only to confirm that masked-out actions really break something.
pub fn transition_unchecked(
    state: &FactoryState,
    action: &TaskAssignment,
    config: &FactoryConfig,
    reward_cfg: &RewardConfig,
) -> StepOutcome {
    let mut next = state.clone();
    let was_finished = state.all_finished();

    book_assignments(&mut next, action, config);

    // Execution phase: every executing task, including ones booked this
    // step, progresses one time unit.
    let nr = config.num_resources;
    for i in 0..config.num_workstations {
        for j in 0..config.num_tasks {
            let ij = i * config.num_tasks + j;
            if !next.executing[ij] {
                continue;
            }
            next.remaining[ij] -= 1;
            if next.remaining[ij] == 0 {
                next.executing[ij] = false;
                next.finished[j] = true;
                next.occupancies[i] = next.occupancies[i].saturating_sub(1);
                for r in 0..nr {
                    let need = config.resource_needs[j][r];
                    let ijr = (i * config.num_tasks + j) * nr + r;
                    next.allocated[ijr] = next.allocated[ijr].saturating_sub(need);
                    let ir = i * nr + r;
                    next.buffers[ir] = next.buffers[ir].saturating_sub(need);
                    if config.returnable_resources {
                        next.inventories[r] += i64::from(need);
                    }
                }
            }
        }
    }

    next.clock += 1;
    let all_finished = next.all_finished();
    next.done = all_finished || next.clock >= config.horizon;

    // Terminal reward on the step where the last task finishes, valued at
    // the post-transition clock.
    let reward = if all_finished && !was_finished {
        reward_cfg.beta / (1.0 + f64::from(next.clock).powf(reward_cfg.alpha))
    } else {
        0.0
    };

    let done = next.done;
    StepOutcome { state: next, reward, done }
}

/// Structural-consistency check used by property tests and the mask sweep:
/// verifies every cross-field state invariant against the instance.
pub fn check_state_invariants(
    state: &FactoryState,
    config: &FactoryConfig,
    initial: &FactoryState,
) -> Result<(), String> {
    let (ni, nj, nr) = (config.num_workstations, config.num_tasks, config.num_resources);

    for i in 0..ni {
        let execs: u32 = (0..nj).map(|j| u32::from(state.executing[i * nj + j])).sum();
        if execs != state.occupancies[i] {
            return Err(format!(
                "occupancy of workstation {i} is {} but {execs} tasks execute there",
                state.occupancies[i]
            ));
        }
    }
    for i in 0..ni {
        for r in 0..nr {
            let sum: u32 = (0..nj).map(|j| state.allocated[(i * nj + j) * nr + r]).sum();
            if sum != state.buffers[i * nr + r] {
                return Err(format!("buffer ({i},{r}) does not equal summed allocations"));
            }
        }
    }
    for j in 0..nj {
        let execs: u32 = (0..ni).map(|i| u32::from(state.executing[i * nj + j])).sum();
        if execs > 1 {
            return Err(format!("task {j} executes on {execs} workstations"));
        }
        if state.finished[j] && execs > 0 {
            return Err(format!("finished task {j} is still executing"));
        }
        for i in 0..ni {
            if state.executing[i * nj + j] && state.remaining[i * nj + j] == 0 {
                return Err(format!("task {j} executes on {i} with zero remaining time"));
            }
        }
    }
    if state.done != (state.all_finished() || state.clock >= config.horizon) {
        return Err("done flag inconsistent with finish flags and horizon".into());
    }

    // Resource conservation against the initial stock.
    for r in 0..nr {
        let allocated: i64 = (0..ni * nj).map(|ij| i64::from(state.allocated[ij * nr + r])).sum();
        let consumed: i64 = if config.returnable_resources {
            0
        } else {
            (0..nj)
                .filter(|&j| state.finished[j])
                .map(|j| i64::from(config.resource_needs[j][r]))
                .sum()
        };
        let total = state.inventories[r] + allocated + consumed;
        if total != initial.inventories[r] {
            return Err(format!(
                "resource {r} not conserved: stock {} + allocated {allocated} + \
                 consumed {consumed} != initial {}",
                state.inventories[r], initial.inventories[r]
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::table3;
    use crate::state::reset;

    #[test]
    fn assignment_books_resources_and_starts_execution() {
        let cfg = table3();
        let rc = RewardConfig::default();
        let s = reset(&cfg);
        let a = TaskAssignment::from_pairs(3, 5, &[(0, 0)]);
        let out = transition(&s, &a, &cfg, &rc).unwrap();
        let n = &out.state;
        // Duration 4 is booked and one unit is worked off in the same step.
        assert_eq!(n.remaining[n.ij(&cfg, 0, 0)], 3);
        assert!(n.executing[n.ij(&cfg, 0, 0)]);
        assert_eq!(n.occupancies[0], 1);
        assert_eq!(n.allocated[n.ijr(&cfg, 0, 0, 0)], 13);
        assert_eq!(n.allocated[n.ijr(&cfg, 0, 0, 1)], 12);
        assert_eq!(n.inventories, vec![987, 1988]);
        assert_eq!(n.buffers[n.ir(&cfg, 0, 0)], 13);
        assert_eq!(out.reward, 0.0);
        assert!(!out.done);
        assert_eq!(n.clock, 1);
    }

    #[test]
    fn null_action_only_advances_the_clock() {
        let cfg = table3();
        let rc = RewardConfig::default();
        let s = reset(&cfg);
        let out = transition(&s, &TaskAssignment::empty(3, 5), &cfg, &rc).unwrap();
        let mut expect = s.clone();
        expect.clock = 1;
        assert_eq!(out.state, expect);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn task_finishes_exactly_duration_steps_after_assignment() {
        let cfg = table3();
        let rc = RewardConfig::default();
        let mut s = reset(&cfg);
        let a = TaskAssignment::from_pairs(3, 5, &[(2, 0)]); // duration 3
        s = transition(&s, &a, &cfg, &rc).unwrap().state;
        let null = TaskAssignment::empty(3, 5);
        s = transition(&s, &null, &cfg, &rc).unwrap().state;
        assert!(!s.finished[0]);
        s = transition(&s, &null, &cfg, &rc).unwrap().state;
        assert!(s.finished[0]);
        assert_eq!(s.clock, 3);
        assert_eq!(s.occupancies[2], 0);
        // Consumable resources are not returned to stock.
        assert_eq!(s.inventories, vec![987, 1988]);
        assert_eq!(s.buffers, vec![0; 6]);
    }

    #[test]
    fn terminal_reward_uses_post_transition_clock() {
        let cfg = table3();
        let rc = RewardConfig { alpha: 1.0, beta: 10.0 };
        // Task 4 executing on workstation 2 with one unit left, clock 8,
        // everything else finished.
        let mut s = reset(&cfg);
        for j in 0..4 {
            s.finished[j] = true;
        }
        let ij = s.ij(&cfg, 2, 4);
        s.executing[ij] = true;
        s.remaining[ij] = 1;
        s.occupancies[2] = 1;
        for r in 0..2 {
            let need = cfg.resource_needs[4][r];
            let ijr = s.ijr(&cfg, 2, 4, r);
            let ir = s.ir(&cfg, 2, r);
            s.allocated[ijr] = need;
            s.buffers[ir] = need;
        }
        s.clock = 8;
        let out = transition(&s, &TaskAssignment::empty(3, 5), &cfg, &rc).unwrap();
        assert!(out.state.finished[4]);
        assert!(out.done);
        assert_eq!(out.state.clock, 9);
        assert_eq!(out.reward, 1.0); // 10 / (1 + 9)
    }

    #[test]
    fn returnable_resources_flow_back_on_completion() {
        let mut cfg = table3();
        cfg.returnable_resources = true;
        let rc = RewardConfig::default();
        let mut s = reset(&cfg);
        let a = TaskAssignment::from_pairs(3, 5, &[(2, 0)]);
        s = transition(&s, &a, &cfg, &rc).unwrap().state;
        assert_eq!(s.inventories, vec![987, 1988]);
        let null = TaskAssignment::empty(3, 5);
        s = transition(&s, &null, &cfg, &rc).unwrap().state;
        s = transition(&s, &null, &cfg, &rc).unwrap().state;
        assert!(s.finished[0]);
        assert_eq!(s.inventories, vec![1000, 2000]);
    }

    #[test]
    fn horizon_truncation_sets_done_without_reward() {
        let cfg = table3();
        let rc = RewardConfig::default();
        let mut s = reset(&cfg);
        s.clock = cfg.horizon - 1;
        let out = transition(&s, &TaskAssignment::empty(3, 5), &cfg, &rc).unwrap();
        assert!(out.done);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.state.clock, cfg.horizon);
    }

    #[test]
    fn infeasible_action_is_rejected_not_repaired() {
        let cfg = table3();
        let rc = RewardConfig::default();
        let s = reset(&cfg);
        let a = TaskAssignment::from_pairs(3, 5, &[(0, 1)]);
        let err = transition(&s, &a, &cfg, &rc).unwrap_err();
        assert_eq!(err.constraint_number(), 5);
    }
}
