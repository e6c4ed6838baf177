//! Mask soundness/completeness checking: every admitted action must
//! transition cleanly, and every rejected action, when forced through a
//! validation-disabled transition, must leave a state that demonstrably
//! breaks the constraint the mask named.

use crate::actions::CentralizedActionSpace;
use crate::config::{FactoryConfig, RewardConfig};
use crate::mask::{action_feasible, Violation};
use crate::state::{FactoryState, TaskAssignment};
use crate::transition::{check_state_invariants, transition, transition_unchecked};

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SweepStats {
    pub states_checked: u64,
    pub actions_admitted: u64,
    pub actions_rejected: u64,
}

/// Exhaustively checks one state against every action of the space.
/// Returns an error describing the first discrepancy, if any.
pub fn check_state(
    state: &FactoryState,
    space: &CentralizedActionSpace,
    config: &FactoryConfig,
    initial: &FactoryState,
    stats: &mut SweepStats,
) -> Result<(), String> {
    let reward_cfg = RewardConfig::default();
    stats.states_checked += 1;

    // Null-action liveness.
    if action_feasible(state, space.decode(0), config).is_err() {
        return Err(format!("null action infeasible at clock {}", state.clock));
    }

    for z in 0..space.len() {
        let action = space.decode(z);
        match action_feasible(state, action, config) {
            Ok(()) => {
                stats.actions_admitted += 1;
                let out = transition(state, action, config, &reward_cfg)
                    .map_err(|v| format!("admitted action {z} failed to transition: {v}"))?;
                check_state_invariants(&out.state, config, initial)
                    .map_err(|e| format!("admitted action {z} broke an invariant: {e}"))?;
                for i in 0..config.num_workstations {
                    if out.state.occupancies[i] > config.occupancy_caps[i] {
                        return Err(format!("admitted action {z} exceeded occupancy cap {i}"));
                    }
                    for r in 0..config.num_resources {
                        if out.state.buffers[i * config.num_resources + r]
                            > config.buffer_caps[i][r]
                        {
                            return Err(format!(
                                "admitted action {z} exceeded buffer cap ({i},{r})"
                            ));
                        }
                    }
                }
            }
            Err(violation) => {
                stats.actions_rejected += 1;
                let forced = transition_unchecked(state, action, config, &reward_cfg);
                if !forced_breach(state, &forced.state, action, config, initial, &violation) {
                    return Err(format!(
                        "action {z} rejected with `{violation}` but forcing it left no \
                         matching breach at clock {}",
                        state.clock
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Does the forced step exhibit the breach the violation names? Most
/// constraints leave evidence in the successor alone. Capacity-style
/// constraints additionally accept mid-step evidence (booking demand against
/// the pre-state), since a task completing in the same forced step can hand
/// back exactly the capacity the booking overdrew.
fn forced_breach(
    pre: &FactoryState,
    post: &FactoryState,
    action: &TaskAssignment,
    config: &FactoryConfig,
    initial: &FactoryState,
    violation: &Violation,
) -> bool {
    let (ni, nj, nr) = (config.num_workstations, config.num_tasks, config.num_resources);
    match violation {
        // A doubly-assigned or re-assigned task shows up as more than one
        // executing flag, a finished task running again, or occupancies out
        // of sync with the execution flags.
        Violation::DuplicateAssignment { task } | Violation::AlreadyExecuting { task } => {
            let execs: u32 = (0..ni).map(|i| u32::from(post.executing[i * nj + task])).sum();
            execs > 1
                || (post.finished[*task] && execs > 0)
                || occupancy_out_of_sync(post, config)
        }
        Violation::FinishedTask { task } => {
            let running_again = (0..ni).any(|i| post.executing[i * nj + task]);
            // A re-booked finished task at least double-consumes resources.
            (post.finished[*task] && running_again)
                || occupancy_out_of_sync(post, config)
                || check_state_invariants(post, config, initial).is_err()
        }
        Violation::DeadlineViolated { workstation, task, .. } => {
            let ij = workstation * nj + task;
            let still_running =
                post.executing[ij] && post.clock + post.remaining[ij] > config.deadlines[*task];
            let finished_late = !pre.finished[*task]
                && post.finished[*task]
                && post.clock > config.deadlines[*task];
            still_running || finished_late
        }
        Violation::OccupancyExceeded { workstation } => {
            let booked = pre.occupancies[*workstation] + action.row(*workstation).count_ones();
            post.occupancies[*workstation] > config.occupancy_caps[*workstation]
                || booked > config.occupancy_caps[*workstation]
        }
        Violation::PrecedenceViolated { task, predecessor } => {
            // The task really started (books, runs or even completes) while
            // its predecessor had not finished beforehand.
            let started = (0..ni).any(|i| post.executing[i * nj + task])
                || (!pre.finished[*task] && post.finished[*task]);
            started && !pre.finished[*predecessor]
        }
        Violation::BufferExceeded { workstation, resource } => {
            let incoming: u64 = action
                .row_tasks(*workstation)
                .map(|j| u64::from(config.resource_needs[j][*resource]))
                .sum();
            let booked = u64::from(pre.buffers[workstation * nr + resource]) + incoming;
            post.buffers[workstation * nr + resource] > config.buffer_caps[*workstation][*resource]
                || booked > u64::from(config.buffer_caps[*workstation][*resource])
        }
        Violation::InsufficientInventory { resource } => {
            let demand: i64 = action
                .assignments()
                .map(|(_, j)| i64::from(config.resource_needs[j][*resource]))
                .sum();
            post.inventories[*resource] < 0 || pre.inventories[*resource] < demand
        }
        Violation::ShapeMismatch { .. } => false,
    }
}

fn occupancy_out_of_sync(state: &FactoryState, config: &FactoryConfig) -> bool {
    let (ni, nj) = (config.num_workstations, config.num_tasks);
    (0..ni).any(|i| {
        let execs: u32 = (0..nj).map(|j| u32::from(state.executing[i * nj + j])).sum();
        execs != state.occupancies[i]
    })
}
