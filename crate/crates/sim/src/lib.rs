//! Deterministic simulator for generalized assembly-line balancing: a
//! constrained MDP over task and resource assignments to workstations, with
//! exact feasibility masks, enumerated action spaces and an exact
//! minimum-makespan solver.

pub mod actions;
pub mod config;
pub mod instances;
pub mod mask;
pub mod solver;
pub mod state;
pub mod sweep;
pub mod transition;

pub use actions::{
    concat_rows, count_agent_space, count_occupancy_constrained, count_unconstrained,
    count_unique_assignment, AgentActionSpace, CentralizedActionSpace, SpaceError,
};
pub use config::{ConfigError, FactoryConfig, RewardConfig};
pub use mask::{action_feasible, agent_mask, centralized_mask, ActionMask, Violation};
pub use solver::{
    bfs_optimum, lower_bound, replay_schedule, solve, solve_from, SolveError, SolveResult, Solved,
};
pub use state::{reset, FactoryState, TaskAssignment};
pub use transition::{
    book_assignments, check_state_invariants, transition, transition_unchecked, StepOutcome,
};
