//! Exact minimum-makespan oracle: depth-first branch-and-bound over masked
//! action sequences, with an independent breadth-first search used to
//! cross-validate it.

use std::collections::HashMap;

use thiserror::Error;

use crate::actions::CentralizedActionSpace;
use crate::config::{FactoryConfig, RewardConfig};
use crate::mask::action_feasible;
use crate::state::{reset, FactoryState, TaskAssignment};
use crate::transition::transition_unchecked;

/// Default search-node budget.
pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("node budget of {budget} exhausted before the search completed")]
    NodeBudgetExhausted { budget: u64 },
    #[error(transparent)]
    Space(#[from] crate::actions::SpaceError),
}

/// Outcome of an exact solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Solved {
    /// Minimum completion clock plus a replayable certificate: the action
    /// taken at every clock from the start state to completion.
    Optimal(SolveResult),
    /// No feasible action sequence finishes every task within the horizon.
    InfeasibleWithinHorizon { nodes_expanded: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub k_opt: u32,
    /// `(clock, action)` pairs; replaying them through the transition from
    /// the start state finishes all tasks exactly at `k_opt`.
    pub schedule: Vec<(u32, TaskAssignment)>,
    pub nodes_expanded: u64,
}

impl Solved {
    pub fn optimal(&self) -> Option<&SolveResult> {
        match self {
            Solved::Optimal(r) => Some(r),
            Solved::InfeasibleWithinHorizon { .. } => None,
        }
    }
}

/// Admissible completion-time bound from `state`: each unfinished task needs
/// at least its remaining execution time (or its fastest duration anywhere if
/// not started), after the longest chain of unfinished predecessors, each
/// relaxed to its fastest duration.
pub fn lower_bound(state: &FactoryState, config: &FactoryConfig) -> u32 {
    let nj = config.num_tasks;
    let mut memo: Vec<Option<u32>> = vec![None; nj];

    fn chain(
        j: usize,
        state: &FactoryState,
        config: &FactoryConfig,
        memo: &mut Vec<Option<u32>>,
    ) -> u32 {
        if state.finished[j] {
            return 0;
        }
        if let Some(v) = memo[j] {
            return v;
        }
        let own = remaining_estimate(j, state, config);
        let pred_chain = config
            .predecessors(j)
            .filter(|&p| !state.finished[p])
            .map(|p| chain(p, state, config, memo))
            .max()
            .unwrap_or(0);
        let total = own + pred_chain;
        memo[j] = Some(total);
        total
    }

    (0..nj).map(|j| chain(j, state, config, &mut memo)).max().unwrap_or(0)
}

fn remaining_estimate(j: usize, state: &FactoryState, config: &FactoryConfig) -> u32 {
    for i in 0..config.num_workstations {
        let ij = i * config.num_tasks + j;
        if state.executing[ij] {
            return state.remaining[ij];
        }
    }
    (0..config.num_workstations).map(|i| config.durations[i][j]).min().unwrap_or(0)
}

/// Dominance key: remaining durations and finish flags determine every other
/// state field, and a state reached at a later clock can never beat the same
/// state reached earlier.
#[derive(PartialEq, Eq, Hash)]
struct StateKey {
    remaining: Vec<u32>,
    finished: u64,
}

fn key_of(state: &FactoryState) -> StateKey {
    let mut finished = 0u64;
    for (j, &f) in state.finished.iter().enumerate() {
        if f {
            finished |= 1 << j;
        }
    }
    StateKey { remaining: state.remaining.clone(), finished }
}

struct Search<'a> {
    config: &'a FactoryConfig,
    space: &'a CentralizedActionSpace,
    reward_cfg: RewardConfig,
    budget: u64,
    nodes: u64,
    best: u32,
    best_path: Option<Vec<usize>>,
    seen: HashMap<StateKey, u32>,
    /// Feasible action indices per node, ordered most-assignments-first so
    /// complete schedules appear early and tighten the bound.
    by_size: Vec<usize>,
}

impl<'a> Search<'a> {
    fn dfs(&mut self, state: &FactoryState, path: &mut Vec<usize>) -> Result<(), SolveError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(SolveError::NodeBudgetExhausted { budget: self.budget });
        }
        if state.all_finished() {
            if state.clock < self.best {
                self.best = state.clock;
                self.best_path = Some(path.clone());
            }
            return Ok(());
        }
        if state.clock >= self.config.horizon {
            return Ok(());
        }
        if state.clock + lower_bound(state, self.config) >= self.best {
            return Ok(());
        }
        match self.seen.get(&key_of(state)) {
            Some(&c) if c <= state.clock => return Ok(()),
            _ => {
                self.seen.insert(key_of(state), state.clock);
            }
        }

        let feasible: Vec<usize> = self
            .by_size
            .iter()
            .copied()
            .filter(|&z| action_feasible(state, self.space.decode(z), self.config).is_ok())
            .collect();
        for z in feasible {
            let out =
                transition_unchecked(state, self.space.decode(z), self.config, &self.reward_cfg);
            path.push(z);
            self.dfs(&out.state, path)?;
            path.pop();
        }
        Ok(())
    }

    /// Second pass: walk actions in ascending index order and return the
    /// first schedule reaching `target`, which is the lexicographically
    /// smallest optimal action sequence.
    fn lex_certificate(
        &mut self,
        state: &FactoryState,
        target: u32,
        path: &mut Vec<usize>,
    ) -> Result<Option<Vec<usize>>, SolveError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(SolveError::NodeBudgetExhausted { budget: self.budget });
        }
        if state.all_finished() {
            return Ok(Some(path.clone()));
        }
        if state.clock >= self.config.horizon
            || state.clock + lower_bound(state, self.config) > target
        {
            return Ok(None);
        }
        match self.seen.get(&key_of(state)) {
            Some(&c) if c <= state.clock => return Ok(None),
            _ => {
                self.seen.insert(key_of(state), state.clock);
            }
        }
        for z in 0..self.space.len() {
            if action_feasible(state, self.space.decode(z), self.config).is_err() {
                continue;
            }
            let out =
                transition_unchecked(state, self.space.decode(z), self.config, &self.reward_cfg);
            path.push(z);
            if let Some(found) = self.lex_certificate(&out.state, target, path)? {
                return Ok(Some(found));
            }
            path.pop();
        }
        Ok(None)
    }
}

/// Exact solve from the reset state.
pub fn solve(config: &FactoryConfig, node_budget: Option<u64>) -> Result<Solved, SolveError> {
    solve_from(&reset(config), config, node_budget)
}

/// Exact solve from an arbitrary reachable state; `k_opt` is the absolute
/// clock at which every task can be finished.
pub fn solve_from(
    start: &FactoryState,
    config: &FactoryConfig,
    node_budget: Option<u64>,
) -> Result<Solved, SolveError> {
    let space = CentralizedActionSpace::enumerate(config, None)?;
    let budget = node_budget.unwrap_or(DEFAULT_NODE_BUDGET);

    let mut by_size: Vec<usize> = (0..space.len()).collect();
    by_size.sort_by_key(|&z| std::cmp::Reverse(space.decode(z).assignment_count()));

    let mut search = Search {
        config,
        space: &space,
        reward_cfg: RewardConfig::default(),
        budget,
        nodes: 0,
        best: config.horizon + 1,
        best_path: None,
        seen: HashMap::new(),
        by_size,
    };

    search.dfs(start, &mut Vec::new())?;
    let Some(_) = search.best_path else {
        return Ok(Solved::InfeasibleWithinHorizon { nodes_expanded: search.nodes });
    };
    let k_opt = search.best;

    // Deterministic certificate: lexicographically smallest optimal schedule.
    search.seen.clear();
    let lex = search
        .lex_certificate(start, k_opt, &mut Vec::new())?
        .expect("an optimal schedule was already found");

    let schedule = lex
        .iter()
        .enumerate()
        .map(|(t, &z)| (start.clock + t as u32, space.decode(z).clone()))
        .collect();
    Ok(Solved::Optimal(SolveResult { k_opt, schedule, nodes_expanded: search.nodes }))
}

/// Independent oracle: plain breadth-first search over the reachable state
/// graph, one clock layer at a time. Returns the minimum completion clock.
pub fn bfs_optimum(
    start: &FactoryState,
    config: &FactoryConfig,
    node_budget: Option<u64>,
) -> Result<Option<u32>, SolveError> {
    let space = CentralizedActionSpace::enumerate(config, None)?;
    let budget = node_budget.unwrap_or(DEFAULT_NODE_BUDGET);
    let reward_cfg = RewardConfig::default();

    let mut nodes = 0u64;
    let mut visited: HashMap<StateKey, ()> = HashMap::new();
    let mut frontier = vec![start.clone()];
    visited.insert(key_of(start), ());

    if start.all_finished() {
        return Ok(Some(start.clock));
    }

    while !frontier.is_empty() {
        let mut next_frontier = Vec::new();
        for state in &frontier {
            if state.clock >= config.horizon {
                continue;
            }
            for z in 0..space.len() {
                if action_feasible(state, space.decode(z), config).is_err() {
                    continue;
                }
                nodes += 1;
                if nodes > budget {
                    return Err(SolveError::NodeBudgetExhausted { budget });
                }
                let out = transition_unchecked(state, space.decode(z), config, &reward_cfg);
                if out.state.all_finished() {
                    return Ok(Some(out.state.clock));
                }
                let key = key_of(&out.state);
                if let std::collections::hash_map::Entry::Vacant(e) = visited.entry(key) {
                    e.insert(());
                    next_frontier.push(out.state);
                }
            }
        }
        frontier = next_frontier;
    }
    Ok(None)
}

/// Replays a certificate, failing loudly on any violation, and returns the
/// completion clock.
pub fn replay_schedule(
    start: &FactoryState,
    schedule: &[(u32, TaskAssignment)],
    config: &FactoryConfig,
) -> Result<u32, String> {
    let reward_cfg = RewardConfig::default();
    let mut state = start.clone();
    for (clock, action) in schedule {
        if state.clock != *clock {
            return Err(format!("schedule clock {clock} does not match state {}", state.clock));
        }
        match crate::transition::transition(&state, action, config, &reward_cfg) {
            Ok(out) => state = out.state,
            Err(v) => return Err(format!("infeasible action at clock {clock}: {v}")),
        }
    }
    if !state.all_finished() {
        return Err("schedule does not finish all tasks".into());
    }
    Ok(state.clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::table3;

    fn single_task_config(durations: Vec<Vec<u32>>, horizon: u32) -> FactoryConfig {
        let ni = durations.len();
        let nj = durations[0].len();
        FactoryConfig {
            num_workstations: ni,
            num_tasks: nj,
            num_resources: 1,
            horizon,
            occupancy_caps: vec![1; ni],
            buffer_caps: vec![vec![100]; ni],
            durations,
            deadlines: vec![horizon; nj],
            precedence: vec![vec![0; nj]; nj],
            resource_needs: vec![vec![1]; nj],
            inventories: vec![100],
            returnable_resources: false,
        }
    }

    #[test]
    fn one_task_finishes_in_its_duration() {
        let cfg = single_task_config(vec![vec![3]], 10);
        let solved = solve(&cfg, None).unwrap();
        let r = solved.optimal().unwrap();
        assert_eq!(r.k_opt, 3);
        assert_eq!(replay_schedule(&reset(&cfg), &r.schedule, &cfg).unwrap(), 3);
    }

    #[test]
    fn forced_sequence_is_serialized_by_precedence() {
        let mut cfg = single_task_config(vec![vec![2, 2]], 12);
        cfg.precedence = vec![vec![0, 1], vec![-1, 0]];
        cfg.validate().unwrap();
        let solved = solve(&cfg, None).unwrap();
        assert_eq!(solved.optimal().unwrap().k_opt, 4);
    }

    #[test]
    fn lower_bound_examples() {
        let cfg = table3();
        let s = reset(&cfg);
        // Chain 0 -> 1 at fastest durations: 3 + 4.
        assert_eq!(lower_bound(&s, &cfg), 7);

        let mut terminal = s.clone();
        terminal.finished = vec![true; 5];
        assert_eq!(lower_bound(&terminal, &cfg), 0);

        let single = single_task_config(vec![vec![4], vec![6]], 10);
        assert_eq!(lower_bound(&reset(&single), &single), 4);
    }

    #[test]
    fn branch_and_bound_matches_bfs_on_bundled_instance() {
        let cfg = table3();
        let solved = solve(&cfg, None).unwrap();
        let r = solved.optimal().unwrap();
        let bfs = bfs_optimum(&reset(&cfg), &cfg, None).unwrap().unwrap();
        assert_eq!(r.k_opt, bfs);
        assert!(r.k_opt >= 7);
        assert_eq!(replay_schedule(&reset(&cfg), &r.schedule, &cfg).unwrap(), r.k_opt);
    }

    #[test]
    fn node_budget_exhaustion_is_an_error() {
        let cfg = table3();
        assert_eq!(
            solve(&cfg, Some(3)).unwrap_err(),
            SolveError::NodeBudgetExhausted { budget: 3 }
        );
    }

    #[test]
    fn infeasible_horizon_is_reported() {
        let cfg = single_task_config(vec![vec![5]], 3);
        // Deadline 3 < duration 5: no assignment is ever feasible.
        let solved = solve(&cfg, None).unwrap();
        assert!(matches!(solved, Solved::InfeasibleWithinHorizon { .. }));
    }
}
