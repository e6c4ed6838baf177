//! Enumeration, counting and index codecs for the centralized and
//! per-workstation assignment action spaces.

use num_bigint::BigUint;
use thiserror::Error;

use crate::config::FactoryConfig;
use crate::state::TaskAssignment;

/// Default cap on how many actions may be materialized at once.
pub const DEFAULT_MATERIALIZE_CAP: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpaceError {
    #[error(
        "centralized action space has {size} members, beyond the materialization \
         cap of {cap}; use the per-workstation (multi-agent) spaces instead"
    )]
    CapExceeded { size: BigUint, cap: u64 },
    #[error("expected {expected} rows, got {got}")]
    RowCountMismatch { expected: usize, got: usize },
}

/// Number of unconstrained binary assignment matrices: 2^(|I|*|J|).
pub fn count_unconstrained(num_workstations: usize, num_tasks: usize) -> BigUint {
    BigUint::from(1u32) << (num_workstations * num_tasks)
}

/// Matrices where each task goes to at most one workstation: (|I|+1)^|J|.
pub fn count_unique_assignment(num_workstations: usize, num_tasks: usize) -> BigUint {
    BigUint::from(num_workstations + 1).pow(num_tasks as u32)
}

/// Matrices satisfying both the unique-assignment and the per-workstation
/// occupancy constraints, via the nested binomial sum: workstation by
/// workstation, choose how many of the still-unassigned tasks it takes.
pub fn count_occupancy_constrained(occupancy_caps: &[u32], num_tasks: usize) -> BigUint {
    fn rec(caps: &[u32], tasks_left: usize) -> BigUint {
        match caps.split_first() {
            None => BigUint::from(1u32),
            Some((&cap, rest)) => {
                let take_max = (cap as usize).min(tasks_left);
                let mut total = BigUint::from(0u32);
                for take in 0..=take_max {
                    total += binomial(tasks_left, take) * rec(rest, tasks_left - take);
                }
                total
            }
        }
    }
    rec(occupancy_caps, num_tasks)
}

/// Size of workstation `i`'s own space: subsets of at most `cap` tasks.
pub fn count_agent_space(cap: u32, num_tasks: usize) -> BigUint {
    let mut total = BigUint::from(0u32);
    for take in 0..=(cap as usize).min(num_tasks) {
        total += binomial(num_tasks, take);
    }
    total
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let mut result = BigUint::from(1u32);
    for step in 0..k.min(n - k) {
        result = result * BigUint::from(n - step) / BigUint::from(step + 1);
    }
    result
}

/// The materialized centralized action space: every structurally valid
/// assignment matrix in lexicographic order of the flattened matrix, with
/// index 0 the null action.
#[derive(Debug, Clone)]
pub struct CentralizedActionSpace {
    actions: Vec<TaskAssignment>,
    num_tasks: usize,
}

impl CentralizedActionSpace {
    /// Enumerates the space, refusing instances whose exact count exceeds
    /// `cap` (`None` uses [`DEFAULT_MATERIALIZE_CAP`]).
    pub fn enumerate(config: &FactoryConfig, cap: Option<u64>) -> Result<Self, SpaceError> {
        let cap = cap.unwrap_or(DEFAULT_MATERIALIZE_CAP);
        let size = count_occupancy_constrained(&config.occupancy_caps, config.num_tasks);
        if size > BigUint::from(cap) {
            return Err(SpaceError::CapExceeded { size, cap });
        }

        let (ni, nj) = (config.num_workstations, config.num_tasks);
        let mut actions = Vec::new();
        let mut rows = vec![0u64; ni];
        // Depth-first over flattened bit positions, 0-branch before 1-branch,
        // which emits actions in ascending lexicographic order.
        fn rec(
            pos: usize,
            ni: usize,
            nj: usize,
            caps: &[u32],
            rows: &mut Vec<u64>,
            used_tasks: u64,
            row_count: u32,
            out: &mut Vec<TaskAssignment>,
        ) {
            if pos == ni * nj {
                out.push(TaskAssignment::from_rows(rows.clone(), nj));
                return;
            }
            let (i, j) = (pos / nj, pos % nj);
            let at_row_end = j == nj - 1;
            let next_count = if at_row_end { 0 } else { row_count };

            // Leave the bit at zero.
            rec(pos + 1, ni, nj, caps, rows, used_tasks, next_count, out);

            // Set the bit when the task is free and the row has capacity.
            let bit = 1u64 << (nj - 1 - j);
            if used_tasks & bit == 0 && row_count < caps[i] {
                rows[i] |= bit;
                let next_count = if at_row_end { 0 } else { row_count + 1 };
                rec(pos + 1, ni, nj, caps, rows, used_tasks | bit, next_count, out);
                rows[i] &= !bit;
            }
        }
        rec(0, ni, nj, &config.occupancy_caps, &mut rows, 0, 0, &mut actions);
        debug_assert!(actions.windows(2).all(|w| w[0] < w[1]));
        Ok(CentralizedActionSpace { actions, num_tasks: nj })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn decode(&self, index: usize) -> &TaskAssignment {
        &self.actions[index]
    }

    /// Index of a structurally valid action, if it belongs to the space.
    pub fn encode(&self, action: &TaskAssignment) -> Option<usize> {
        self.actions.binary_search(action).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TaskAssignment> {
        self.actions.iter()
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }
}

/// One workstation's action space: task subsets of size at most its
/// occupancy cap, as row bitmasks in lexicographic order, index 0 null.
#[derive(Debug, Clone)]
pub struct AgentActionSpace {
    rows: Vec<u64>,
    workstation: usize,
    num_tasks: usize,
}

impl AgentActionSpace {
    pub fn enumerate(config: &FactoryConfig, workstation: usize) -> Self {
        let nj = config.num_tasks;
        let cap = config.occupancy_caps[workstation];
        let mut rows = Vec::new();
        fn rec(pos: usize, nj: usize, cap: u32, row: u64, ones: u32, out: &mut Vec<u64>) {
            if pos == nj {
                out.push(row);
                return;
            }
            rec(pos + 1, nj, cap, row, ones, out);
            if ones < cap {
                rec(pos + 1, nj, cap, row | (1u64 << (nj - 1 - pos)), ones + 1, out);
            }
        }
        rec(0, nj, cap, 0, 0, &mut rows);
        debug_assert!(rows.windows(2).all(|w| w[0] < w[1]));
        AgentActionSpace { rows, workstation, num_tasks: nj }
    }

    /// Spaces for every workstation of the instance.
    pub fn enumerate_all(config: &FactoryConfig) -> Vec<AgentActionSpace> {
        (0..config.num_workstations).map(|i| Self::enumerate(config, i)).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn workstation(&self) -> usize {
        self.workstation
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn decode(&self, index: usize) -> u64 {
        self.rows[index]
    }

    pub fn encode(&self, row: u64) -> Option<usize> {
        self.rows.binary_search(&row).ok()
    }
}

/// Stacks one row per workstation into a joint action. Shape errors aside,
/// no validation happens here; feasibility is the mask's job.
pub fn concat_rows(
    rows: &[u64],
    config: &FactoryConfig,
) -> Result<TaskAssignment, SpaceError> {
    if rows.len() != config.num_workstations {
        return Err(SpaceError::RowCountMismatch {
            expected: config.num_workstations,
            got: rows.len(),
        });
    }
    Ok(TaskAssignment::concat_rows(rows, config.num_tasks))
}
