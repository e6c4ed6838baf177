//! State-dependent action feasibility: the seven masking constraints, plus
//! centralized and per-workstation mask construction.

use thiserror::Error;

use crate::actions::{AgentActionSpace, CentralizedActionSpace};
use crate::config::FactoryConfig;
use crate::state::{FactoryState, TaskAssignment};

/// Why an action is infeasible in a given state. Variants carry the first
/// violation found, checked in constraint order 1..=7; `DuplicateAssignment`
/// covers structurally invalid joint actions built from per-agent rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("task {task} is assigned to more than one workstation")]
    DuplicateAssignment { task: usize },
    #[error("constraint 1: task {task} is already finished")]
    FinishedTask { task: usize },
    #[error("constraint 2: task {task} is already executing")]
    AlreadyExecuting { task: usize },
    #[error(
        "constraint 3: task {task} on workstation {workstation} would finish at \
         {completion} after its deadline {deadline}"
    )]
    DeadlineViolated { workstation: usize, task: usize, completion: u32, deadline: u32 },
    #[error("constraint 4: workstation {workstation} would exceed its occupancy cap")]
    OccupancyExceeded { workstation: usize },
    #[error("constraint 5: task {task} requires task {predecessor} to be finished")]
    PrecedenceViolated { task: usize, predecessor: usize },
    #[error(
        "constraint 6: workstation {workstation} buffer for resource {resource} \
         would exceed its cap"
    )]
    BufferExceeded { workstation: usize, resource: usize },
    #[error("constraint 7: factory stock of resource {resource} is insufficient")]
    InsufficientInventory { resource: usize },
    #[error("action shape ({got_ws}x{got_tasks}) does not match the instance")]
    ShapeMismatch { got_ws: usize, got_tasks: usize },
}

impl Violation {
    /// Constraint number 1..=7, or 0 for structural/shape problems.
    pub fn constraint_number(&self) -> u8 {
        match self {
            Violation::DuplicateAssignment { .. } | Violation::ShapeMismatch { .. } => 0,
            Violation::FinishedTask { .. } => 1,
            Violation::AlreadyExecuting { .. } => 2,
            Violation::DeadlineViolated { .. } => 3,
            Violation::OccupancyExceeded { .. } => 4,
            Violation::PrecedenceViolated { .. } => 5,
            Violation::BufferExceeded { .. } => 6,
            Violation::InsufficientInventory { .. } => 7,
        }
    }
}

/// Checks every masking constraint against `state`, returning the first
/// violation in constraint order. The null action is always feasible.
pub fn action_feasible(
    state: &FactoryState,
    action: &TaskAssignment,
    config: &FactoryConfig,
) -> Result<(), Violation> {
    let (ni, nj, nr) = (config.num_workstations, config.num_tasks, config.num_resources);
    if action.num_workstations() != ni || action.num_tasks() != nj {
        return Err(Violation::ShapeMismatch {
            got_ws: action.num_workstations(),
            got_tasks: action.num_tasks(),
        });
    }

    // Structural: one workstation per task (can only fail for joint actions
    // concatenated from per-agent rows).
    let mut seen = 0u64;
    for i in 0..ni {
        let row = action.row(i);
        let clash = seen & row;
        if clash != 0 {
            let task = nj - 1 - clash.trailing_zeros() as usize;
            return Err(Violation::DuplicateAssignment { task });
        }
        seen |= row;
    }

    // 1. Do not assign finished tasks.
    for (_, j) in action.assignments() {
        if state.finished[j] {
            return Err(Violation::FinishedTask { task: j });
        }
    }

    // 2. Do not assign tasks already in execution.
    for (_, j) in action.assignments() {
        if state.task_executing(config, j) {
            return Err(Violation::AlreadyExecuting { task: j });
        }
    }

    // 3. Deadlines: an assignment made now completes at clock + D(i,j).
    for (i, j) in action.assignments() {
        let completion = state.clock + config.durations[i][j];
        if completion > config.deadlines[j] {
            return Err(Violation::DeadlineViolated {
                workstation: i,
                task: j,
                completion,
                deadline: config.deadlines[j],
            });
        }
    }

    // 4. Occupancy caps.
    for i in 0..ni {
        let incoming = action.row(i).count_ones();
        if incoming > 0 && state.occupancies[i] + incoming > config.occupancy_caps[i] {
            return Err(Violation::OccupancyExceeded { workstation: i });
        }
    }

    // 5. Precedences: all predecessors of an assigned task must be finished.
    for (_, j) in action.assignments() {
        for p in config.predecessors(j) {
            if !state.finished[p] {
                return Err(Violation::PrecedenceViolated { task: j, predecessor: p });
            }
        }
    }

    // 6. Workstation buffers: current content plus incoming allocation.
    for i in 0..ni {
        if action.row(i) == 0 {
            continue;
        }
        for r in 0..nr {
            let incoming: u32 = action.row_tasks(i).map(|j| config.resource_needs[j][r]).sum();
            if u64::from(state.buffers[state.ir(config, i, r)]) + u64::from(incoming)
                > u64::from(config.buffer_caps[i][r])
            {
                return Err(Violation::BufferExceeded { workstation: i, resource: r });
            }
        }
    }

    // 7. Factory stock: total incoming demand per resource.
    for r in 0..nr {
        let demand: u64 = action
            .assignments()
            .map(|(_, j)| u64::from(config.resource_needs[j][r]))
            .sum();
        if (demand as i64) > state.inventories[r] {
            return Err(Violation::InsufficientInventory { resource: r });
        }
    }

    Ok(())
}

/// Binary feasibility vector over an enumerated action space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMask {
    bits: Vec<u64>,
    len: usize,
}

impl ActionMask {
    pub fn all_false(len: usize) -> Self {
        ActionMask { bits: vec![0; len.div_ceil(64)], len }
    }

    pub fn all_true(len: usize) -> Self {
        let mut m = Self::all_false(len);
        for z in 0..len {
            m.set(z, true);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, z: usize) -> bool {
        debug_assert!(z < self.len);
        self.bits[z / 64] & (1u64 << (z % 64)) != 0
    }

    pub fn set(&mut self, z: usize, value: bool) {
        debug_assert!(z < self.len);
        if value {
            self.bits[z / 64] |= 1u64 << (z % 64);
        } else {
            self.bits[z / 64] &= !(1u64 << (z % 64));
        }
    }

    pub fn count_feasible(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn feasible_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&z| self.get(z))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|z| self.get(z)).collect()
    }
}

/// Mask over the centralized action space: entry `z` is feasibility of the
/// `z`-th enumerated action in `state`.
pub fn centralized_mask(
    state: &FactoryState,
    space: &CentralizedActionSpace,
    config: &FactoryConfig,
) -> ActionMask {
    let mut m = ActionMask::all_false(space.len());
    for (z, action) in space.iter().enumerate() {
        if action_feasible(state, action, config).is_ok() {
            m.set(z, true);
        }
    }
    m
}

/// Mask over one workstation's action space: each candidate row is evaluated
/// as a joint action with every other row empty.
pub fn agent_mask(
    state: &FactoryState,
    agent: usize,
    space: &AgentActionSpace,
    config: &FactoryConfig,
) -> ActionMask {
    let mut m = ActionMask::all_false(space.len());
    for (z, &row) in space.rows().iter().enumerate() {
        let mut rows = vec![0u64; config.num_workstations];
        rows[agent] = row;
        let probe = TaskAssignment::from_rows(rows, config.num_tasks);
        if action_feasible(state, &probe, config).is_ok() {
            m.set(z, true);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::table3;
    use crate::state::reset;

    #[test]
    fn null_action_is_feasible_at_reset() {
        let cfg = table3();
        let s = reset(&cfg);
        let null = TaskAssignment::empty(3, 5);
        assert_eq!(action_feasible(&s, &null, &cfg), Ok(()));
    }

    #[test]
    fn unfinished_predecessor_blocks_assignment() {
        // Task 1 (0-based) requires task 0 finished; at reset nothing is.
        let cfg = table3();
        let s = reset(&cfg);
        for ws in 0..3 {
            let a = TaskAssignment::from_pairs(3, 5, &[(ws, 1)]);
            assert_eq!(
                action_feasible(&s, &a, &cfg),
                Err(Violation::PrecedenceViolated { task: 1, predecessor: 0 })
            );
        }
    }

    #[test]
    fn deadline_blocks_late_assignment() {
        // At clock 9, task 2 on workstation 1 takes 12 steps: 21 > 20.
        let cfg = table3();
        let mut s = reset(&cfg);
        s.clock = 9;
        let a = TaskAssignment::from_pairs(3, 5, &[(1, 2)]);
        assert_eq!(
            action_feasible(&s, &a, &cfg),
            Err(Violation::DeadlineViolated {
                workstation: 1,
                task: 2,
                completion: 21,
                deadline: 20
            })
        );
    }

    #[test]
    fn duplicate_assignment_is_structural() {
        let cfg = table3();
        let s = reset(&cfg);
        let a = TaskAssignment::from_pairs(3, 5, &[(0, 2), (1, 2)]);
        let err = action_feasible(&s, &a, &cfg).unwrap_err();
        assert_eq!(err, Violation::DuplicateAssignment { task: 2 });
        assert_eq!(err.constraint_number(), 0);
    }

    #[test]
    fn occupancy_cap_blocks_overfull_row() {
        let cfg = table3();
        let s = reset(&cfg);
        // Workstation 0 has cap 1; tasks 0 and 2 have no predecessors.
        let a = TaskAssignment::from_pairs(3, 5, &[(0, 0), (0, 2)]);
        assert_eq!(
            action_feasible(&s, &a, &cfg),
            Err(Violation::OccupancyExceeded { workstation: 0 })
        );
    }
}
