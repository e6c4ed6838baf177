//! Mutable simulation state and assignment actions.

use crate::config::FactoryConfig;

/// One assignment action: a binary workstation x task matrix with at most
/// one workstation per task. Row `i` is stored as a task bitmask with task 0
/// at the high bit of a `num_tasks`-wide field, so that comparing rows as
/// integers matches lexicographic order of the flattened matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskAssignment {
    rows: Vec<u64>,
    num_tasks: usize,
}

impl TaskAssignment {
    pub fn empty(num_workstations: usize, num_tasks: usize) -> Self {
        assert!(num_tasks <= 64, "instances with more than 64 tasks are unsupported");
        TaskAssignment { rows: vec![0; num_workstations], num_tasks }
    }

    pub fn from_rows(rows: Vec<u64>, num_tasks: usize) -> Self {
        assert!(num_tasks <= 64);
        TaskAssignment { rows, num_tasks }
    }

    /// Builds an action from explicit (workstation, task) pairs.
    pub fn from_pairs(
        num_workstations: usize,
        num_tasks: usize,
        pairs: &[(usize, usize)],
    ) -> Self {
        let mut a = Self::empty(num_workstations, num_tasks);
        for &(i, j) in pairs {
            a.set(i, j);
        }
        a
    }

    #[inline]
    fn bit(&self, task: usize) -> u64 {
        1u64 << (self.num_tasks - 1 - task)
    }

    #[inline]
    pub fn get(&self, workstation: usize, task: usize) -> bool {
        self.rows[workstation] & self.bit(task) != 0
    }

    pub fn set(&mut self, workstation: usize, task: usize) {
        let b = self.bit(task);
        self.rows[workstation] |= b;
    }

    pub fn num_workstations(&self) -> usize {
        self.rows.len()
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn row(&self, workstation: usize) -> u64 {
        self.rows[workstation]
    }

    pub fn is_null(&self) -> bool {
        self.rows.iter().all(|&r| r == 0)
    }

    pub fn assignment_count(&self) -> u32 {
        self.rows.iter().map(|r| r.count_ones()).sum()
    }

    /// Iterates assigned (workstation, task) pairs in row-major order.
    pub fn assignments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nj = self.num_tasks;
        self.rows.iter().enumerate().flat_map(move |(i, &row)| {
            (0..nj).filter_map(move |j| {
                if row & (1u64 << (nj - 1 - j)) != 0 {
                    Some((i, j))
                } else {
                    None
                }
            })
        })
    }

    /// Tasks assigned in row `workstation`, as indices.
    pub fn row_tasks(&self, workstation: usize) -> impl Iterator<Item = usize> + '_ {
        let nj = self.num_tasks;
        let row = self.rows[workstation];
        (0..nj).filter(move |&j| row & (1u64 << (nj - 1 - j)) != 0)
    }

    /// True when some task is assigned to more than one workstation.
    pub fn has_column_conflict(&self) -> bool {
        let mut seen = 0u64;
        for &row in &self.rows {
            if seen & row != 0 {
                return true;
            }
            seen |= row;
        }
        false
    }

    /// Stacks one row per workstation into a joint action. Rows must all be
    /// `num_tasks` wide; no feasibility checks are performed here.
    pub fn concat_rows(rows: &[u64], num_tasks: usize) -> Self {
        TaskAssignment { rows: rows.to_vec(), num_tasks }
    }
}

/// Mutable factory state: clock plus occupancies, remaining durations,
/// task-specific allocations, execution/finish flags, stock and buffers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactoryState {
    pub clock: u32,
    /// Tasks currently executing per workstation, length |I|.
    pub occupancies: Vec<u32>,
    /// Remaining duration per (workstation, task), row-major |I| x |J|.
    pub remaining: Vec<u32>,
    /// Allocated units per (workstation, task, resource), row-major |I| x |J| x |R|.
    pub allocated: Vec<u32>,
    /// Execution flags per (workstation, task), row-major |I| x |J|.
    pub executing: Vec<bool>,
    /// Finish flags per task, length |J|.
    pub finished: Vec<bool>,
    /// Current factory stock per resource. Signed so that validation-disabled
    /// transitions can surface over-consumption instead of underflowing.
    pub inventories: Vec<i64>,
    /// Stored units per (workstation, resource), row-major |I| x |R|.
    pub buffers: Vec<u32>,
    pub done: bool,
}

impl FactoryState {
    #[inline]
    pub fn ij(&self, config: &FactoryConfig, i: usize, j: usize) -> usize {
        i * config.num_tasks + j
    }

    #[inline]
    pub fn ijr(&self, config: &FactoryConfig, i: usize, j: usize, r: usize) -> usize {
        (i * config.num_tasks + j) * config.num_resources + r
    }

    #[inline]
    pub fn ir(&self, config: &FactoryConfig, i: usize, r: usize) -> usize {
        i * config.num_resources + r
    }

    pub fn all_finished(&self) -> bool {
        self.finished.iter().all(|&f| f)
    }

    /// True when some workstation is executing `task`.
    pub fn task_executing(&self, config: &FactoryConfig, task: usize) -> bool {
        (0..config.num_workstations)
            .any(|i| self.executing[i * config.num_tasks + task])
    }

    /// Flattens [occupancies; remaining; allocated] into a network input,
    /// scaled by the instance maxima so entries stay within [0, 1].
    pub fn flatten(&self, config: &FactoryConfig) -> Vec<f64> {
        let mut out = Vec::with_capacity(config.state_vector_len());
        let o_scale = f64::from(config.max_occupancy_cap()).max(1.0);
        let d_scale = f64::from(config.max_duration()).max(1.0);
        let c_scale = f64::from(config.max_resource_need()).max(1.0);
        out.extend(self.occupancies.iter().map(|&o| f64::from(o) / o_scale));
        out.extend(self.remaining.iter().map(|&d| f64::from(d) / d_scale));
        out.extend(self.allocated.iter().map(|&r| f64::from(r) / c_scale));
        out
    }
}

/// Fresh state for an instance: clock zero, nothing assigned, full stock.
pub fn reset(config: &FactoryConfig) -> FactoryState {
    let (ni, nj, nr) = (config.num_workstations, config.num_tasks, config.num_resources);
    FactoryState {
        clock: 0,
        occupancies: vec![0; ni],
        remaining: vec![0; ni * nj],
        allocated: vec![0; ni * nj * nr],
        executing: vec![false; ni * nj],
        finished: vec![false; nj],
        inventories: config.inventories.iter().map(|&g| g as i64).collect(),
        buffers: vec![0; ni * nr],
        done: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::table3;

    #[test]
    fn reset_state_is_all_zero_except_inventories() {
        let cfg = table3();
        let s = reset(&cfg);
        assert_eq!(s.clock, 0);
        assert!(s.occupancies.iter().all(|&o| o == 0));
        assert!(s.remaining.iter().all(|&d| d == 0));
        assert!(s.allocated.iter().all(|&r| r == 0));
        assert!(!s.done);
        assert_eq!(s.inventories, vec![1000, 2000]);
    }

    #[test]
    fn flatten_has_state_vector_len_and_is_zero_at_reset() {
        let cfg = table3();
        let v = reset(&cfg).flatten(&cfg);
        assert_eq!(v.len(), 48);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn assignment_bit_layout_is_lexicographic() {
        // Task 0 occupies the high bit, so row values sort like the
        // flattened 0/1 sequence.
        let mut a = TaskAssignment::empty(2, 5);
        a.set(0, 4);
        let mut b = TaskAssignment::empty(2, 5);
        b.set(0, 0);
        assert!(a < b);
        assert_eq!(a.assignments().collect::<Vec<_>>(), vec![(0, 4)]);
        assert_eq!(b.assignments().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn column_conflicts_are_detected() {
        let a = TaskAssignment::from_pairs(3, 5, &[(0, 2), (1, 2)]);
        assert!(a.has_column_conflict());
        let b = TaskAssignment::from_pairs(3, 5, &[(0, 2), (1, 3)]);
        assert!(!b.has_column_conflict());
    }
}
