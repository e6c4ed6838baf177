//! Problem instances: immutable factory parameters and reward settings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Immutable description of a factory instance: workstations, tasks,
/// resources, capacities, durations, deadlines, precedences and stock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoryConfig {
    pub num_workstations: usize,
    pub num_tasks: usize,
    pub num_resources: usize,
    /// Episode horizon in time steps.
    pub horizon: u32,
    /// Max simultaneous tasks per workstation, length `num_workstations`.
    pub occupancy_caps: Vec<u32>,
    /// Resource units storable per workstation, `num_workstations x num_resources`.
    pub buffer_caps: Vec<Vec<u32>>,
    /// Task durations per workstation, `num_workstations x num_tasks`, all > 0.
    pub durations: Vec<Vec<u32>>,
    /// Per-task deadlines in time steps, length `num_tasks`, all > 0.
    pub deadlines: Vec<u32>,
    /// Precedence matrix, `num_tasks x num_tasks`, entries in {-1, 0, 1}.
    /// `precedence[a][b] == -1` means task `b` must finish before task `a` starts.
    pub precedence: Vec<Vec<i8>>,
    /// Resource units each task consumes, `num_tasks x num_resources`.
    pub resource_needs: Vec<Vec<u32>>,
    /// Initial factory stock per resource type, length `num_resources`.
    pub inventories: Vec<u64>,
    /// When true, completed tasks return their allocation to the factory
    /// stock (tool-like resources); when false the allocation is consumed.
    #[serde(default)]
    pub returnable_resources: bool,
}

/// Terminal-reward parameters: reward is `beta / (1 + k^alpha)` on the step
/// where the last task finishes, zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { alpha: 1.0, beta: 10.0 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{field} must be positive")]
    ZeroDimension { field: &'static str },
    #[error("{field} has {got} rows, expected {expected}")]
    BadRowCount { field: &'static str, expected: usize, got: usize },
    #[error("{field} row {row} has {got} entries, expected {expected}")]
    BadRowLength { field: &'static str, row: usize, expected: usize, got: usize },
    #[error("{field} has {got} entries, expected {expected}")]
    BadLength { field: &'static str, expected: usize, got: usize },
    #[error("duration for workstation {workstation}, task {task} must be positive")]
    NonPositiveDuration { workstation: usize, task: usize },
    #[error("occupancy cap for workstation {workstation} must be positive")]
    NonPositiveOccupancy { workstation: usize },
    #[error("deadline for task {task} must be positive")]
    NonPositiveDeadline { task: usize },
    #[error("horizon must be positive")]
    NonPositiveHorizon,
    #[error("precedence({a},{b}) = {value} is outside {{-1, 0, 1}}")]
    PrecedenceEntry { a: usize, b: usize, value: i8 },
    #[error("precedence diagonal entry ({task},{task}) must be zero")]
    PrecedenceDiagonal { task: usize },
    #[error("precedence({a},{b}) and precedence({b},{a}) are not antisymmetric")]
    PrecedenceAsymmetry { a: usize, b: usize },
    #[error("precedence graph contains a cycle through task {task}")]
    PrecedenceCycle { task: usize },
    #[error("reward parameter {field} must be positive")]
    NonPositiveReward { field: &'static str },
    #[error("failed to read instance file: {0}")]
    Io(String),
    #[error("failed to parse instance file: {0}")]
    Parse(String),
}

impl FactoryConfig {
    /// Full invariant validation with line-item errors.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let (ni, nj, nr) = (self.num_workstations, self.num_tasks, self.num_resources);
        if ni == 0 {
            return Err(ConfigError::ZeroDimension { field: "num_workstations" });
        }
        if nj == 0 {
            return Err(ConfigError::ZeroDimension { field: "num_tasks" });
        }
        if nr == 0 {
            return Err(ConfigError::ZeroDimension { field: "num_resources" });
        }
        if self.horizon == 0 {
            return Err(ConfigError::NonPositiveHorizon);
        }

        check_len("occupancy_caps", &self.occupancy_caps, ni)?;
        check_matrix("buffer_caps", &self.buffer_caps, ni, nr)?;
        check_matrix("durations", &self.durations, ni, nj)?;
        check_len("deadlines", &self.deadlines, nj)?;
        check_matrix("precedence", &self.precedence, nj, nj)?;
        check_matrix("resource_needs", &self.resource_needs, nj, nr)?;
        check_len("inventories", &self.inventories, nr)?;

        for (i, &cap) in self.occupancy_caps.iter().enumerate() {
            if cap == 0 {
                return Err(ConfigError::NonPositiveOccupancy { workstation: i });
            }
        }
        for (i, row) in self.durations.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                if d == 0 {
                    return Err(ConfigError::NonPositiveDuration { workstation: i, task: j });
                }
            }
        }
        for (j, &f) in self.deadlines.iter().enumerate() {
            if f == 0 {
                return Err(ConfigError::NonPositiveDeadline { task: j });
            }
        }

        for a in 0..nj {
            for b in 0..nj {
                let p = self.precedence[a][b];
                if !(-1..=1).contains(&p) {
                    return Err(ConfigError::PrecedenceEntry { a, b, value: p });
                }
                if a == b && p != 0 {
                    return Err(ConfigError::PrecedenceDiagonal { task: a });
                }
                if (p == 1) != (self.precedence[b][a] == -1) {
                    return Err(ConfigError::PrecedenceAsymmetry { a, b });
                }
            }
        }
        self.check_acyclic()?;
        Ok(())
    }

    /// Kahn toposort over the edges `a -> b` where `precedence[a][b] == 1`
    /// (task `a` must finish before task `b`).
    fn check_acyclic(&self) -> Result<(), ConfigError> {
        let nj = self.num_tasks;
        let mut indegree = vec![0usize; nj];
        for a in 0..nj {
            for b in 0..nj {
                if self.precedence[a][b] == 1 {
                    indegree[b] += 1;
                }
            }
        }
        let mut queue: Vec<usize> = (0..nj).filter(|&j| indegree[j] == 0).collect();
        let mut removed = 0;
        while let Some(a) = queue.pop() {
            removed += 1;
            for b in 0..nj {
                if self.precedence[a][b] == 1 {
                    indegree[b] -= 1;
                    if indegree[b] == 0 {
                        queue.push(b);
                    }
                }
            }
        }
        if removed != nj {
            let task = indegree.iter().position(|&d| d > 0).unwrap_or(0);
            return Err(ConfigError::PrecedenceCycle { task });
        }
        Ok(())
    }

    /// Loads and validates an instance from a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: FactoryConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// Predecessors of `task`: every task that must be finished before it starts.
    pub fn predecessors(&self, task: usize) -> impl Iterator<Item = usize> + '_ {
        self.precedence[task]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == -1)
            .map(|(b, _)| b)
    }

    /// Length of the flattened state vector:
    /// occupancies + remaining durations + task-specific allocations.
    pub fn state_vector_len(&self) -> usize {
        self.num_workstations * (1 + self.num_tasks * (1 + self.num_resources))
    }

    pub fn max_duration(&self) -> u32 {
        self.durations.iter().flatten().copied().max().unwrap_or(1)
    }

    pub fn max_occupancy_cap(&self) -> u32 {
        self.occupancy_caps.iter().copied().max().unwrap_or(1)
    }

    pub fn max_resource_need(&self) -> u32 {
        self.resource_needs.iter().flatten().copied().max().unwrap_or(0)
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0) {
            return Err(ConfigError::NonPositiveReward { field: "alpha" });
        }
        if !(self.beta > 0.0) {
            return Err(ConfigError::NonPositiveReward { field: "beta" });
        }
        Ok(())
    }
}

fn check_len<T>(field: &'static str, v: &[T], expected: usize) -> Result<(), ConfigError> {
    if v.len() != expected {
        return Err(ConfigError::BadLength { field, expected, got: v.len() });
    }
    Ok(())
}

fn check_matrix<T>(
    field: &'static str,
    m: &[Vec<T>],
    rows: usize,
    cols: usize,
) -> Result<(), ConfigError> {
    if m.len() != rows {
        return Err(ConfigError::BadRowCount { field, expected: rows, got: m.len() });
    }
    for (row, r) in m.iter().enumerate() {
        if r.len() != cols {
            return Err(ConfigError::BadRowLength { field, row, expected: cols, got: r.len() });
        }
    }
    Ok(())
}
