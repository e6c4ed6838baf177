//! Random small instances for cross-validation experiments. Precedences are
//! sampled as forward edges only, so every generated instance is acyclic by
//! construction; stock and buffer caps are occasionally drawn tight so the
//! resource constraints actually bite.

use alb_sim::FactoryConfig;
use rand::Rng;

pub struct InstanceBounds {
    pub max_workstations: usize,
    pub max_tasks: usize,
    pub max_resources: usize,
    pub max_duration: u32,
    pub min_horizon: u32,
    pub max_horizon: u32,
}

impl Default for InstanceBounds {
    fn default() -> Self {
        InstanceBounds {
            max_workstations: 3,
            max_tasks: 5,
            max_resources: 2,
            max_duration: 4,
            min_horizon: 8,
            max_horizon: 15,
        }
    }
}

pub fn random_small_instance(bounds: &InstanceBounds, rng: &mut impl Rng) -> FactoryConfig {
    let ni = rng.gen_range(1..=bounds.max_workstations);
    let nj = rng.gen_range(1..=bounds.max_tasks);
    let nr = rng.gen_range(1..=bounds.max_resources);
    let horizon = rng.gen_range(bounds.min_horizon..=bounds.max_horizon);

    let durations: Vec<Vec<u32>> = (0..ni)
        .map(|_| (0..nj).map(|_| rng.gen_range(1..=bounds.max_duration)).collect())
        .collect();

    // Mostly loose deadlines, sometimes tight enough to exclude slow
    // workstations.
    let deadlines: Vec<u32> = (0..nj)
        .map(|j| {
            if rng.gen_bool(0.25) {
                let fastest = (0..ni).map(|i| durations[i][j]).min().unwrap();
                rng.gen_range(fastest.max(2)..=horizon)
            } else {
                horizon
            }
        })
        .collect();

    let occupancy_caps: Vec<u32> =
        (0..ni).map(|_| rng.gen_range(1..=(nj.min(3) as u32))).collect();

    let mut precedence = vec![vec![0i8; nj]; nj];
    for a in 0..nj {
        for b in (a + 1)..nj {
            if rng.gen_bool(0.25) {
                precedence[a][b] = 1;
                precedence[b][a] = -1;
            }
        }
    }

    let resource_needs: Vec<Vec<u32>> =
        (0..nj).map(|_| (0..nr).map(|_| rng.gen_range(0..=3)).collect()).collect();

    let total_need: Vec<u64> = (0..nr)
        .map(|r| resource_needs.iter().map(|row| u64::from(row[r])).sum())
        .collect();
    let inventories: Vec<u64> = (0..nr)
        .map(|r| {
            if rng.gen_bool(0.3) {
                // Tight stock: enough for every task but nothing spare.
                total_need[r].max(1)
            } else {
                total_need[r] * 2 + 4
            }
        })
        .collect();

    let max_need: u32 = resource_needs.iter().flatten().copied().max().unwrap_or(0);
    let buffer_caps: Vec<Vec<u32>> = (0..ni)
        .map(|_| {
            (0..nr)
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        // Tight buffers: one or two allocations at a time.
                        max_need.max(1) + rng.gen_range(0..=max_need)
                    } else {
                        20
                    }
                })
                .collect()
        })
        .collect();

    let cfg = FactoryConfig {
        num_workstations: ni,
        num_tasks: nj,
        num_resources: nr,
        horizon,
        occupancy_caps,
        buffer_caps,
        durations,
        deadlines,
        precedence,
        resource_needs,
        inventories,
        returnable_resources: rng.gen_bool(0.1),
    };
    cfg.validate().expect("generated instance must be valid");
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_instances_are_always_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bounds = InstanceBounds::default();
        for _ in 0..200 {
            let cfg = random_small_instance(&bounds, &mut rng);
            cfg.validate().unwrap();
            assert!(cfg.num_workstations <= 3 && cfg.num_tasks <= 5);
        }
    }
}
