//! Action-space growth tables: centralized counts versus the largest
//! per-workstation space as the task count grows.

use alb_sim::actions::{
    count_agent_space, count_occupancy_constrained, count_unconstrained, count_unique_assignment,
};
use num_bigint::{BigInt, BigUint};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthRow {
    pub num_tasks: usize,
    pub unconstrained: BigUint,
    pub unique_assignment: BigUint,
    pub occupancy_constrained: BigUint,
    pub max_agent: BigUint,
}

/// Exact counts for `|J| = 1..=max_tasks` against a fixed occupancy profile.
pub fn growth_report(occupancy_caps: &[u32], max_tasks: usize) -> Vec<GrowthRow> {
    let ni = occupancy_caps.len();
    (1..=max_tasks)
        .map(|nj| GrowthRow {
            num_tasks: nj,
            unconstrained: count_unconstrained(ni, nj),
            unique_assignment: count_unique_assignment(ni, nj),
            occupancy_constrained: count_occupancy_constrained(occupancy_caps, nj),
            max_agent: occupancy_caps
                .iter()
                .map(|&cap| count_agent_space(cap, nj))
                .max()
                .unwrap_or_else(|| BigUint::from(1u32)),
        })
        .collect()
}

pub fn growth_csv(rows: &[GrowthRow]) -> String {
    let mut out = String::from(
        "num_tasks,unconstrained,unique_assignment,occupancy_constrained,max_agent\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.num_tasks, r.unconstrained, r.unique_assignment, r.occupancy_constrained, r.max_agent
        ));
    }
    out
}

/// Forward-difference operator over an exact integer sequence.
pub fn forward_differences(values: &[BigInt]) -> Vec<BigInt> {
    values.windows(2).map(|w| &w[1] - &w[0]).collect()
}

/// Exact polynomial-degree test: a sequence sampled at consecutive integers
/// is a polynomial of degree exactly `d` iff its d-th forward difference is
/// a nonzero constant (so the (d+1)-th vanishes).
pub fn polynomial_degree(values: &[BigInt], max_degree: usize) -> Option<usize> {
    let mut diffs = values.to_vec();
    for degree in 0..=max_degree {
        if diffs.iter().all(|v| *v == BigInt::from(0)) {
            // The zero polynomial; degree collapses below zero, treat as 0.
            return Some(degree.saturating_sub(1));
        }
        let constant = diffs.iter().all(|v| *v == diffs[0]);
        if constant && diffs[0] != BigInt::from(0) {
            return Some(degree);
        }
        if diffs.len() < 2 {
            return None;
        }
        diffs = forward_differences(&diffs);
    }
    None
}

pub fn to_bigints(values: &[BigUint]) -> Vec<BigInt> {
    values.iter().map(|v| BigInt::from(v.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_profile_row_matches_the_counting_operations() {
        let rows = growth_report(&[1, 3, 1], 6);
        let r5 = &rows[4];
        assert_eq!(r5.unconstrained, BigUint::from(32768u32));
        assert_eq!(r5.unique_assignment, BigUint::from(1024u32));
        assert_eq!(r5.occupancy_constrained, BigUint::from(336u32));
        assert_eq!(r5.max_agent, BigUint::from(26u32));
    }

    #[test]
    fn single_task_row_degenerates_to_workstations_plus_one() {
        let rows = growth_report(&[1, 3, 1], 1);
        let r1 = &rows[0];
        assert_eq!(r1.unconstrained, BigUint::from(8u32)); // 2^3
        assert_eq!(r1.unique_assignment, BigUint::from(4u32));
        assert_eq!(r1.occupancy_constrained, BigUint::from(4u32));
        assert_eq!(r1.max_agent, BigUint::from(2u32)); // null or the task
    }

    #[test]
    fn agent_column_is_a_polynomial_of_degree_cap() {
        for cap in 1..=4u32 {
            let values: Vec<BigInt> = (1..=14)
                .map(|nj| BigInt::from(count_agent_space(cap, nj)))
                .collect();
            assert_eq!(polynomial_degree(&values, 10), Some(cap as usize));
        }
    }

    #[test]
    fn exponential_columns_fit_no_low_degree_polynomial() {
        let rows = growth_report(&[2, 2], 12);
        let unconstrained = to_bigints(&rows.iter().map(|r| r.unconstrained.clone()).collect::<Vec<_>>());
        let unique = to_bigints(&rows.iter().map(|r| r.unique_assignment.clone()).collect::<Vec<_>>());
        assert_eq!(polynomial_degree(&unconstrained, 7), None);
        assert_eq!(polynomial_degree(&unique, 7), None);
    }

    #[test]
    fn occupancy_constrained_degree_is_the_cap_total() {
        // With fixed caps the nested sum is a polynomial of degree sum(O).
        let rows = growth_report(&[1, 3, 1], 14);
        let vals =
            to_bigints(&rows.iter().map(|r| r.occupancy_constrained.clone()).collect::<Vec<_>>());
        assert_eq!(polynomial_degree(&vals, 12), Some(5));
    }
}
