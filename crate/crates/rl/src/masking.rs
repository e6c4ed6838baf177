//! Mask-aware action selection primitives shared by both agent families.

use alb_sim::ActionMask;
use rand::Rng;

/// Greedy masked choice: the feasible index with the highest value, as if
/// infeasible entries were negative infinity. Ties resolve to the lowest
/// index so evaluation is deterministic.
pub fn masked_argmax(values: &[f64], mask: &ActionMask) -> usize {
    debug_assert_eq!(values.len(), mask.len());
    let mut best: Option<(usize, f64)> = None;
    for z in mask.feasible_indices() {
        let v = values[z];
        match best {
            Some((_, bv)) if bv >= v => {}
            _ => best = Some((z, v)),
        }
    }
    best.expect("mask admits no action").0
}

/// Uniform draw over the feasible indices.
pub fn sample_feasible_uniform(mask: &ActionMask, rng: &mut impl Rng) -> usize {
    let n = mask.count_feasible();
    assert!(n > 0, "mask admits no action");
    let pick = rng.gen_range(0..n);
    mask.feasible_indices().nth(pick).expect("index within feasible count")
}

/// Softmax restricted to the feasible subset: infeasible entries come out as
/// exact zeros and the feasible entries sum to one.
pub fn masked_softmax(logits: &[f64], mask: &ActionMask) -> Vec<f64> {
    debug_assert_eq!(logits.len(), mask.len());
    let mut max = f64::NEG_INFINITY;
    for z in mask.feasible_indices() {
        max = max.max(logits[z]);
    }
    assert!(max.is_finite(), "mask admits no action");
    let mut probs = vec![0.0; logits.len()];
    let mut sum = 0.0;
    for z in mask.feasible_indices() {
        let e = (logits[z] - max).exp();
        probs[z] = e;
        sum += e;
    }
    for p in &mut probs {
        *p /= sum;
    }
    probs
}

/// Log-probability of `action` under the masked softmax, computed in log
/// space so small probabilities stay accurate.
pub fn masked_log_prob(logits: &[f64], mask: &ActionMask, action: usize) -> f64 {
    debug_assert!(mask.get(action), "log-prob of a masked action");
    let mut max = f64::NEG_INFINITY;
    for z in mask.feasible_indices() {
        max = max.max(logits[z]);
    }
    let log_sum: f64 = mask
        .feasible_indices()
        .map(|z| (logits[z] - max).exp())
        .sum::<f64>()
        .ln();
    logits[action] - max - log_sum
}

/// Samples an index from a probability vector via its cumulative sum.
pub fn sample_from_probs(probs: &[f64], rng: &mut impl Rng) -> usize {
    let draw: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (z, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = z;
            cumulative += p;
            if draw < cumulative {
                return z;
            }
        }
    }
    // Rounding can leave the cumulative sum a hair under 1.
    last_positive
}
