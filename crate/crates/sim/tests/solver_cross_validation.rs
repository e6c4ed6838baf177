//! The branch-and-bound solver against the plain BFS oracle on random small
//! instances, plus certificate replay and bound admissibility.

use alb_sim::instances::table3;
use alb_sim::{
    bfs_optimum, centralized_mask, lower_bound, replay_schedule, reset, solve, solve_from,
    transition, CentralizedActionSpace, FactoryConfig, RewardConfig, Solved,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random instance; forward-only precedence edges keep it acyclic.
fn random_instance(rng: &mut impl Rng) -> FactoryConfig {
    let ni = rng.gen_range(1..=3);
    let nj = rng.gen_range(1..=4);
    let horizon = rng.gen_range(6..=12);
    let durations: Vec<Vec<u32>> =
        (0..ni).map(|_| (0..nj).map(|_| rng.gen_range(1..=3)).collect()).collect();
    let mut precedence = vec![vec![0i8; nj]; nj];
    for a in 0..nj {
        for b in (a + 1)..nj {
            if rng.gen_bool(0.3) {
                precedence[a][b] = 1;
                precedence[b][a] = -1;
            }
        }
    }
    let cfg = FactoryConfig {
        num_workstations: ni,
        num_tasks: nj,
        num_resources: 1,
        horizon,
        occupancy_caps: (0..ni).map(|_| rng.gen_range(1..=2)).collect(),
        buffer_caps: vec![vec![12]; ni],
        durations,
        deadlines: vec![horizon; nj],
        precedence,
        resource_needs: (0..nj).map(|_| vec![rng.gen_range(0..=2)]).collect(),
        inventories: vec![rng.gen_range(4..=12)],
        returnable_resources: rng.gen_bool(0.2),
    };
    cfg.validate().unwrap();
    cfg
}

#[test]
fn branch_and_bound_agrees_with_bfs_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..8 {
        let cfg = random_instance(&mut rng);
        let bnb = solve(&cfg, None).unwrap();
        let bfs = bfs_optimum(&reset(&cfg), &cfg, None).unwrap();
        match (&bnb, bfs) {
            (Solved::Optimal(r), Some(k)) => {
                assert_eq!(r.k_opt, k, "case {case}: {cfg:?}");
                let replayed = replay_schedule(&reset(&cfg), &r.schedule, &cfg).unwrap();
                assert_eq!(replayed, r.k_opt);
            }
            (Solved::InfeasibleWithinHorizon { .. }, None) => {}
            other => panic!("case {case}: solver disagreement {other:?}"),
        }
    }
}

#[test]
fn lower_bound_is_admissible_along_rollouts() {
    let cfg = table3();
    let space = CentralizedActionSpace::enumerate(&cfg, None).unwrap();
    let reward_cfg = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    for _ in 0..4 {
        let mut state = reset(&cfg);
        for _ in 0..rng.gen_range(0..6) {
            if state.done {
                break;
            }
            let mask = centralized_mask(&state, &space, &cfg);
            let pick = rng.gen_range(0..mask.count_feasible());
            let z = mask.feasible_indices().nth(pick).unwrap();
            state = transition(&state, space.decode(z), &cfg, &reward_cfg).unwrap().state;
        }
        let bound = lower_bound(&state, &cfg);
        match solve_from(&state, &cfg, None).unwrap() {
            Solved::Optimal(r) => {
                assert!(
                    state.clock + bound <= r.k_opt,
                    "bound {bound} from clock {} exceeds optimum {}",
                    state.clock,
                    r.k_opt
                );
            }
            Solved::InfeasibleWithinHorizon { .. } => {}
        }
    }
}

#[test]
fn solve_from_terminal_state_is_its_clock() {
    let cfg = table3();
    let mut state = reset(&cfg);
    state.finished = vec![true; 5];
    state.clock = 11;
    match solve_from(&state, &cfg, None).unwrap() {
        Solved::Optimal(r) => {
            assert_eq!(r.k_opt, 11);
            assert!(r.schedule.is_empty());
        }
        other => panic!("terminal state must be solvable: {other:?}"),
    }
}
