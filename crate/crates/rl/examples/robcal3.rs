use alb_cli::sampling::sample_reachable_state;
use alb_rl::train::{greedy_rollout, train, Algo, Mode, RunConfig};
use alb_sim::instances::table3;
use alb_sim::{solve_from, AgentActionSpace, CentralizedActionSpace, RewardConfig, Solved};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = if args.get(1).map(|s| s.as_str()) == Some("multi") { Mode::Multi } else { Mode::Central };
    let episodes: u32 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(250);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let entropy: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.01);

    let cfg = table3();
    let mut run = RunConfig::new(Algo::Ppo, mode);
    run.episodes = episodes;
    run.seed = seed;
    run.ppo.entropy_coef = entropy;
    run.target_k_end = Some(9);
    let out = train(&cfg, &run).unwrap();
    let policy = &out.final_policy;

    let space = CentralizedActionSpace::enumerate(&cfg, None).unwrap();
    let spaces = AgentActionSpace::enumerate_all(&cfg);
    let reward = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let central = match mode { Mode::Central => Some(&space), Mode::Multi => None };

    let mut per_depth = vec![(0u32, 0u32); 6]; // (optimal, total)
    let mut gaps = std::collections::BTreeMap::<u32, u32>::new();
    for _ in 0..300 {
        let state = sample_reachable_state(&cfg, &space, 5, &mut rng);
        let clock = state.clock;
        if let Solved::Optimal(r) = solve_from(&state, &cfg, None).unwrap() {
            let k = greedy_rollout(policy, &state, &cfg, central, &spaces, &reward, &mut rng);
            let d = clock as usize;
            per_depth[d].1 += 1;
            if k == r.k_opt { per_depth[d].0 += 1; } else { *gaps.entry(k - r.k_opt).or_default() += 1; }
        }
    }
    println!("mode={mode:?} eps={episodes} seed={seed} ent={entropy} conv={:?}", out.convergence_episode);
    for (d, (opt, tot)) in per_depth.iter().enumerate() {
        if *tot > 0 { println!("  depth {d}: {opt}/{tot} = {:.2}", f64::from(*opt) / f64::from(*tot)); }
    }
    println!("  gap histogram (k_end - k_opt): {gaps:?}");
}
