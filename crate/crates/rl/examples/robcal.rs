use alb_cli::robustness::robustness_test;
use alb_rl::train::{train, Algo, Mode, RunConfig};
use alb_sim::instances::table3;
use alb_sim::{AgentActionSpace, CentralizedActionSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = if args.get(1).map(|s| s.as_str()) == Some("multi") { Mode::Multi } else { Mode::Central };
    let entropy: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let episodes: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);
    let use_best = args.get(5).map(|s| s.as_str()) == Some("best");

    let cfg = table3();
    let mut run = RunConfig::new(Algo::Ppo, mode);
    run.episodes = episodes;
    run.seed = seed;
    run.ppo.entropy_coef = entropy;
    run.target_k_end = Some(9);
    let out = train(&cfg, &run).unwrap();
    let policy = if use_best { &out.best_policy } else { &out.final_policy };

    let space = CentralizedActionSpace::enumerate(&cfg, None).unwrap();
    let spaces = AgentActionSpace::enumerate_all(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rep = robustness_test(policy, &cfg, &space, &spaces, 200, 5, None, &mut rng).unwrap();
    println!(
        "mode={mode:?} entropy={entropy} eps={episodes} seed={seed} best={use_best}: converged={:?} fraction={:.3} ({}/{} excl {})",
        out.convergence_episode, rep.fraction_optimal, rep.optimal, rep.samples, rep.excluded
    );
}
