use alb_cli::robustness::robustness_test;
use alb_rl::train::{train, Algo, Mode, RunConfig};
use alb_sim::instances::table3;
use alb_sim::{AgentActionSpace, CentralizedActionSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let entropy: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let extra: u32 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = table3();
    let space = CentralizedActionSpace::enumerate(&cfg, None).unwrap();
    let spaces = AgentActionSpace::enumerate_all(&cfg);
    for seed in 0..5u64 {
        // Phase 1: train to convergence.
        let mut run = RunConfig::new(Algo::Ppo, Mode::Multi);
        run.episodes = 2000;
        run.seed = seed;
        run.ppo.entropy_coef = entropy;
        run.target_k_end = Some(9);
        run.stop_on_convergence = true;
        let out = train(&cfg, &run).unwrap();
        let conv = out.convergence_episode;
        // Phase 2 (optional): fixed small budget, fresh run, conv+extra episodes.
        let policy = if extra > 0 && conv.is_some() {
            let mut run2 = run.clone();
            run2.episodes = conv.unwrap() + 1 + extra;
            run2.stop_on_convergence = false;
            train(&cfg, &run2).unwrap().final_policy
        } else {
            out.final_policy
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = robustness_test(&policy, &cfg, &space, &spaces, 200, 5, None, &mut rng).unwrap();
        println!("entropy={entropy} extra={extra} seed={seed}: conv={conv:?} fraction={:.3}", rep.fraction_optimal);
    }
}
