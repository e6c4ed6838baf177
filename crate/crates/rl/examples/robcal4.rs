use alb_cli::robustness::robustness_test;
use alb_rl::train::{train, Algo, Mode, RunConfig};
use alb_sim::instances::table3;
use alb_sim::{AgentActionSpace, CentralizedActionSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cfg = table3();
    let space = CentralizedActionSpace::enumerate(&cfg, None).unwrap();
    let spaces = AgentActionSpace::enumerate_all(&cfg);
    for mode in [Mode::Multi, Mode::Central] {
        for seed in 0..5u64 {
            let mut run = RunConfig::new(Algo::Ppo, mode);
            run.episodes = 2000;
            run.seed = seed;
            run.target_k_end = Some(9);
            run.stop_on_convergence = true;
            let out = train(&cfg, &run).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let rep = robustness_test(&out.final_policy, &cfg, &space, &spaces, 200, 5, None, &mut rng).unwrap();
            println!(
                "mode={mode:?} seed={seed}: conv={:?} fraction={:.3}",
                out.convergence_episode, rep.fraction_optimal
            );
        }
    }
}
