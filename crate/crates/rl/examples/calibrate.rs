use alb_rl::train::{train, Algo, Masking, Mode, RunConfig};
use alb_sim::instances::table3;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let algo = if args.get(1).map(|s| s.as_str()) == Some("dqn") { Algo::Dqn } else { Algo::Ppo };
    let mode = if args.get(2).map(|s| s.as_str()) == Some("multi") { Mode::Multi } else { Mode::Central };
    let masked = args.get(3).map(|s| s.as_str()) != Some("off");
    let episodes: u32 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0);

    let cfg = table3();
    let mut run = RunConfig::new(algo, mode);
    run.masking = if masked { Masking::On } else { Masking::OffWithPenalty };
    run.episodes = episodes;
    run.seed = seed;
    run.target_k_end = Some(9);
    run.stop_on_convergence = true;

    let t0 = Instant::now();
    let out = train(&cfg, &run).unwrap();
    let n = out.records.len();
    let window: Vec<u32> = out.records.iter().rev().take(100).map(|r| r.k_end).collect();
    let mut sorted = window.clone();
    sorted.sort();
    println!(
        "algo={algo:?} mode={mode:?} masked={masked} seed={seed}: episodes={} converged={:?} last100 median={} min={} sfc={} infeas_attempts={} elapsed={:.1}s",
        n, out.convergence_episode,
        sorted.get(sorted.len()/2).copied().unwrap_or(0),
        sorted.first().copied().unwrap_or(0),
        out.sfc_invocations, out.infeasible_attempts,
        t0.elapsed().as_secs_f64()
    );
    for chunk in out.records.chunks(200) {
        let ks: Vec<u32> = chunk.iter().map(|r| r.k_end).collect();
        let mut s = ks.clone(); s.sort();
        println!("  ep {:>5}..{:>5}: median {:>2} min {:>2}", chunk[0].episode, chunk.last().unwrap().episode, s[s.len()/2], s[0]);
    }
}
