//! Command-line front end: enumerate action spaces, solve instances exactly,
//! train and evaluate agents, check masks and emit growth tables.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use alb_cli::manifest::{node_budget_override, run_training, RunManifest};
use alb_cli::{growth, maskcheck, robustness};
use alb_rl::train::{greedy_rollout, Algo, Masking, Mode, ModelCheckpoint, Policy};
use alb_sim::{
    count_agent_space, count_occupancy_constrained, count_unconstrained, count_unique_assignment,
    solve, AgentActionSpace, CentralizedActionSpace, FactoryConfig, RewardConfig, Solved,
};

#[derive(Parser)]
#[command(
    name = "alb",
    about = "Assembly-line balancing: exact solver, masked DRL agents and experiment tooling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Dqn,
    Ppo,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Central,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskArg {
    On,
    Off,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Dqn => Algo::Dqn,
            AlgoArg::Ppo => Algo::Ppo,
        }
    }
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Central => Mode::Central,
            ModeArg::Multi => Mode::Multi,
        }
    }
}

impl From<MaskArg> for Masking {
    fn from(m: MaskArg) -> Self {
        match m {
            MaskArg::On => Masking::On,
            MaskArg::Off => Masking::OffWithPenalty,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print exact action-space sizes for an instance as CSV.
    Enumerate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Compute the minimum makespan and an optimal schedule.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Write the schedule CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one or more seeds and write metrics plus checkpoints.
    Train {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long, value_enum, default_value = "central")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "on")]
        mask: MaskArg,
        /// Seed, or first seed of the batch.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds to run.
        #[arg(long, default_value_t = 1)]
        num_seeds: u64,
        #[arg(long, default_value_t = 2000)]
        episodes: u32,
        #[arg(long)]
        out: PathBuf,
        /// Stop a seed once its trailing-median hits the optimum.
        #[arg(long, default_value_t = false)]
        stop_on_convergence: bool,
        /// Skip the exact solve that provides the reference optimum.
        #[arg(long, default_value_t = false)]
        no_oracle: bool,
    },
    /// Greedy evaluation episodes from a trained checkpoint.
    Evaluate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Robustness study: greedy rollouts from random reachable states scored
    /// against the exact optimum of each state.
    Robustness {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        max_depth: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive mask soundness/completeness sweep over visited states.
    MaskCheck {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        states: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Action-space growth table versus the number of tasks.
    Growth {
        /// Occupancy caps, comma separated (defines the workstations).
        #[arg(long, value_delimiter = ',', default_value = "1,3,1")]
        occupancy: Vec<u32>,
        #[arg(long, default_value_t = 12)]
        max_tasks: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Enumerate { instance } => enumerate_cmd(&instance),
        Command::Solve { instance, out } => solve_cmd(&instance, out.as_deref()),
        Command::Train {
            instance,
            algo,
            mode,
            mask,
            seed,
            num_seeds,
            episodes,
            out,
            stop_on_convergence,
            no_oracle,
        } => {
            let manifest = RunManifest {
                instance: instance.clone(),
                algo: algo.into(),
                mode: mode.into(),
                masking: mask.into(),
                seeds: (seed..seed + num_seeds).collect(),
                episodes,
                out_dir: out,
                solve_oracle: !no_oracle,
                stop_on_convergence,
            };
            let config = load_instance(&instance)?;
            let batch = run_training(&manifest, &config)?;
            if let Some(k) = batch.k_opt {
                println!("k_opt,{k}");
            }
            for s in &batch.seeds {
                println!(
                    "seed {} | episodes {} | converged {} | best k_end {} | metrics {}",
                    s.seed,
                    s.episodes_run,
                    s.convergence_episode.map_or("-".into(), |e| e.to_string()),
                    s.best_k_end,
                    s.metrics_csv.display()
                );
            }
            Ok(())
        }
        Command::Evaluate { instance, checkpoint, episodes, seed } => {
            evaluate_cmd(&instance, &checkpoint, episodes, seed)
        }
        Command::Robustness { instance, checkpoint, samples, max_depth, seed, out } => {
            robustness_cmd(&instance, &checkpoint, samples, max_depth, seed, out.as_deref())
        }
        Command::MaskCheck { instance, states, seed } => mask_check_cmd(&instance, states, seed),
        Command::Growth { occupancy, max_tasks, out } => growth_cmd(&occupancy, max_tasks, out.as_deref()),
    }
}

fn load_instance(path: &std::path::Path) -> Result<FactoryConfig> {
    FactoryConfig::load(path).with_context(|| format!("loading instance {}", path.display()))
}

fn enumerate_cmd(instance: &std::path::Path) -> Result<()> {
    let cfg = load_instance(instance)?;
    let (ni, nj) = (cfg.num_workstations, cfg.num_tasks);
    println!("formula,value");
    println!("2^(|I|*|J|),{}", count_unconstrained(ni, nj));
    println!("(|I|+1)^|J|,{}", count_unique_assignment(ni, nj));
    println!(
        "occupancy-nested-sum,{}",
        count_occupancy_constrained(&cfg.occupancy_caps, nj)
    );
    for (i, &cap) in cfg.occupancy_caps.iter().enumerate() {
        println!("agent{i}-binomial-sum,{}", count_agent_space(cap, nj));
    }
    Ok(())
}

fn solve_cmd(instance: &std::path::Path, out: Option<&std::path::Path>) -> Result<()> {
    let cfg = load_instance(instance)?;
    match solve(&cfg, node_budget_override())? {
        Solved::Optimal(result) => {
            println!("k_opt,{}", result.k_opt);
            println!("nodes_expanded,{}", result.nodes_expanded);
            let mut csv = String::from("clock,workstation,task\n");
            for (clock, action) in &result.schedule {
                for (i, j) in action.assignments() {
                    csv.push_str(&format!("{clock},{i},{j}\n"));
                }
            }
            match out {
                Some(path) => fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Solved::InfeasibleWithinHorizon { nodes_expanded } => {
            println!("infeasible-within-horizon,nodes_expanded,{nodes_expanded}");
        }
    }
    Ok(())
}

fn load_policy(path: &std::path::Path) -> Result<(Policy, ModelCheckpoint)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;
    let ckpt: ModelCheckpoint = serde_json::from_str(&text).context("parsing checkpoint")?;
    Ok((Policy::from_checkpoint(&ckpt), ckpt))
}

fn evaluate_cmd(
    instance: &std::path::Path,
    checkpoint: &std::path::Path,
    episodes: u32,
    seed: u64,
) -> Result<()> {
    let cfg = load_instance(instance)?;
    let (policy, _) = load_policy(checkpoint)?;
    let agent_spaces = AgentActionSpace::enumerate_all(&cfg);
    let central_space = match policy.mode {
        Mode::Central => Some(CentralizedActionSpace::enumerate(&cfg, None)?),
        Mode::Multi => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reward = RewardConfig::default();
    println!("episode,k_end");
    let mut ends = Vec::new();
    for ep in 0..episodes {
        let k_end = greedy_rollout(
            &policy,
            &alb_sim::reset(&cfg),
            &cfg,
            central_space.as_ref(),
            &agent_spaces,
            &reward,
            &mut rng,
        );
        println!("{ep},{k_end}");
        ends.push(k_end);
    }
    ends.sort_unstable();
    if !ends.is_empty() {
        println!("median,{}", ends[ends.len() / 2]);
    }
    Ok(())
}

fn robustness_cmd(
    instance: &std::path::Path,
    checkpoint: &std::path::Path,
    samples: usize,
    max_depth: u32,
    seed: u64,
    out: Option<&std::path::Path>,
) -> Result<()> {
    let cfg = load_instance(instance)?;
    let (policy, _) = load_policy(checkpoint)?;
    let space = CentralizedActionSpace::enumerate(&cfg, None)?;
    let agent_spaces = AgentActionSpace::enumerate_all(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = robustness::robustness_test(
        &policy,
        &cfg,
        &space,
        &agent_spaces,
        samples,
        max_depth,
        node_budget_override(),
        &mut rng,
    )?;
    println!("samples,{}", report.samples);
    println!("optimal,{}", report.optimal);
    println!("excluded,{}", report.excluded);
    println!("fraction_optimal,{:.4}", report.fraction_optimal);
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn mask_check_cmd(instance: &std::path::Path, states: u64, seed: u64) -> Result<()> {
    let cfg = load_instance(instance)?;
    let space = CentralizedActionSpace::enumerate(&cfg, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match maskcheck::rollout_sweep(&cfg, &space, states, &mut rng) {
        Ok(stats) => {
            println!("states_checked,{}", stats.states_checked);
            println!("actions_admitted,{}", stats.actions_admitted);
            println!("actions_rejected,{}", stats.actions_rejected);
            println!("violations,0");
            Ok(())
        }
        Err(e) => bail!("mask discrepancy: {e}"),
    }
}

fn growth_cmd(occupancy: &[u32], max_tasks: usize, out: Option<&std::path::Path>) -> Result<()> {
    let rows = growth::growth_report(occupancy, max_tasks);
    let csv = growth::growth_csv(&rows);
    match out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
